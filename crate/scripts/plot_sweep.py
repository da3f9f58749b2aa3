#!/usr/bin/env python3
"""Plot a regime sweep: scaled Monte Carlo variance per trial size against
its asymptote.

Example:
    ipsw sweep --config toy.toml --n-grid 200,500,1000,2000,5000 \
        --ratio 10 --reps 6000 --seed 1 --out sweep.csv
    python scripts/plot_sweep.py sweep.csv sweep.png
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main() -> None:
    if len(sys.argv) != 3:
        sys.exit(f"usage: {sys.argv[0]} SWEEP_CSV OUT_PNG")
    df = pd.read_csv(sys.argv[1])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for estimator, group in df.groupby("estimator"):
        line = ax.plot(group["n"], group["scaled_variance"], "o-", label=estimator)
        ax.axhline(
            group["theory_asymptote"].iloc[0],
            color=line[0].get_color(),
            linestyle="--",
            linewidth=1,
        )
    ax.set_xscale("log")
    ax.set_xlabel("trial size n")
    ax.set_ylabel("min(n, m) x variance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(sys.argv[2], dpi=150)
    print(f"wrote {sys.argv[2]}")


if __name__ == "__main__":
    main()
