#!/usr/bin/env python3
"""Plot the covariate-inflation experiment: the closed-form factor as a
line, the empirical variance ratios as dots with error bars.

Example:
    ipsw inflation --config toy.toml --shifts 0,0.0625,0.125,0.1875,0.25 \
        --n 150 --m 1000 --reps 1000 --seed 1 --out inflation.csv
    python scripts/plot_inflation.py inflation.csv inflation.png
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main() -> None:
    if len(sys.argv) != 3:
        sys.exit(f"usage: {sys.argv[0]} INFLATION_CSV OUT_PNG")
    df = pd.read_csv(sys.argv[1])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(df["shift_param"], df["theory_factor"], "-", label="closed form")
    ax.errorbar(
        df["shift_param"],
        df["empirical_factor"],
        yerr=df["mc_se"],
        fmt="o",
        capsize=3,
        label="Monte Carlo",
    )
    ax.set_xlabel("shift of the auxiliary covariate")
    ax.set_ylabel("variance inflation factor")
    ax.legend()
    fig.tight_layout()
    fig.savefig(sys.argv[2], dpi=150)
    print(f"wrote {sys.argv[2]}")


if __name__ == "__main__":
    main()
