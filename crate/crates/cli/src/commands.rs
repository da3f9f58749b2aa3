//! Command implementations over the core library.

use std::path::{Path, PathBuf};

use ipsw_core::domain::DgpSpec;
use ipsw_core::scenarios::{self, SemiSynthetic, MINIMAL_ADJUSTMENT_SET};
use ipsw_core::simulate::{
    inflation_experiment, regime_sweep, run_monte_carlo_adjusted, AdjustmentView, McConfig, SweepRegime,
};
use ipsw_core::theory::{self, TargetSize};

use crate::config::{self, LoadedSpec, SpecDoc, ToyDoc, XSupDoc};
use crate::output::{self, RunManifest};
use crate::{
    parse_estimators, CliError, InflationArgs, InflationCoreArgs, McArgs, ScenarioAction, ScenarioArgs,
    SimulateArgs, SweepArgs, SweepCoreArgs, TheoryArgs,
};

fn read_config_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))
}

fn parse_target_size(text: &str) -> Result<TargetSize, CliError> {
    if text == "inf" {
        Ok(TargetSize::Infinite)
    } else {
        text.parse::<u64>()
            .map(TargetSize::Finite)
            .map_err(|_| CliError::validation(format!("--m must be a positive integer or \"inf\", got {text:?}")))
    }
}

fn theory_validation(e: theory::TheoryError) -> CliError {
    CliError::validation(e.to_string())
}

fn simulate_validation(e: ipsw_core::simulate::SimulateError) -> CliError {
    CliError::validation(e.to_string())
}

pub fn run_theory(args: &TheoryArgs) -> Result<(), CliError> {
    let bytes = read_config_bytes(&args.config)?;
    let loaded = config::load_spec(&args.config)?;
    let spec = loaded.flat();
    let m = parse_target_size(&args.m)?;
    let tags = parse_estimators(&args.estimators)?;
    let reports = tags
        .iter()
        .map(|&tag| theory::theory_report(&spec, tag, args.n, m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(theory_validation)?;
    output::write_theory_json(&args.out, &reports)?;
    let mut outputs: Vec<PathBuf> = vec![args.out.clone()];
    // extended configs additionally get the adjustment-set comparison
    if let LoadedSpec::Extended(ext) = &loaded {
        let report = theory::adjustment_report(ext).map_err(theory_validation)?;
        let mut name = args.out.file_stem().unwrap_or_default().to_os_string();
        name.push(".adjustment.json");
        let path = args.out.with_file_name(name);
        output::write_adjustment_json(&path, &report)?;
        outputs.push(path);
    }
    let out_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    RunManifest::new(&bytes, None, &out_refs).write_beside(&args.out)?;
    Ok(())
}

fn mc_config(mc: &McArgs) -> Result<McConfig, CliError> {
    Ok(McConfig {
        n: mc.n,
        m: mc.m,
        reps: mc.reps,
        seed: mc.seed,
        estimators: parse_estimators(&mc.estimators)?,
    })
}

fn run_simulate_on(
    spec: &DgpSpec,
    view: Option<&AdjustmentView>,
    mc: &McArgs,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = mc_config(mc)?;
    let report = run_monte_carlo_adjusted(spec, &cfg, view).map_err(simulate_validation)?;
    output::write_mc_csv(out, &report)
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let bytes = read_config_bytes(&args.config)?;
    let spec = config::load_spec(&args.config)?.flat();
    run_simulate_on(&spec, None, &args.mc, &args.out)?;
    RunManifest::new(&bytes, Some(args.mc.seed), &[&args.out]).write_beside(&args.out)?;
    Ok(())
}

fn sweep_regime(core: &SweepCoreArgs) -> Result<SweepRegime, CliError> {
    match (&core.fixed_m, &core.ratio) {
        (Some(m), None) => Ok(SweepRegime::FixedM(*m)),
        (None, Some(r)) if r == "inf" => Ok(SweepRegime::RatioInfinite),
        (None, Some(r)) => {
            let l: f64 = r
                .parse()
                .map_err(|_| CliError::validation(format!("--ratio must be a number or \"inf\", got {r:?}")))?;
            Ok(SweepRegime::Ratio(l))
        }
        _ => Err(CliError::validation("exactly one of --fixed-m and --ratio is required")),
    }
}

fn run_sweep_on(spec: &DgpSpec, core: &SweepCoreArgs, out_csv: &Path) -> Result<PathBuf, CliError> {
    let regime = sweep_regime(core)?;
    let tags = parse_estimators(&core.estimators)?;
    let rows =
        regime_sweep(spec, &core.n_grid, regime, &tags, core.reps, core.seed).map_err(simulate_validation)?;
    output::write_sweep_csv(out_csv, &rows)?;
    let json_path = out_csv.with_extension("json");
    output::write_sweep_json(&json_path, &rows)?;
    Ok(json_path)
}

pub fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let bytes = read_config_bytes(&args.config)?;
    let spec = config::load_spec(&args.config)?.flat();
    let json_path = run_sweep_on(&spec, &args.core, &args.out)?;
    RunManifest::new(&bytes, Some(args.core.seed), &[&args.out, &json_path]).write_beside(&args.out)?;
    Ok(())
}

fn run_inflation_on(spec: &DgpSpec, core: &InflationCoreArgs, out: &Path) -> Result<(), CliError> {
    let grid = scenarios::binary_shift_grid(core.trial_q0, &core.shifts)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let rows = inflation_experiment(spec, &grid, core.n, core.m, core.reps, core.seed)
        .map_err(simulate_validation)?;
    output::write_inflation_csv(out, &core.shifts, &rows)
}

pub fn run_inflation(args: &InflationArgs) -> Result<(), CliError> {
    let bytes = read_config_bytes(&args.config)?;
    let spec = config::load_spec(&args.config)?.flat();
    run_inflation_on(&spec, &args.core, &args.out)?;
    RunManifest::new(&bytes, Some(args.core.seed), &[&args.out]).write_beside(&args.out)?;
    Ok(())
}

/// Builds the scenario's config document from the command-line overrides.
fn scenario_doc(args: &ScenarioArgs) -> Result<SpecDoc, CliError> {
    match args.name.as_str() {
        "toy" => Ok(SpecDoc { toy: Some(ToyDoc::default()), ..SpecDoc::default() }),
        "toy-extended" => {
            let mode = match args.mode.as_str() {
                "shifted" => {
                    let q_r = if args.imbalanced { vec![0.25, 0.75] } else { vec![0.5, 0.5] };
                    let q_t = args.q_t.clone().unwrap_or_else(|| vec![0.5, 0.5]);
                    config::ExtendedDoc {
                        toy: ToyDoc::default(),
                        mode: "shifted_non_modifier".into(),
                        q_r: Some(q_r),
                        q_t: Some(q_t),
                        q: None,
                        tau_shift: None,
                    }
                }
                "modifier" => config::ExtendedDoc {
                    toy: ToyDoc::default(),
                    mode: "non_shifted_modifier".into(),
                    q_r: None,
                    q_t: None,
                    q: Some(args.q.clone().unwrap_or_else(|| vec![0.5, 0.5])),
                    tau_shift: Some(args.tau_shift.clone().unwrap_or_else(|| vec![-2.0, 2.0])),
                },
                other => {
                    return Err(CliError::validation(format!(
                        "unknown toy-extended mode {other:?}; use shifted or modifier"
                    )))
                }
            };
            Ok(SpecDoc { extended: Some(mode), ..SpecDoc::default() })
        }
        "semi-synthetic" => {
            let mut doc = config::SemiSynthDoc::default();
            if args.with_x_sup || matches!(args.adjust.as_deref(), Some("minimal+x_sup")) {
                let x = ipsw_core::scenarios::XSupModifier::default();
                doc.x_sup = Some(XSupDoc { q: x.q, tau_shift: x.tau_shift });
            }
            Ok(SpecDoc { semi_synthetic: Some(doc), ..SpecDoc::default() })
        }
        other => Err(CliError::validation(format!(
            "unknown scenario {other:?}; valid names: toy, toy-extended, semi-synthetic"
        ))),
    }
}

/// Resolves `--adjust` into the estimator-side view for semi-synthetic runs.
fn adjustment_view(built: &SemiSynthetic, adjust: &str) -> Result<Option<AdjustmentView>, CliError> {
    let factors: Vec<&str> = match adjust {
        "full" => return Ok(None),
        "minimal" => MINIMAL_ADJUSTMENT_SET.to_vec(),
        "minimal+glasgow" => {
            let mut v = MINIMAL_ADJUSTMENT_SET.to_vec();
            v.push("glasgow");
            v
        }
        "minimal+x_sup" => {
            let mut v = MINIMAL_ADJUSTMENT_SET.to_vec();
            v.push("x_sup");
            v
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown adjustment set {other:?}; valid: minimal, minimal+glasgow, minimal+x_sup, full"
            )))
        }
    };
    built.adjustment_view(&factors).map(Some).map_err(|e| CliError::validation(e.to_string()))
}

pub fn run_scenario(args: &ScenarioArgs) -> Result<(), CliError> {
    let doc = scenario_doc(args)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", args.out.display())))?;
    let config_path = args.out.join("config.toml");
    let config_text = toml::to_string_pretty(&doc)
        .map_err(|e| CliError::io(format!("serializing scenario config: {e}")))?;
    std::fs::write(&config_path, &config_text)
        .map_err(|e| CliError::io(format!("writing {}: {e}", config_path.display())))?;

    let loaded = config::load_doc(&doc, &args.out)?;

    // also materialize the flat stratum table; it reloads to the same
    // process the run used
    let spec_path = args.out.join("spec.toml");
    let spec_doc = config::spec_to_doc(&loaded.flat());
    let spec_text = toml::to_string_pretty(&spec_doc)
        .map_err(|e| CliError::io(format!("serializing flat spec: {e}")))?;
    std::fs::write(&spec_path, &spec_text)
        .map_err(|e| CliError::io(format!("writing {}: {e}", spec_path.display())))?;

    let view = match (&loaded, &args.adjust) {
        (LoadedSpec::SemiSynthetic(built), Some(adjust)) => adjustment_view(built, adjust)?,
        (_, Some(_)) => {
            return Err(CliError::validation("--adjust only applies to the semi-synthetic scenario"))
        }
        _ => None,
    };
    let spec = loaded.flat();

    let (out_file, seed, extra) = match &args.action {
        ScenarioAction::Simulate(mc) => {
            let out = args.out.join("simulate.csv");
            run_simulate_on(&spec, view.as_ref(), mc, &out)?;
            (out, mc.seed, None)
        }
        ScenarioAction::Sweep(core) => {
            if view.is_some() {
                return Err(CliError::validation("--adjust is not supported for sweep"));
            }
            let out = args.out.join("sweep.csv");
            let json = run_sweep_on(&spec, core, &out)?;
            (out, core.seed, Some(json))
        }
        ScenarioAction::Inflation(core) => {
            if view.is_some() {
                return Err(CliError::validation("--adjust is not supported for inflation"));
            }
            let out = args.out.join("inflation.csv");
            run_inflation_on(&spec, core, &out)?;
            (out, core.seed, None)
        }
    };

    let mut outputs: Vec<&Path> = vec![&config_path, &spec_path, &out_file];
    if let Some(json) = &extra {
        outputs.push(json);
    }
    let manifest = RunManifest::new(config_text.as_bytes(), Some(seed), &outputs);
    output::write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(())
}
