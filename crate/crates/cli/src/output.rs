//! Output files: CSV tables, JSON reports, and the run manifest written
//! alongside every output.
//!
//! Data files are byte-identical across reruns of the same (config, flags,
//! seed, version); the manifest carries the wall-clock timestamp and the
//! config hash needed to reproduce the run.

use std::path::{Path, PathBuf};

use ipsw_core::simulate::{InflationRow, McReport, SweepRow};
use ipsw_core::theory::{TargetSize, TheoryReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Everything needed to reproduce a run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: &'static str,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config_bytes: &[u8], seed: Option<u64>, outputs: &[&Path]) -> Self {
        let digest = Sha256::digest(config_bytes);
        let timestamp = time::OffsetDateTime::now_utc()
            .format(&time::format_description::well_known::Rfc3339)
            .unwrap_or_else(|_| "unknown".into());
        RunManifest {
            command_line: std::env::args().collect(),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            timestamp,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }

    /// Writes `<out>.manifest.json` next to the first output.
    pub fn write_beside(&self, out: &Path) -> Result<PathBuf, CliError> {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = out.with_file_name(name);
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))
}

fn open_csv(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))
}

fn finish_csv(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_target_size(m: TargetSize) -> String {
    match m {
        TargetSize::Finite(m) => m.to_string(),
        TargetSize::Infinite => "inf".into(),
    }
}

/// `estimator,mean,bias,variance,mse,mc_se,degenerate_reps`; unavailable
/// statistics (single-replicate runs) are empty fields.
pub fn write_mc_csv(path: &Path, report: &McReport) -> Result<(), CliError> {
    let mut w = open_csv(path)?;
    w.write_record(["estimator", "mean", "bias", "variance", "mse", "mc_se", "degenerate_reps"])
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    for s in &report.stats {
        w.write_record([
            s.tag.name().to_string(),
            fmt_f64(s.mean),
            fmt_f64(s.bias_vs_true_ate),
            s.empirical_variance.map(fmt_f64).unwrap_or_default(),
            fmt_f64(s.mse),
            s.monte_carlo_standard_error.map(fmt_f64).unwrap_or_default(),
            s.degenerate_reps.to_string(),
        ])
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    }
    finish_csv(w, path)
}

/// `n,m,estimator,scaled_variance,theory_asymptote`.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = open_csv(path)?;
    w.write_record(["n", "m", "estimator", "scaled_variance", "theory_asymptote"])
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt_target_size(r.m),
            r.estimator.name().to_string(),
            fmt_f64(r.scaled_variance),
            fmt_f64(r.theory_asymptote),
        ])
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    }
    finish_csv(w, path)
}

#[derive(Debug, Serialize)]
struct SweepRowJson {
    n: u64,
    m: serde_json::Value,
    estimator: &'static str,
    variance: f64,
    scaled_variance: f64,
    theory_asymptote: f64,
}

/// JSON sidecar of the sweep with the raw variances included.
pub fn write_sweep_json(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let body: Vec<SweepRowJson> = rows
        .iter()
        .map(|r| SweepRowJson {
            n: r.n,
            m: target_size_json(r.m),
            estimator: r.estimator.name(),
            variance: r.variance,
            scaled_variance: r.scaled_variance,
            theory_asymptote: r.theory_asymptote,
        })
        .collect();
    write_json(path, &body)
}

/// `shift_param,theory_factor,empirical_factor,mc_se`.
pub fn write_inflation_csv(path: &Path, shifts: &[f64], rows: &[InflationRow]) -> Result<(), CliError> {
    let mut w = open_csv(path)?;
    w.write_record(["shift_param", "theory_factor", "empirical_factor", "mc_se"])
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    for r in rows {
        w.write_record([
            fmt_f64(shifts[r.shift_index]),
            fmt_f64(r.theory_factor),
            fmt_f64(r.empirical_factor),
            fmt_f64(r.mc_se),
        ])
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    }
    finish_csv(w, path)
}

fn target_size_json(m: TargetSize) -> serde_json::Value {
    match m {
        TargetSize::Finite(m) => serde_json::json!(m),
        TargetSize::Infinite => serde_json::json!("inf"),
    }
}

#[derive(Debug, Serialize)]
struct TheoryReportJson {
    estimator: &'static str,
    n: u64,
    m: serde_json::Value,
    bias: f64,
    variance_exact: Option<f64>,
    variance_bound: f64,
    risk_bound: f64,
    asymptotic_variance: f64,
}

#[derive(Debug, Serialize)]
struct AdjustmentJson {
    inflation_factor: f64,
    variance_reduction: f64,
    base_asymptotic_variance: f64,
    extended_asymptotic_variance: f64,
}

/// Stable-key JSON form of the adjustment-set comparison.
pub fn write_adjustment_json(
    path: &Path,
    report: &ipsw_core::theory::AdjustmentSetReport,
) -> Result<(), CliError> {
    write_json(
        path,
        &AdjustmentJson {
            inflation_factor: report.inflation_factor,
            variance_reduction: report.variance_reduction,
            base_asymptotic_variance: report.base_asymptotic_variance,
            extended_asymptotic_variance: report.extended_asymptotic_variance,
        },
    )
}

/// JSON array of theory reports with stable keys; m = ∞ serializes as the
/// string "inf".
pub fn write_theory_json(path: &Path, reports: &[TheoryReport]) -> Result<(), CliError> {
    let body: Vec<TheoryReportJson> = reports
        .iter()
        .map(|r| TheoryReportJson {
            estimator: r.estimator.name(),
            n: r.n,
            m: target_size_json(r.m),
            bias: r.bias,
            variance_exact: r.variance_exact,
            variance_bound: r.variance_bound,
            risk_bound: r.risk_bound,
            asymptotic_variance: r.asymptotic_variance,
        })
        .collect();
    write_json(path, &body)
}
