//! TOML config documents: a flat `[[strata]]` table for arbitrary
//! processes, or a named-scenario section (`[toy]`, `[extended]`,
//! `[semi_synthetic]`) with overridable defaults.

use std::path::{Path, PathBuf};

use ipsw_core::domain::{DgpSpec, ExtendedDgpSpec, Stratum, StratumOutcomeModel};
use ipsw_core::scenarios::{
    semi_synthetic_dgp, semi_synthetic_from_joint, toy_dgp, toy_extended_dgp, SemiSynthParams,
    SemiSynthetic, ToyExtendedMode, ToyParams, XSupModifier,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One row of the `[[strata]]` table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratumRow {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(rename = "p_R")]
    pub p_r: f64,
    #[serde(rename = "p_T")]
    pub p_t: f64,
    pub pi: f64,
    pub mean0: f64,
    pub mean1: f64,
    pub var0: f64,
    pub var1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyDoc {
    #[serde(rename = "p_R1", default = "default_p_r1")]
    pub p_r1: f64,
    #[serde(rename = "p_T1", default = "default_p_t1")]
    pub p_t1: f64,
    #[serde(default = "default_tau1")]
    pub tau1: f64,
    #[serde(default = "default_tau0")]
    pub tau0: f64,
    #[serde(default = "default_baseline_var")]
    pub baseline_var: f64,
    #[serde(default = "default_pi")]
    pub pi: f64,
}

fn default_p_r1() -> f64 {
    0.75
}
fn default_p_t1() -> f64 {
    0.30
}
fn default_tau1() -> f64 {
    10.0
}
fn default_tau0() -> f64 {
    3.0
}
fn default_baseline_var() -> f64 {
    1.0
}
fn default_pi() -> f64 {
    0.5
}

impl Default for ToyDoc {
    fn default() -> Self {
        ToyDoc {
            p_r1: default_p_r1(),
            p_t1: default_p_t1(),
            tau1: default_tau1(),
            tau0: default_tau0(),
            baseline_var: default_baseline_var(),
            pi: default_pi(),
        }
    }
}

impl ToyDoc {
    pub fn params(&self) -> ToyParams {
        ToyParams {
            p_r1: self.p_r1,
            p_t1: self.p_t1,
            tau1: self.tau1,
            tau0: self.tau0,
            baseline_var: self.baseline_var,
            pi: self.pi,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedDoc {
    #[serde(default)]
    pub toy: ToyDoc,
    /// "shifted_non_modifier" or "non_shifted_modifier"
    pub mode: String,
    #[serde(rename = "q_R", default, skip_serializing_if = "Option::is_none")]
    pub q_r: Option<Vec<f64>>,
    #[serde(rename = "q_T", default, skip_serializing_if = "Option::is_none")]
    pub q_t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_shift: Option<Vec<f64>>,
}

impl ExtendedDoc {
    pub fn mode(&self) -> Result<ToyExtendedMode, CliError> {
        match self.mode.as_str() {
            "shifted_non_modifier" => {
                let q_r = self
                    .q_r
                    .clone()
                    .ok_or_else(|| CliError::validation("[extended] mode shifted_non_modifier needs q_R"))?;
                let q_t = self
                    .q_t
                    .clone()
                    .ok_or_else(|| CliError::validation("[extended] mode shifted_non_modifier needs q_T"))?;
                Ok(ToyExtendedMode::ShiftedNonModifier { q_r, q_t })
            }
            "non_shifted_modifier" => {
                let q = self
                    .q
                    .clone()
                    .ok_or_else(|| CliError::validation("[extended] mode non_shifted_modifier needs q"))?;
                let tau_shift = self.tau_shift.clone().ok_or_else(|| {
                    CliError::validation("[extended] mode non_shifted_modifier needs tau_shift")
                })?;
                Ok(ToyExtendedMode::NonShiftedModifier { q, tau_shift })
            }
            other => Err(CliError::validation(format!(
                "unknown [extended] mode {other:?}; use shifted_non_modifier or non_shifted_modifier"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XSupDoc {
    pub q: Vec<f64>,
    pub tau_shift: Vec<f64>,
}

macro_rules! marginal_fields {
    ($($field:ident),*) => {
        #[derive(Debug, Clone, Default, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct SemiSynthDoc {
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<Vec<f64>>,
            )*
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub noise_scale: Option<Vec<f64>>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub pi: Option<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub x_sup: Option<XSupDoc>,
            /// Joint-frequency CSV replacing the independent marginals:
            /// header combo_id,glasgow,gender,pupil,age,blood_pressure,time_to_treatment,p_R,p_T.
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub joint_csv: Option<String>,
        }
    };
}

marginal_fields!(
    glasgow_trial,
    glasgow_target,
    gender_trial,
    gender_target,
    pupil_trial,
    pupil_target,
    age_trial,
    age_target,
    blood_pressure_trial,
    blood_pressure_target,
    time_to_treatment_trial,
    time_to_treatment_target
);

impl SemiSynthDoc {
    pub fn params(&self) -> SemiSynthParams {
        let d = SemiSynthParams::default();
        SemiSynthParams {
            glasgow_r: self.glasgow_trial.clone().unwrap_or(d.glasgow_r),
            glasgow_t: self.glasgow_target.clone().unwrap_or(d.glasgow_t),
            gender_r: self.gender_trial.clone().unwrap_or(d.gender_r),
            gender_t: self.gender_target.clone().unwrap_or(d.gender_t),
            pupil_r: self.pupil_trial.clone().unwrap_or(d.pupil_r),
            pupil_t: self.pupil_target.clone().unwrap_or(d.pupil_t),
            age_r: self.age_trial.clone().unwrap_or(d.age_r),
            age_t: self.age_target.clone().unwrap_or(d.age_t),
            blood_pressure_r: self.blood_pressure_trial.clone().unwrap_or(d.blood_pressure_r),
            blood_pressure_t: self.blood_pressure_target.clone().unwrap_or(d.blood_pressure_t),
            time_to_treatment_r: self.time_to_treatment_trial.clone().unwrap_or(d.time_to_treatment_r),
            time_to_treatment_t: self.time_to_treatment_target.clone().unwrap_or(d.time_to_treatment_t),
            noise_scale: self.noise_scale.clone().unwrap_or(d.noise_scale),
            pi: self.pi.unwrap_or(d.pi),
            x_sup: self
                .x_sup
                .as_ref()
                .map(|x| XSupModifier { q: x.q.clone(), tau_shift: x.tau_shift.clone() }),
        }
    }
}

/// The root config document; exactly one section must be present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<StratumRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extended: Option<ExtendedDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_synthetic: Option<SemiSynthDoc>,
}

/// A parsed and validated config.
#[derive(Debug, Clone)]
pub enum LoadedSpec {
    Flat(DgpSpec),
    Extended(ExtendedDgpSpec),
    SemiSynthetic(Box<SemiSynthetic>),
}

impl LoadedSpec {
    /// The process every estimator-facing command runs on: extended specs
    /// are flattened over (X, V).
    pub fn flat(&self) -> DgpSpec {
        match self {
            LoadedSpec::Flat(s) => s.clone(),
            LoadedSpec::Extended(e) => e.flatten(),
            LoadedSpec::SemiSynthetic(s) => s.spec.clone(),
        }
    }
}

fn spec_from_rows(rows: &[StratumRow]) -> Result<DgpSpec, CliError> {
    let mut strata = Vec::with_capacity(rows.len());
    let mut p_r = Vec::with_capacity(rows.len());
    let mut p_t = Vec::with_capacity(rows.len());
    let mut pi = Vec::with_capacity(rows.len());
    let mut outcomes = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.id as usize != i {
            return Err(CliError::validation(format!(
                "strata ids must be dense and in order: row {i} has id {}",
                row.id
            )));
        }
        strata.push(match &row.label {
            Some(l) => Stratum::labeled(row.id, l.clone()),
            None => Stratum::new(row.id),
        });
        p_r.push(row.p_r);
        p_t.push(row.p_t);
        pi.push(row.pi);
        outcomes.push(StratumOutcomeModel::new(row.mean0, row.mean1, row.var0, row.var1));
    }
    DgpSpec::new(strata, p_r, p_t, pi, outcomes)
        .map_err(|violations| CliError::validation(format!("invalid [[strata]] table: {violations:?}")))
}

/// Serializes a flat spec back into a `[[strata]]` document.
pub fn spec_to_doc(spec: &DgpSpec) -> SpecDoc {
    let strata = spec
        .strata()
        .iter()
        .map(|s| {
            let i = s.id.index();
            let o = &spec.outcomes()[i];
            StratumRow {
                id: s.id.0,
                label: s.label.clone(),
                p_r: spec.p_r()[i],
                p_t: spec.p_t()[i],
                pi: spec.pi()[i],
                mean0: o.mean0,
                mean1: o.mean1,
                var0: o.var0,
                var1: o.var1,
            }
        })
        .collect();
    SpecDoc { strata, ..SpecDoc::default() }
}

fn read_joint_csv(path: &Path) -> Result<Vec<(Vec<usize>, f64, f64)>, CliError> {
    const COVARIATES: [&str; 6] =
        ["glasgow", "gender", "pupil", "age", "blood_pressure", "time_to_treatment"];
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::io(format!("cannot read joint csv {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::validation(format!("joint csv: {e}")))?
        .clone();
    let expected: Vec<&str> = std::iter::once("combo_id")
        .chain(COVARIATES)
        .chain(["p_R", "p_T"])
        .collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(CliError::validation(format!(
            "joint csv header must be {}, got {}",
            expected.join(","),
            got.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::validation(format!("joint csv: {e}")))?;
        let field = |idx: usize| -> Result<f64, CliError> {
            record[idx]
                .parse::<f64>()
                .map_err(|e| CliError::validation(format!("joint csv row {}: {e}", line + 2)))
        };
        let mut levels = Vec::with_capacity(6);
        for c in 1..=6 {
            levels.push(field(c)? as usize);
        }
        rows.push((levels, field(7)?, field(8)?));
    }
    Ok(rows)
}

/// Parses and validates a config document from disk.
pub fn load_spec(path: &Path) -> Result<LoadedSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    let doc: SpecDoc = toml::from_str(&text)
        .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
    load_doc(&doc, path.parent().unwrap_or(Path::new(".")))
}

/// Builds the spec from an already-parsed document; relative joint-csv
/// paths resolve against `base_dir`.
pub fn load_doc(doc: &SpecDoc, base_dir: &Path) -> Result<LoadedSpec, CliError> {
    let mut sections = 0;
    sections += usize::from(!doc.strata.is_empty());
    sections += usize::from(doc.toy.is_some());
    sections += usize::from(doc.extended.is_some());
    sections += usize::from(doc.semi_synthetic.is_some());
    if sections != 1 {
        return Err(CliError::validation(
            "config must contain exactly one of: [[strata]], [toy], [extended], [semi_synthetic]",
        ));
    }
    if !doc.strata.is_empty() {
        return Ok(LoadedSpec::Flat(spec_from_rows(&doc.strata)?));
    }
    if let Some(toy) = &doc.toy {
        let spec = toy_dgp(&toy.params()).map_err(|e| CliError::validation(format!("[toy]: {e}")))?;
        return Ok(LoadedSpec::Flat(spec));
    }
    if let Some(ext) = &doc.extended {
        let spec = toy_extended_dgp(&ext.toy.params(), &ext.mode()?)
            .map_err(|e| CliError::validation(format!("[extended]: {e}")))?;
        return Ok(LoadedSpec::Extended(spec));
    }
    let semi = doc.semi_synthetic.as_ref().expect("section counted above");
    let params = semi.params();
    let built = match &semi.joint_csv {
        Some(rel) => {
            let mut path = PathBuf::from(rel);
            if path.is_relative() {
                path = base_dir.join(path);
            }
            let rows = read_joint_csv(&path)?;
            semi_synthetic_from_joint(&params, &rows)
                .map_err(|e| CliError::validation(format!("[semi_synthetic]: {e}")))?
        }
        None => semi_synthetic_dgp(&params)
            .map_err(|e| CliError::validation(format!("[semi_synthetic]: {e}")))?,
    };
    Ok(LoadedSpec::SemiSynthetic(Box::new(built)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_doc_round_trips_through_strata_table() {
        let spec = toy_dgp(&ToyParams::default()).unwrap();
        let doc = spec_to_doc(&spec);
        let text = toml::to_string_pretty(&doc).unwrap();
        let parsed: SpecDoc = toml::from_str(&text).unwrap();
        match load_doc(&parsed, Path::new(".")).unwrap() {
            LoadedSpec::Flat(reloaded) => assert_eq!(reloaded, spec),
            other => panic!("expected flat spec, got {other:?}"),
        }
    }

    #[test]
    fn labels_survive_serialization() {
        let spec = toy_dgp(&ToyParams::default()).unwrap();
        let doc = spec_to_doc(&spec);
        assert_eq!(doc.strata[1].label.as_deref(), Some("X=1"));
    }

    #[test]
    fn multiple_sections_rejected() {
        let doc: SpecDoc = toml::from_str("[toy]\n[semi_synthetic]\n").unwrap();
        assert!(load_doc(&doc, Path::new(".")).is_err());
        let empty: SpecDoc = toml::from_str("").unwrap();
        assert!(load_doc(&empty, Path::new(".")).is_err());
    }

    #[test]
    fn parse_error_reports_location() {
        let err = toml::from_str::<SpecDoc>("[toy]\np_R1 = \"high\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("p_R1") || msg.contains("line"), "{msg}");
    }

    #[test]
    fn extended_mode_requires_matching_fields() {
        let doc: SpecDoc =
            toml::from_str("[extended]\nmode = \"shifted_non_modifier\"\nq_R = [0.5, 0.5]\n").unwrap();
        assert!(load_doc(&doc, Path::new(".")).is_err());
    }
}
