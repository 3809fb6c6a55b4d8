//! Structured check records and suite reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("unknown suite `{0}`; expected one of {list}", list = SUITES.join(", "))]
    UnknownSuite(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("check `{0}` failed without a witness")]
    MissingWitness(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("report encoding: {0}")]
    Encode(#[from] serde_json::Error),
}

pub const SUITES: [&str; 9] = ["finite-axioms", "finite-pushforward", "pair-composition", "cones", "derivative", "snowflake", "flows", "trad2", "all"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub id: String,
    pub anchor: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    pub details: Value,
    pub seed: u64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl CheckRecord {
    pub fn pass(id: impl Into<String>, anchor: &str, details: Value) -> Self {
        Self { id: id.into(), anchor: anchor.into(), verdict: Verdict::Pass, witness: None, details, seed: 0, samples: 0, elapsed_ms: None }
    }

    pub fn fail(id: impl Into<String>, anchor: &str, witness: Value, details: Value) -> Self {
        Self { verdict: Verdict::Fail, witness: Some(witness), ..Self::pass(id, anchor, details) }
    }

    pub fn inconclusive(id: impl Into<String>, anchor: &str, details: Value) -> Self {
        Self { verdict: Verdict::Inconclusive, ..Self::pass(id, anchor, details) }
    }

    /// Pass when `witness` is `None`, fail carrying it otherwise.
    pub fn from_witness(id: impl Into<String>, anchor: &str, witness: Option<Value>, details: Value) -> Self {
        match witness {
            None => Self::pass(id, anchor, details),
            Some(w) => Self::fail(id, anchor, w, details),
        }
    }

    pub fn sampled(mut self, seed: u64, samples: usize) -> Self {
        self.seed = seed;
        self.samples = samples;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

impl Summary {
    pub fn of(records: &[CheckRecord]) -> Self {
        let mut s = Summary::default();
        for r in records {
            match r.verdict {
                Verdict::Pass => s.pass += 1,
                Verdict::Fail => s.fail += 1,
                Verdict::Inconclusive => s.inconclusive += 1,
            }
        }
        s
    }
}

/// Settings for a suite run. `out` and `timings` never enter the report body
/// except through `elapsed_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Overrides every sampled check's default count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub tol: f64,
    pub improper: bool,
    /// Largest point count for exhaustive finite sweeps.
    pub max_points: usize,
    #[serde(skip)]
    pub timings: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub const MAX_POINTS_CAP: usize = 4;

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, samples: None, tol: 1e-6, improper: false, max_points: 4, timings: false, out: None }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.samples == Some(0) {
            return Err(ReportError::ConfigInvalid("samples must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ReportError::ConfigInvalid(format!("tol must be a positive number, got {}", self.tol)));
        }
        if !(1..=MAX_POINTS_CAP).contains(&self.max_points) {
            return Err(ReportError::ConfigInvalid(format!("max_points must lie in 1..={MAX_POINTS_CAP}, got {}", self.max_points)));
        }
        Ok(())
    }

    pub fn samples_or(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteReport {
    pub suite: String,
    pub config: RunConfig,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl SuiteReport {
    pub fn new(suite: &str, config: RunConfig, records: Vec<CheckRecord>) -> Self {
        let summary = Summary::of(&records);
        Self { suite: suite.into(), config, records, summary }
    }

    pub fn passed(&self) -> bool {
        self.summary.fail == 0
    }

    /// Verdict, witness and summary invariants.
    pub fn validate(&self) -> Result<(), ReportError> {
        if let Some(r) = self.records.iter().find(|r| r.verdict == Verdict::Fail && r.witness.is_none()) {
            return Err(ReportError::MissingWitness(r.id.clone()));
        }
        if self.summary != Summary::of(&self.records) {
            return Err(ReportError::ConfigInvalid("summary does not match the records".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let r: SuiteReport = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, self.to_json()?).map_err(|e| ReportError::Io { path: path.to_path_buf(), message: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> SuiteReport {
        let records = vec![
            CheckRecord::pass("a", "def:dfilta", json!({"count": 3})).sampled(7, 100),
            CheckRecord::fail("b", "prop:snowflake", json!({"ratios": [0.1, 1e-300, 0.30000000000000004]}), json!({})),
            CheckRecord::inconclusive("c", "prop:commute", json!({"unresolved": 2})),
        ];
        SuiteReport::new("x", RunConfig { samples: Some(5), ..Default::default() }, records)
    }

    #[test]
    fn round_trip_is_lossless() {
        let r = sample();
        assert_eq!(r.summary, Summary { pass: 1, fail: 1, inconclusive: 1 });
        let text = r.to_json().unwrap();
        let back = SuiteReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn fail_needs_a_witness() {
        let mut r = sample();
        r.records[1].witness = None;
        assert!(matches!(r.validate(), Err(ReportError::MissingWitness(id)) if id == "b"));
        let text = serde_json::to_string(&r).unwrap();
        assert!(SuiteReport::from_json(&text).is_err());
    }

    #[test]
    fn config_bounds() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { samples: Some(0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(RunConfig { tol: f64::NAN, ..Default::default() }.validate().is_err());
        assert!(RunConfig { max_points: 6, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn timings_stay_out_of_the_config() {
        let a = RunConfig { timings: true, out: Some("x.json".into()), ..Default::default() };
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&RunConfig::default()).unwrap());
    }
}
