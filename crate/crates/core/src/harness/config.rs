use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MastScaling,
    CascadeStats,
    CouplingCheck,
    AuditSuite,
    BoundsSuite,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Jsonl,
    Csv,
}

/// One experiment. Unset knobs fall back to per-kind defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub k_grid: Vec<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    /// Excursion grid size per piece.
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub bootstrap: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<OutputFormat>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            kind,
            seed,
            replicates: None,
            n_grid: Vec::new(),
            k_grid: Vec::new(),
            epsilon: None,
            alpha: None,
            delta: None,
            mu: None,
            grid: None,
            paths: None,
            bootstrap: None,
            output: None,
            format: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        if self.replicates == Some(0) {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        for (name, grid) in [("n_grid", &self.n_grid), ("k_grid", &self.k_grid)] {
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("{name} must be strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
