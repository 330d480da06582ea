use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{DEFAULT_LOWER_CUT, DEFAULT_THRESHOLD};
use crate::classical::ShiftConvention;
use crate::nonclassicality::{DEFAULT_MAX_OUTCOME, DEFAULT_RESAMPLES};
use crate::quantum::ExperimentParams;
use crate::{Error, Result};

/// Settings shared by the command-line subcommands, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: ExperimentParams,
    pub alpha_sq_grid: Vec<f64>,
    pub herald_outcomes: Vec<u32>,
    pub threshold: f64,
    pub lower_cut: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub resamples: usize,
    pub max_outcome: u32,
    pub shift_convention: ShiftConvention,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ExperimentParams::table1(0.0),
            alpha_sq_grid: (4..=20).map(f64::from).collect(),
            herald_outcomes: (0..=6).collect(),
            threshold: DEFAULT_THRESHOLD,
            lower_cut: DEFAULT_LOWER_CUT,
            output_dir: PathBuf::from("."),
            seed: 0,
            resamples: DEFAULT_RESAMPLES,
            max_outcome: DEFAULT_MAX_OUTCOME,
            shift_convention: ShiftConvention::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.params.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
