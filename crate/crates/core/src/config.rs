//! Run configuration file.
//!
//! A run is described by one TOML document. Every key is optional and takes
//! the default shown by `dimshift run --print-config`; unknown keys are
//! rejected. Example:
//!
//! ```toml
//! master_seed = 42
//! n_agents = 200
//! out_dir = "results"
//! models = ["frl", "wrl", "ibl", "wibl"]
//! shifts = ["intra", "extra"]
//! feedback = ["immediate", "delayed", "counterfactual"]
//!
//! [task]
//! p_high = 0.75
//! cluster_size = 10
//!
//! [wibl]
//! attention_temperature = 20.0
//! binning = { num_bins = 2, lo = 0.0, hi = 1.0 }
//! ```
//!
//! The `[frl]` and `[wrl]` blocks share one schema, as do `[ibl]` and
//! `[wibl]`; attention is switched on by the block, not by a key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{FeedbackKind, ShiftKind, TaskConfig};
use crate::frl::FrlConfig;
use crate::harness::{GridSpec, ModelKind, ModelParams};
use crate::ibl::IblConfig;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;

/// Environment variable that overrides `master_seed`.
pub const SEED_ENV: &str = "DIMSHIFT_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub n_agents: usize,
    pub out_dir: PathBuf,
    pub models: Vec<ModelKind>,
    pub shifts: Vec<ShiftKind>,
    pub feedback: Vec<FeedbackKind>,
    pub task: TaskConfig,
    pub frl: FrlConfig,
    pub wrl: FrlConfig,
    pub ibl: IblConfig,
    pub wibl: IblConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = Self {
            master_seed: DEFAULT_SEED,
            n_agents: 200,
            out_dir: PathBuf::from("results"),
            models: ModelKind::ALL.to_vec(),
            shifts: ShiftKind::ALL.to_vec(),
            feedback: FeedbackKind::ALL.to_vec(),
            task: TaskConfig::default(),
            frl: FrlConfig::default(),
            wrl: FrlConfig::default(),
            ibl: IblConfig::default(),
            wibl: IblConfig::default(),
        };
        cfg.resolve();
        cfg
    }
}

impl RunConfig {
    /// Parses, resolves and validates a config document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fills in derived values: attention flags from the block, and the
    /// blending temperature when left unset.
    pub fn resolve(&mut self) {
        self.frl.weights_enabled = false;
        self.wrl.weights_enabled = true;
        self.ibl.weights_enabled = false;
        self.wibl.weights_enabled = true;
        for block in [&mut self.ibl, &mut self.wibl] {
            block.temperature = Some(block.temperature());
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents: must be at least 1".into()));
        }
        for (key, empty) in [
            ("models", self.models.is_empty()),
            ("shifts", self.shifts.is_empty()),
            ("feedback", self.feedback.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("{key}: select at least one entry")));
            }
        }
        self.task.validate()?;
        for &shift in &self.shifts {
            for &feedback in &self.feedback {
                self.task.validate_for(shift, feedback)?;
            }
        }
        self.params().validate()
    }

    /// Applies `DIMSHIFT_SEED` when it is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                self.master_seed = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}: `{v}` is not an unsigned 64-bit integer")))?;
                Ok(())
            }
            Err(_) => Ok(()),
        }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            frl: self.frl.clone(),
            wrl: self.wrl.clone(),
            ibl: self.ibl.clone(),
            wibl: self.wibl.clone(),
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            models: dedup(&self.models),
            shifts: dedup(&self.shifts),
            feedback: dedup(&self.feedback),
            n_agents: self.n_agents,
            task: self.task.clone(),
            params: self.params(),
            master_seed: self.master_seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable as TOML")
    }
}

fn dedup<T: Copy + PartialEq>(items: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for &x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.grid().cells().len(), 24);
        assert!(cfg.wrl.weights_enabled && cfg.wibl.weights_enabled);
        assert!(!cfg.frl.weights_enabled && !cfg.ibl.weights_enabled);
    }

    #[test]
    fn partial_blocks_keep_other_defaults() {
        let cfg = RunConfig::from_toml_str(
            "n_agents = 7\nmodels = [\"wibl\"]\n[task]\np_high = 0.9\np_low = 0.1\ncluster_size = 5\n[wibl]\nattention_temperature = 8.0\n",
        )
        .unwrap();
        assert_eq!(cfg.n_agents, 7);
        assert_eq!(cfg.task.p_high, 0.9);
        assert_eq!(cfg.task.num_dimensions, 3);
        assert_eq!(cfg.wibl.attention_temperature, 8.0);
        assert!(cfg.wibl.weights_enabled);
        assert_eq!(cfg.grid().cells().len(), 6);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml_str("[task]\np_hgih = 0.9\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("p_hgih"), "{err}");
        let err = RunConfig::from_toml_str("agents = 3\n").unwrap_err().to_string();
        assert!(err.contains("agents"), "{err}");
    }

    #[test]
    fn invalid_values_are_named() {
        let err = RunConfig::from_toml_str("[task]\np_low = 0.9\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("task.p_low"), "{err}");
        let err = RunConfig::from_toml_str("[task]\ncluster_size = 7\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("task.cluster_size"), "{err}");
        let err = RunConfig::from_toml_str("models = [\"dqn\"]\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("dqn"), "{err}");
        let err = RunConfig::from_toml_str("n_agents = \"many\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("n_agents"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.ibl.noise = 0.4;
        cfg.ibl.temperature = None;
        cfg.resolve();
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
