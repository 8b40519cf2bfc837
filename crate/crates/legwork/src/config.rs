//! TOML run configuration shared by the CLI and the examples.
//!
//! One file describes a whole run: task geometry, reward constants, the
//! scripted controller, data collection, model shape, training, and
//! evaluation. Every section and every key is optional; omitted keys fall
//! back to the library defaults, so `{}` is a valid config. Unknown keys are
//! rejected rather than ignored.
//!
//! Schema (defaults in parentheses):
//!
//! ```toml
//! [task]
//! preset = "square_table"   # or "stool"
//! # Any TaskConfig field may be overridden by name, e.g.:
//! # noise_sigma = 0.005
//!
//! [reward]                  # RewardParams fields ("alpha", "beta", ...)
//! [heuristic]               # HeuristicConfig fields
//!
//! [collect]
//! num_trajectories = 2000   # (2000)
//! full_task_fraction = 0.5  # (0.5)
//! randomize_speed = true    # (true)
//! seed = 0                  # (0)
//!
//! [model]                   # d_model (32), n_layers (2), n_heads (4),
//!                           # d_ff (128), horizon (10)
//! [train]                   # iterations (12), trajectories_per_iter (240),
//!                           # batch_size (32), horizon (10), eta (1e-3),
//!                           # lambda (0.05), augment_copies (1), seed (0)
//!
//! [eval]
//! n_episodes = 10           # (10)
//! seed = 0                  # (0)
//! max_phases = 80           # (80)
//! per_skill_cap = 100       # (100)
//! sweep_sigmas = [0.0, 0.001, 0.002, 0.005, 0.010]
//!
//! [run]
//! dir = "runs"              # output root; env LEGWORK_RUN_DIR overrides
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::config::{RewardParams, TaskConfig};
use crate::error::Error;
use crate::heuristic::{CollectOptions, HeuristicConfig};
use crate::metrics::{EvalConfig, SWEEP_SIGMAS};
use crate::model::net::ModelConfig;
use crate::train::TrainConfig;
use crate::Result;

/// Environment variable that overrides `[run] dir`.
pub const RUN_DIR_ENV: &str = "LEGWORK_RUN_DIR";

/// `[task]`: a named preset plus arbitrary per-field overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSection {
    /// "square_table" or "stool".
    #[serde(default = "default_preset")]
    pub preset: String,
    /// Raw key/value overrides applied on top of the preset. Keys must name
    /// TaskConfig fields.
    #[serde(flatten)]
    pub overrides: toml::Table,
}

fn default_preset() -> String {
    "square_table".into()
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection { preset: default_preset(), overrides: toml::Table::new() }
    }
}

impl TaskSection {
    /// Resolve the preset and apply overrides field by field.
    pub fn build(&self) -> Result<TaskConfig> {
        let base = match self.preset.as_str() {
            "square_table" => TaskConfig::square_table(),
            "stool" => TaskConfig::stool(),
            other => {
                return Err(Error::Config(format!(
                    "unknown task preset '{other}' (expected 'square_table' or 'stool')"
                )))
            }
        };
        if self.overrides.is_empty() {
            return Ok(base);
        }
        let mut table = toml::Table::try_from(base)
            .map_err(|e| Error::Config(format!("task serialization failed: {e}")))?;
        for (key, value) in &self.overrides {
            if !table.contains_key(key) {
                return Err(Error::Config(format!("unknown task override '{key}'")));
            }
            table.insert(key.clone(), value.clone());
        }
        table
            .try_into()
            .map_err(|e| Error::Config(format!("bad task override: {e}")))
    }
}

/// `[collect]`: scripted-controller data collection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSection {
    pub num_trajectories: usize,
    pub full_task_fraction: f64,
    pub randomize_speed: bool,
    pub seed: u64,
}

impl Default for CollectSection {
    fn default() -> Self {
        CollectSection {
            num_trajectories: 2000,
            full_task_fraction: 0.5,
            randomize_speed: true,
            seed: 0,
        }
    }
}

impl CollectSection {
    pub fn options(&self) -> CollectOptions {
        CollectOptions {
            num_trajectories: self.num_trajectories,
            seed: self.seed,
            full_task_fraction: self.full_task_fraction,
            randomize_speed: self.randomize_speed,
        }
    }
}

/// `[eval]`: episode counts, caps, and the noise sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub n_episodes: usize,
    pub seed: u64,
    pub max_phases: usize,
    pub per_skill_cap: usize,
    pub sweep_sigmas: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n_episodes: 10,
            seed: 0,
            max_phases: 80,
            per_skill_cap: 100,
            sweep_sigmas: SWEEP_SIGMAS.to_vec(),
        }
    }
}

impl EvalSection {
    /// Combine with the `[heuristic]` section into a full eval config.
    pub fn config(&self, heuristic: HeuristicConfig) -> EvalConfig {
        EvalConfig {
            n_episodes: self.n_episodes,
            seed: self.seed,
            max_phases: self.max_phases,
            per_skill_cap: self.per_skill_cap,
            heuristic,
        }
    }
}

/// `[run]`: where outputs land.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { dir: PathBuf::from("runs") }
    }
}

/// A complete run description, loadable from TOML.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskSection,
    pub reward: RewardParams,
    pub heuristic: HeuristicConfig,
    pub collect: CollectSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub run: RunSection,
}

impl RunConfig {
    /// Parse from TOML text. Unknown sections or keys are errors.
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.task.build()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Read and parse a TOML file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    /// Serialize back to TOML (used for run manifests).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn task_config(&self) -> Result<TaskConfig> {
        self.task.build()
    }

    /// The run directory: `LEGWORK_RUN_DIR` if set, else `[run] dir`.
    pub fn run_dir(&self) -> PathBuf {
        match std::env::var_os(RUN_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.run.dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.task.preset, "square_table");
        assert_eq!(cfg.collect.num_trajectories, 2000);
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.model, ModelConfig::default());
        assert_eq!(cfg.eval, EvalSection::default());
        let task = cfg.task_config().unwrap();
        assert_eq!(task, TaskConfig::square_table());
    }

    #[test]
    fn preset_and_overrides_compose() {
        let cfg = RunConfig::from_toml(
            "[task]\npreset = \"stool\"\nnoise_sigma = 0.005\n\n[train]\niterations = 3\n",
        )
        .unwrap();
        let task = cfg.task_config().unwrap();
        let stool = TaskConfig::stool();
        assert_eq!(task.noise_sigma, 0.005);
        assert_eq!(task.theta_done, stool.theta_done);
        assert_eq!(cfg.train.iterations, 3);
        assert_eq!(cfg.train.batch_size, TrainConfig::default().batch_size);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[train]\niterwtions = 3\n").is_err());
        assert!(RunConfig::from_toml("[task]\npreset = \"stool\"\nnoise_sgima = 0.1\n").is_err());
        assert!(RunConfig::from_toml("[task]\npreset = \"chair\"\n").is_err());
        assert!(RunConfig::from_toml("[typo_section]\nx = 1\n").is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = RunConfig::from_toml("[eval]\nn_episodes = 4\n[task]\nnoise_sigma = 0.001\n")
            .unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back.eval.n_episodes, 4);
        assert_eq!(back.task_config().unwrap().noise_sigma, 0.001);
    }
}
