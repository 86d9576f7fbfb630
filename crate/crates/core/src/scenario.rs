//! Scenario files: everything a simulated session needs besides the backends.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{load_catalog_file, ComponentCatalog};
use crate::detection::NoiseModel;
use crate::orchestrator::{SessionConfig, DEFAULT_DEADLOCK_WINDOW, DEFAULT_MAX_ITERATIONS};
use crate::planner::motion::MagazineLayout;
use crate::workcell::{OperatorPolicy, TimeModel};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

fn default_deadlock_window() -> usize {
    DEFAULT_DEADLOCK_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Relative to the scenario file. Missing means the built-in aircraft kit.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub layout: Option<PathBuf>,
    #[serde(default)]
    pub policy: OperatorPolicy,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub time_model: TimeModel,
    /// Seeds the time model; the noise model carries its own `rng_seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_deadlock_window")]
    pub deadlock_window: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            catalog: None,
            layout: None,
            policy: OperatorPolicy::compliant(),
            noise: NoiseModel::noiseless(),
            time_model: TimeModel::guided_default(),
            seed: 0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            deadlock_window: DEFAULT_DEADLOCK_WINDOW,
        }
    }
}

/// A scenario with its files loaded.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub config: SessionConfig,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<LoadedScenario, ScenarioError> {
        let invalid = |message: String| ScenarioError::Invalid {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        scenario.resolve(base).map_err(invalid)
    }

    /// Loads referenced files relative to `base` and validates the result.
    pub fn resolve(self, base: &Path) -> Result<LoadedScenario, String> {
        let catalog = match &self.catalog {
            Some(p) => load_catalog_file(&base.join(p)).map_err(|e| e.to_string())?,
            None => ComponentCatalog::default_aircraft(),
        };
        let layout = match &self.layout {
            Some(p) => MagazineLayout::from_file(&base.join(p)).map_err(|e| e.to_string())?,
            None => MagazineLayout::default_layout(),
        };
        self.noise.validate()?;
        self.policy.validate(&catalog)?;
        let mut config = SessionConfig::new(catalog, layout);
        config.time_model = self.time_model;
        config.seed = self.seed;
        config.max_iterations = self.max_iterations;
        config.deadlock_window = self.deadlock_window;
        config.validate().map_err(|e| e.to_string())?;
        Ok(LoadedScenario {
            scenario: self,
            config,
        })
    }
}
