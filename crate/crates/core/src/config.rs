//! Optional TOML overrides for tunable defaults.
//!
//! ```toml
//! seed = 7
//!
//! [baseline]
//! max_nodes = 50000
//! samples_per_node = 512
//!
//! [runner]
//! grace_s = 10.0
//! poll_ms = 200
//!
//! [cex]
//! out_tol = 1e-4
//! ```

use std::path::Path;
use std::time::Duration;

use serde::Deserialize;

use crate::baseline::Budget;
use crate::cex::DEFAULT_OUT_TOL;
use crate::runner::RunnerConfig;
use crate::specfmt::DEFAULT_CASE_CAP;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default)]
    pub spec: SpecSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub runner: RunnerSection,
    #[serde(default)]
    pub cex: CexSection,
    #[serde(default)]
    pub report: ReportSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    pub case_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub max_nodes: Option<usize>,
    pub max_depth: Option<usize>,
    pub samples_per_node: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunnerSection {
    pub grace_s: Option<f64>,
    pub poll_ms: Option<u64>,
    pub prepare_timeout_s: Option<f64>,
    pub trivial_runs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CexSection {
    pub out_tol: Option<f64>,
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    pub cactus: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn seconds(path: &Path, key: &str, v: f64) -> Result<Duration, ConfigError> {
    Duration::try_from_secs_f64(v).map_err(|_| ConfigError::Invalid {
        path: path.display().to_string(),
        message: format!("{key} must be a non-negative number of seconds, got {v}"),
    })
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        let cfg = Self::from_toml(&text)
            .map_err(|e| ConfigError::Invalid { path: path.display().to_string(), message: e.to_string() })?;
        cfg.runner_config(path)?;
        Ok(cfg)
    }

    pub fn case_cap(&self) -> usize {
        self.spec.case_cap.unwrap_or(DEFAULT_CASE_CAP)
    }

    pub fn out_tol(&self) -> f64 {
        self.cex.out_tol.unwrap_or(DEFAULT_OUT_TOL)
    }

    pub fn trivial_runs(&self) -> usize {
        self.runner.trivial_runs.unwrap_or(3)
    }

    pub fn budget(&self) -> Budget {
        let d = Budget::default();
        Budget {
            max_nodes: self.baseline.max_nodes.unwrap_or(d.max_nodes),
            max_depth: self.baseline.max_depth.unwrap_or(d.max_depth),
            samples_per_node: self.baseline.samples_per_node.unwrap_or(d.samples_per_node),
            seed: self.seed.unwrap_or(d.seed),
            time_limit: None,
        }
    }

    /// `origin` only labels error messages.
    pub fn runner_config(&self, origin: &Path) -> Result<RunnerConfig, ConfigError> {
        let mut cfg = RunnerConfig::default();
        if let Some(g) = self.runner.grace_s {
            cfg.grace = seconds(origin, "runner.grace_s", g)?;
        }
        if let Some(p) = self.runner.poll_ms {
            cfg.poll = Duration::from_millis(p.max(1));
        }
        if let Some(t) = self.runner.prepare_timeout_s {
            cfg.prepare_timeout = seconds(origin, "runner.prepare_timeout_s", t)?;
        }
        Ok(cfg)
    }
}
