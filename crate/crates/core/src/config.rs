// SPDX-License-Identifier: MIT OR Apache-2.0

//! Flat key-value run configuration, stored as TOML.
//!
//! Every key is optional and falls back to the default shown by
//! [`RunConfig::default`]; unknown keys are rejected.
//!
//! ```toml
//! mode = "benchmark"
//! scenario = 1
//! n = 50
//! horizon = 200
//! layers = 4
//! c_tau1 = 0.1
//! trials = 100
//! seed = 2024
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{InferConfig, LimitLawConfig};
use crate::localize::DetectConfig;
use crate::lowrank::{HpcaConfig, TuckerRanks};

/// Environment variable naming a config file to load when none is given.
pub const CONFIG_ENV: &str = "MLNET_CPD_CONFIG";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Detect,
    Infer,
    #[default]
    Benchmark,
    Sensitivity,
    Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Scenario `1..=4`, or `0` for the change-free block model.
    pub scenario: u8,
    pub n: usize,
    pub horizon: usize,
    pub layers: usize,
    pub c_tau1: f64,
    pub c_j: f64,
    /// Absolute Stage-I threshold replacing the `c_tau1` rule.
    pub threshold: Option<f64>,
    /// Tucker ranks `[r1, r2, r3]`; default `(min(15, n), min(15, n), L)`.
    pub ranks: Option<[usize; 3]>,
    pub hpca_max_iterations: usize,
    pub hpca_tolerance: f64,
    /// Monte-Carlo draws `B`.
    pub draws: usize,
    /// Limiting-law half-width `M`; default `T`.
    pub m: Option<f64>,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    /// Run confidence intervals in the benchmark.
    pub inference: bool,
    /// Add a wall-time column to benchmark output (makes output
    /// nondeterministic).
    pub timing: bool,
    /// Threshold constants of the sensitivity sweep.
    pub c_values: Vec<f64>,
    /// Derive the two samples from one series by odd/even splitting.
    pub split: bool,
    pub input: Option<PathBuf>,
    pub input_b: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hpca = HpcaConfig::default();
        let law = LimitLawConfig::default();
        Self {
            mode: Mode::default(),
            scenario: 1,
            n: 50,
            horizon: 200,
            layers: 4,
            c_tau1: 0.1,
            c_j: 1.0,
            threshold: None,
            ranks: None,
            hpca_max_iterations: hpca.max_iterations,
            hpca_tolerance: hpca.rel_tolerance,
            draws: law.draws,
            m: law.m,
            alpha: law.alpha,
            trials: 100,
            seed: 0,
            inference: false,
            timing: false,
            c_values: vec![0.05, 0.10, 0.15, 0.20, 0.25],
            split: false,
            input: None,
            input_b: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario > 4 {
            return Err(Error::Config(format!("scenario must be 0..=4, got {}", self.scenario)));
        }
        if self.n == 0 || self.layers == 0 {
            return Err(Error::Config("n and layers must be positive".into()));
        }
        if self.horizon < 4 {
            return Err(Error::Config(format!("horizon must be at least 4, got {}", self.horizon)));
        }
        if let Some([r1, r2, r3]) = self.ranks {
            TuckerRanks::new(r1, r2, r3)
                .validate_for((self.n, self.n, self.layers))
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.c_values.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::Config("c_values must be positive".into()));
        }
        self.detect_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.law_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn hpca_config(&self) -> HpcaConfig {
        HpcaConfig {
            max_iterations: self.hpca_max_iterations,
            rel_tolerance: self.hpca_tolerance,
        }
    }

    pub fn tucker_ranks(&self) -> Option<TuckerRanks> {
        self.ranks.map(|[a, b, c]| TuckerRanks::new(a, b, c))
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            c_tau1: self.c_tau1,
            c_j: self.c_j,
            ranks: self.tucker_ranks(),
            hpca: self.hpca_config(),
            threshold_override: self.threshold,
        }
    }

    pub fn law_config(&self) -> LimitLawConfig {
        LimitLawConfig {
            draws: self.draws,
            m: self.m,
            alpha: self.alpha,
            seed: self.seed,
        }
    }

    pub fn infer_config(&self) -> InferConfig {
        InferConfig {
            ranks: self.tucker_ranks(),
            hpca: self.hpca_config(),
            law: self.law_config(),
        }
    }
}
