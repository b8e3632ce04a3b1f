//! Experiment configuration: a versioned JSON document naming the model,
//! the sweep axes, the evaluation mode, and the master seed.

use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Mc,
}

/// The model under experiment, inline or by reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// An HMM document on disk.
    HmmFile { path: String },
    /// An inline HMM document.
    Hmm {
        n: usize,
        d: usize,
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
    /// Deterministic cycle over a bit string, uniform phase.
    Cycle { bits: String },
    /// Permutation-label chain with emission bias eps.
    Permutation { labels: String, eps: f64 },
    /// A seeded dense random HMM (Dirichlet(1) rows), started stationary.
    RandomHmm { n: usize, d: usize },
    /// Parity with noise; the matrix defaults to a seeded full-row-rank draw.
    Parity {
        n: usize,
        m: usize,
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<String>>,
    },
    /// Planted-CSP sequential model; matrix and assignment default to
    /// seeded draws (the matrix through the dual-distance code search).
    Csp {
        n: usize,
        k: usize,
        m: usize,
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<String>,
        #[serde(default)]
        certified_t: usize,
    },
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    /// Window lengths to sweep.
    #[serde(default)]
    pub ells: Vec<usize>,
    /// Horizons (T values) to sweep.
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub mode: Mode,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Enumeration budget for exact work (sequences / nullspace size).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    /// Training-stream length for the learned n-gram predictor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_len: Option<usize>,
    /// Blocks per distinguishing trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_trial: Option<usize>,
    /// For permutation models: also score the window predictor given the
    /// phase-residue side channel.
    #[serde(default)]
    pub side_information: bool,
    /// Reference window length standing in for the full history in the
    /// permutation model's exact single-step evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_len: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.ells.iter().any(|&e| e == 0) {
            return Err(HarnessError::Config("window lengths must be positive".into()));
        }
        if self.horizons.iter().any(|&t| t == 0) {
            return Err(HarnessError::Config("horizons must be positive".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be positive".into()));
        }
        if let Some(b) = self.budget {
            if !(b > 0.0) {
                return Err(HarnessError::Config("budget must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn budget(&self) -> f64 {
        self.budget.unwrap_or(2e7)
    }

    pub fn train_len(&self) -> usize {
        self.train_len.unwrap_or(10_000)
    }

    pub fn samples_per_trial(&self) -> usize {
        self.samples_per_trial.unwrap_or(8)
    }
}

/// Parses a string of '0'/'1' characters.
pub fn parse_bits(s: &str) -> Result<Vec<u8>, HarnessError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(HarnessError::Config(format!(
                "expected a 0/1 string, found {other:?}"
            ))),
        })
        .collect()
}
