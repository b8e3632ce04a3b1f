//! Experiment orchestration: deterministic sweeps, bound verification, and
//! the planted-vs-uniform distinguishing experiments, all emitting stable
//! CSV / JSON artifacts. Identical config and seed produce byte-identical
//! output; sweep cells run in parallel but rows are sorted before writing.

use thiserror::Error;

pub mod config;
pub mod csv;
pub mod runner;

pub use config::{ExperimentConfig, Mode, ModelSpec};
pub use csv::{write_csv, Row};
pub use runner::{
    build_model, distinguish, sweep_samples, sweep_window, verify_bounds, BoundCheck,
    BoundsReport, BuiltModel, DistinguishReport, MiSummary, TestResult,
};

use crate::codes::CodesError;
use crate::constructions::ConstructionError;
use crate::hmm::HmmError;
use crate::infotheory::InfoError;
use crate::metrics::EvalError;
use crate::ngram::NgramError;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or input documents: CLI exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// An exact computation refused to exceed its budget: CLI exit code 3.
    #[error("budget refusal: requires {required:.3e}, budget {budget:.3e}")]
    Budget { required: f64, budget: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] HmmError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Codes(#[from] CodesError),
    #[error(transparent)]
    Ngram(#[from] NgramError),
}

impl From<EvalError> for HarnessError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Budget { required, budget } => HarnessError::Budget { required, budget },
            EvalError::Hmm(h) => HarnessError::Model(h),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

impl From<InfoError> for HarnessError {
    fn from(e: InfoError) -> Self {
        match e {
            InfoError::Budget { required, budget } => HarnessError::Budget { required, budget },
            InfoError::Hmm(h) => HarnessError::Model(h),
            other => HarnessError::Config(other.to_string()),
        }
    }
}
