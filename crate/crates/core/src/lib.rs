//! A desk-scale laboratory for sequential prediction with short memory.
//!
//! The crate provides exact finite HMMs with their optimal full-history and
//! window-restricted predictors, a streaming empirical Markov (n-gram)
//! predictor, the information-theoretic losses and mutual-information
//! machinery used to compare them, GF(2) linear-code utilities, generators
//! for the hard model families (cycle and permutation-label HMMs, parity
//! with noise, planted CSPs), and a deterministic experiment harness.

pub mod codes;
pub mod constructions;
pub mod harness;
pub mod hmm;
pub mod infotheory;
pub mod metrics;
pub mod ngram;
pub mod seeds;

#[cfg(test)]
pub(crate) mod test_support;

pub use hmm::{BeliefState, Hmm, HmmError, SampledPath};
pub use metrics::LossReport;
pub use ngram::ContextTable;
