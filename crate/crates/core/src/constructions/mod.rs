//! Generators for the model families used as hard instances: the cycle
//! HMM, the permutation-label HMM, the parity-with-noise sequential model
//! (with its compilation to an explicit HMM), and the planted-CSP
//! sequential model with its clause samplers.

use thiserror::Error;

use crate::codes::CodesError;
use crate::hmm::HmmError;

pub mod csp;
pub mod cycle;
pub mod diagnostics;
pub mod parity;
pub mod permutation;

pub use csp::{
    letter_to_literal, literal_to_letter, precompute_solution_table, sample_planted_clause,
    sample_uniform_clause, transform_clause_c0_to_c, Clause, CspBlock, CspModel, CspModelSpec,
    Literal, SolutionTable,
};
pub use cycle::{build_cycle_hmm, has_distinct_cyclic_windows, random_cycle_bits_with_distinct_windows};
pub use diagnostics::{posterior_odds_trace, OddsStep, OddsTrace};
pub use parity::{
    compile_parity_to_hmm, parity_block_probability, parity_sample_block,
    parity_sample_block_with, sample_full_row_rank_matrix, ParityModelSpec,
};
pub use permutation::{build_permutation_hmm, window_loss_vs_reference, PermutationLabelSpec, StationaryLosses};

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("invalid model parameters: {0}")]
    BadSpec(String),
    #[error("compiled model needs {required} states, over the budget of {budget}")]
    StateBudget { required: usize, budget: usize },
    #[error("state {state} has zero prior mass")]
    ZeroPriorMass { state: usize },
    #[error("clause label must be all zeros before the coset transform")]
    LabelNotZero,
    #[error("solution table has no entry for the requested label")]
    MissingTableEntry,
    #[error("gave up after {attempts} attempts: {what}")]
    SearchExhausted { attempts: usize, what: String },
    #[error(transparent)]
    Codes(#[from] CodesError),
    #[error(transparent)]
    Hmm(#[from] HmmError),
}
