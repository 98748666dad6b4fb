//! Sampling and cycle statistics for the Mallows permutation model with the
//! L1 (Spearman footrule) distance, `P(σ) ∝ exp(−β Σ|σ(j) − j|)`.
//!
//! - [`permutation`]: the permutation type, footrule distance, cycles.
//! - [`oracle`]: exact enumeration of `S_n` for `n ≤ 10`.
//! - [`sampler`] and [`chain`]: the hit-and-run Markov chain.
//! - [`arcs`]: instrumented replay of one placement pass.
//! - [`stats`]: estimators and reference distributions.
//! - [`verify`]: drivers for the verification experiments.

// Validation uses `!(x >= bound)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arcs;
pub mod chain;
pub mod error;
pub mod oracle;
pub mod permutation;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod verify;

pub use chain::{
    default_burnin, run_chain, run_chains_fold, run_chains_with, ChainConfig, ChainSample,
};
pub use error::{MallowsError, Result};
pub use oracle::{
    exact_expectation, exact_probability, exact_tail_distribution_d, partition_function,
    total_variation_distance, ExactModel,
};
pub use permutation::{ModelParams, Permutation};
pub use sampler::{
    counts_from_bounds, hit_and_run_step, place_symbols, sample_bounds, Bounds, HitAndRun,
    PlacementTrace,
};
