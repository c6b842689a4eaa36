//! Bayesian updating over misspecified families of binary Markov chains
//! observing a finite-state (sofic) source.
//!
//! - [`process`]: the true source as an edge-labelled hidden Markov chain.
//! - [`hypothesis`]: strictly positive Markov chains, likelihoods and
//!   divergence rates against the source.
//! - [`posterior`]: prior specification and the Monte Carlo ensemble
//!   posterior, including the replicator view of updating.
//! - [`conjugate`]: exact Dirichlet-multinomial posterior over orders.
//! - [`trajectory`]: member-by-member likelihood evaluation at checkpoints
//!   for large ensembles.
//! - [`sieve`]: growing sets of well-behaved hypotheses and their
//!   diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod conjugate;
pub mod error;
pub mod hypothesis;
pub mod posterior;
pub mod process;
pub mod sieve;
pub mod stationary;
pub mod symbols;
pub mod trajectory;

pub use error::{Error, Result};
pub use hypothesis::{
    aep_estimate, divergence_rate, hypothesis_log_likelihood, optimal_in_order, History,
    MarkovHypothesis, SourceSummary,
};
pub use posterior::{draw_prior_ensemble, EnsemblePosterior, OrderPrior, PriorSpec};
pub use process::{
    block_distribution, build_even_process, conditional_next_dist, entropy_rate, path_log_prob,
    sample_path, BeliefState, HiddenMarkovSource,
};
pub use symbols::{BinaryDist, Symbol};
