//! Verification harness for sofic-bayes: configuration, per-theorem
//! protocols, CSV records and the run driver behind the `sofic-lab` CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::field_reassign_with_default))]

pub mod config;
pub mod context;
pub mod protocols;
pub mod record;
pub mod runner;
