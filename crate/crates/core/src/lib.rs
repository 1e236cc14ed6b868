//! q-exponential family policies for reinforcement learning.
//!
//! The crate provides exact densities, analytic log-likelihood gradients and
//! exact samplers for Gaussian, squashed Gaussian, Student's t, Beta and
//! light- or heavy-tailed q-Gaussian policies, together with actor-critic
//! agents, classic-control environments and the experiment harness behind the
//! `qexp` command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod deformed;
pub mod distributions;
pub mod envs;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod oracles;
pub mod policy;
pub mod samplers;
pub mod special;

pub use deformed::{exp_q, gbmm_index_inverse, gbmm_index_map, ln_q, EntropicIndex};
pub use error::{Error, Result};
pub use samplers::{Rng, StreamPurpose};
