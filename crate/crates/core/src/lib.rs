//! Learned power control for the K-user interference channel.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: instances, seeded generators, the binary dataset format
//! - [`metrics`]: SINR and weighted sum rate
//! - [`graph`]: interference graphs, feature normalization, permutations
//! - [`autodiff`]: tensors, a reverse-mode tape and Adam
//! - [`model`]: IGCNet (plus GCN / Structure2Vec / GIN variants), the
//!   unsupervised loss and checkpoints
//! - [`baselines`]: WMMSE, the greedy heuristic and a grid-search oracle
//! - [`harness`]: training, evaluation, robustness, ablations and timing

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod baselines;
pub mod channel;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod model;
