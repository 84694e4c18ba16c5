//! Minimal dense-tensor kernel with reverse-mode differentiation and Adam.
//!
//! All numerics are `f64`. A [`Tape`] records tensor-level primitives
//! (matrix products, broadcasting arithmetic, reductions, gathers); a single
//! reverse sweep produces [`Gradients`] for every recorded value.

mod adam;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} does not match data length {len}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: axis {axis} out of range for rank {ndim}")]
    Axis {
        op: &'static str,
        axis: usize,
        ndim: usize,
    },
    #[error("{op}: argument {value} at element {index} is outside the domain")]
    Domain {
        op: &'static str,
        index: usize,
        value: f64,
    },
    #[error("row index {index} out of range for {rows} rows")]
    Index { index: usize, rows: usize },
    #[error("concat of zero tensors")]
    EmptyConcat,
    #[error("backward requires a one-element loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("optimizer expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
}
