//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records operations as they execute and is differentiated once
//! with [`Graph::backward`]. Learnable tensors live in a [`ParamStore`] and
//! enter a graph through [`Graph::param`]; [`AdamW`] updates them in place.
//!
//! Broadcasting is limited to two explicit forms: [`Graph::add_bias`] adds a
//! `1×m` row to every row, and [`Graph::broadcast`] repeats a `1×1` value.

pub mod check;
mod graph;
pub mod nn;
mod param;
mod tensor;

use alloc::string::String;

use thiserror::Error;

pub use graph::{sigmoid, Gradients, Graph, Var};
pub use param::{AdamW, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("loss must be 1x1, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("backward was already run on this graph")]
    AlreadyBackpropagated,
    #[error("loss does not depend on any differentiable value")]
    Detached,
    #[error("graph has no parameter store")]
    NoParams,
    #[error("unknown parameter {0}")]
    UnknownParam(usize),
    #[error("optimizer: {0}")]
    Optimizer(&'static str),
}
