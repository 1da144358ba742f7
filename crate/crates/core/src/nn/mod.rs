//! Minimal reverse-mode autodiff: a tape of eagerly evaluated ops covering
//! the converter's layers, Adam, parameter files and gradient checking.

pub mod checkpoint;
mod conv;
pub mod gradcheck;
mod graph;
mod param;
mod tensor;

pub use conv::{conv_out, conv_transpose_out};
pub use graph::{Graph, Var};
pub use param::{Adam, Parameter};
pub use tensor::{Scalar, Tensor};

/// Instance-norm epsilon.
pub const NORM_EPS: f64 = 1e-5;
/// Leaky-ReLU negative slope.
pub const LEAKY_SLOPE: f64 = 0.2;
