use thiserror::Error;

use crate::simplex::SimplexState;

pub type Result<T, E = PopdynError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PopdynError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid simplex state: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("missing potential capability for field `{0}`")]
    MissingPotential(String),

    #[error("missing jacobian capability for field `{0}`")]
    MissingJacobian(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("{regularizer} subgradient undefined at boundary: component {component} is zero")]
    Domain {
        regularizer: &'static str,
        component: usize,
    },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        best: SimplexState,
        residual: f64,
        iterations: usize,
    },

    #[error("lattice with spacing {step} in dimension {n} has {points} points (limit {limit})")]
    LatticeTooLarge {
        step: f64,
        n: usize,
        points: u128,
        limit: u128,
    },

    #[error("record lacks channel data required here: {0}")]
    MissingChannel(&'static str),
}

impl PopdynError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        PopdynError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
