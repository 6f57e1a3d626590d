use thiserror::Error;

use crate::netmodel::EquationKind;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: expected {expected}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
    },

    #[error("semantic error: {0}")]
    Semantic(String),

    #[error("branch {from}-{to} has zero series impedance")]
    DegenerateBranch { from: usize, to: usize },

    #[error("order {order} out of range (available through {available})")]
    OrderOutOfRange { order: usize, available: usize },

    #[error("equation kind {kind:?} does not apply to bus {bus}")]
    KindMismatch { bus: usize, kind: EquationKind },

    #[error("bus {0} carries no ZIP load")]
    NotZipBus(usize),

    #[error("base point is not a power flow solution (mismatch {residual:e})")]
    BaseNotConverged { residual: f64 },

    #[error("system is singular at the expansion point (smallest pivot {pivot:e})")]
    SingularAtExpansionPoint { pivot: f64 },

    #[error("matrix is singular (smallest pivot {pivot:e}, threshold {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("series order {order} too low for radius estimate (need at least {min})")]
    OrderTooLow { order: usize, min: usize },

    #[error("unknown load model `{0}`")]
    UnknownModel(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
