use thiserror::Error;

/// Everything that can go wrong in `avar-core`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rate matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NotSquare {
        rows: usize,
        row: usize,
        cols: usize,
    },
    #[error("rate matrix is empty")]
    Empty,
    #[error("negative off-diagonal rate q[{row}][{col}] = {value}")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 0")]
    NonzeroRowSum { row: usize, sum: f64 },
    #[error("non-finite rate q[{row}][{col}]")]
    NonFinite { row: usize, col: usize },
    #[error("chain is reducible: state {from} cannot reach state {to}")]
    Reducible { from: usize, to: usize },
    #[error("model has {count} violations: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid {
        count: usize,
        violations: Vec<Error>,
    },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear solve failed: {0}")]
    SingularSolve(String),
    #[error("observable is not centered: (pi, f) = {mean}")]
    NotCentered { mean: f64 },
    #[error("symmetric part of the form is degenerate on the mean-zero subspace")]
    DegenerateForm,
    #[error("chain is not reversible (detailed-balance defect {defect:e})")]
    NotReversible { defect: f64 },
    #[error("(Gf, f) = {value:e} is not positive; the variational value is degenerate")]
    ZeroVariance { value: f64 },
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },
    #[error("non-positive coefficient {value} at {location}")]
    NonpositiveCoefficient { location: String, value: f64 },
    #[error("non-positive input `{what}` = {value} at x = {x}")]
    NonpositiveInput {
        what: &'static str,
        x: f64,
        value: f64,
    },
    #[error("tail mass {tail:e} beyond x_max exceeds tolerance {tolerance:e}")]
    TailMassTooLarge { tail: f64, tolerance: f64 },
    #[error("coefficient dominance a >= a1 fails at x = {x}: a = {a}, a1 = {a1}")]
    DominanceViolated { x: f64, a: f64, a1: f64 },
    #[error("models do not share the same grid and stationary density")]
    IncompatibleModels,
    #[error("only {got} batches available, at least {needed} required")]
    TooFewBatches { got: usize, needed: usize },
    #[error("path left the grid at t = {t}: x = {x} > x_max = {x_max}")]
    StepOutOfRange { t: f64, x: f64, x_max: f64 },
    #[error("the set is empty")]
    EmptyOmega,
    #[error("the set covers every state")]
    FullOmega,
    #[error("state index {index} out of range for {n} states")]
    StateOutOfRange { index: usize, n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input is malformed or violates a precondition.
    Input,
    /// The horizon is too short for a usable estimate.
    Statistical,
    /// A solver or integrator failed on valid input.
    Numerical,
}

impl Error {
    /// Variant name, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::Empty => "Empty",
            Error::NegativeOffDiagonal { .. } => "NegativeOffDiagonal",
            Error::NonzeroRowSum { .. } => "NonzeroRowSum",
            Error::NonFinite { .. } => "NonFinite",
            Error::Reducible { .. } => "Reducible",
            Error::Invalid { .. } => "Invalid",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SingularSolve(_) => "SingularSolve",
            Error::NotCentered { .. } => "NotCentered",
            Error::DegenerateForm => "DegenerateForm",
            Error::NotReversible { .. } => "NotReversible",
            Error::ZeroVariance { .. } => "ZeroVariance",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::NonpositiveCoefficient { .. } => "NonpositiveCoefficient",
            Error::NonpositiveInput { .. } => "NonpositiveInput",
            Error::TailMassTooLarge { .. } => "TailMassTooLarge",
            Error::DominanceViolated { .. } => "DominanceViolated",
            Error::IncompatibleModels => "IncompatibleModels",
            Error::TooFewBatches { .. } => "TooFewBatches",
            Error::StepOutOfRange { .. } => "StepOutOfRange",
            Error::EmptyOmega => "EmptyOmega",
            Error::FullOmega => "FullOmega",
            Error::StateOutOfRange { .. } => "StateOutOfRange",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Expression { .. } => "Expression",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::TooFewBatches { .. } => ErrorClass::Statistical,
            Error::SingularSolve(_)
            | Error::DegenerateForm
            | Error::NonConvergence { .. }
            | Error::StepOutOfRange { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Input,
        }
    }
}
