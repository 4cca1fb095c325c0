use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("uncertainty set size must be finite and nonnegative, got {0}")]
    InvalidSize(f64),
    #[error("sample lies outside the uncertainty set (norm excess {excess:.3e})")]
    OutsideSet { excess: f64 },
    #[error("unknown uncertain constraint id {0}")]
    UnknownConstraint(usize),
    #[error("ellipsoidal sets have no bilinear-representable dual counterpart")]
    EllipsoidalNotRepresentable,
    #[error("perturbation {perturbation} of constraint `{constraint}` changes sign over the variable box")]
    SignAmbiguous {
        constraint: String,
        perturbation: usize,
    },
    #[error("unknown uncertainty set kind `{0}` (expected box, ellipsoidal or polyhedral)")]
    UnknownKind(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("malformed LP: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("problem failed validation: {0}")]
    Invalid(String),
    #[error("cut round limit of {0} reached without certifying robustness")]
    CutRoundLimit(usize),
    #[error("sampled problem is infeasible; no robust feasible point was found")]
    RobustInfeasible,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read instance: {0}")]
    Io(#[from] std::io::Error),
    #[error("instance schema violation: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}
