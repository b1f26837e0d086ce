use thiserror::Error;

/// Errors raised by problem construction, the solvers and the analysis layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("step size h = {h} must satisfy 0 < h < h0 = {h0}")]
    StepSizeTooLarge { h: f64, h0: f64 },

    #[error("invalid step size {0}")]
    InvalidStep(f64),

    #[error("non-finite right-hand side value at t = {t}")]
    NonFiniteRhs { t: f64 },

    #[error("time {t} is outside the computed range (frontier {frontier})")]
    OutOfRange { t: f64, frontier: f64 },

    #[error("time {t} is not a mesh point for h = {h}")]
    NotAMeshPoint { t: f64, h: f64 },

    #[error("invalid problem: {0}")]
    Validation(String),

    #[error("missing hints and sampling disabled: {0}")]
    MissingHints(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("unknown integrator `{0}`")]
    UnknownIntegrator(String),

    #[error("need at least 3 step-size levels, got {0}")]
    TooFewLevels(usize),

    #[error(transparent)]
    Parse(#[from] crate::dsl::ParseError),

    #[error("problem cannot be serialized: {0}")]
    NotSerializable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
