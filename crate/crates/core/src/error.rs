use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: wrong mode, shape mismatch, out-of-range parameter.
    Invalid,
    /// The truncated basis or a numerical tolerance budget was exceeded.
    NumericalBudget,
    /// A readout protocol constraint does not hold.
    ProtocolConstraint,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("mode label collision: `{0}` appears in both spaces")]
    LabelCollision(String),

    #[error("mode space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("propagation error: {0}")]
    Propagation(String),

    #[error("resonance: Lambda undefined (omega_m = 0)")]
    Resonance,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("protocol constraint violated: {0}")]
    ProtocolConstraint(String),

    #[error("degenerate contrast: rho1 == rho0, the parity readout carries no signal")]
    DegenerateContrast,

    #[error("undefined conditional state: outcome density {0:e} at X = {1}")]
    UndefinedConditional(f64, f64),

    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Truncation(_)
            | Error::Propagation(_)
            | Error::InsufficientRange(_)
            | Error::UndefinedConditional(..) => ErrorKind::NumericalBudget,
            Error::ProtocolConstraint(_) | Error::DegenerateContrast => ErrorKind::ProtocolConstraint,
            _ => ErrorKind::Invalid,
        }
    }
}
