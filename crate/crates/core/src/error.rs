use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("flow left the domain at t = {time} near {point:?}")]
    DomainEscape { time: f64, point: Vec<f64> },
    #[error("flow state became non-finite at t = {time}")]
    NonFinite { time: f64 },
    #[error("condition C fails: the exponential leaves the domain for coefficients {witness:?}")]
    ConditionC { witness: Vec<f64> },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("degenerate point: {0}")]
    Degenerate(String),
    #[error("unknown name '{0}'")]
    UnknownName(String),
    #[error("geometry document: {0}")]
    Document(String),
    #[error("unreliable estimate: {0}")]
    Unreliable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Expr(_) => "expression",
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DomainEscape { .. } => "domain-escape",
            Error::NonFinite { .. } => "non-finite",
            Error::ConditionC { .. } => "condition-c",
            Error::Singular(_) => "singular",
            Error::Degenerate(_) => "degenerate",
            Error::UnknownName(_) => "unknown-name",
            Error::Document(_) => "document",
            Error::Unreliable(_) => "unreliable",
        }
    }
}
