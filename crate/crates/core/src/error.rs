//! Error type shared by every module of the engine.

use thiserror::Error;

use crate::scenario::Diagnostic;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, RsaError>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input document or scenario is malformed or fails validation.
    Input,
    /// A well-formed scenario produced an impossible or degenerate query.
    Inference,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RsaError {
    #[error("every weight is negative infinity; the distribution has empty support")]
    AllZeroSupport,

    #[error("label `{label}` has p > 0 but q = 0")]
    AbsoluteContinuityViolation { label: String },

    #[error("distributions are over different label sets")]
    LabelMismatch,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("scenario failed validation: {}", format_diagnostics(.0))]
    Validation(Vec<Diagnostic>),

    #[error("latent variable `{0}` is referenced but not assigned")]
    UnboundParameter(String),

    #[error("unknown {kind} `{name}`")]
    UnknownLabel { kind: &'static str, name: String },

    #[error("utterance `{utterance}` has zero literal support under this prior and assignment")]
    ZeroSemanticSupport { utterance: String },

    #[error("no utterance has positive probability for {input}")]
    NoUsableUtterance { input: String },

    #[error("utterance `{utterance}` has probability 0 under every state and latent assignment")]
    ZeroPosterior { utterance: String },

    #[error("all samples scored zero")]
    DegenerateSampler,

    #[error("product space of {size} cells exceeds the budget of {budget}")]
    BudgetExceeded { size: u128, budget: u128 },

    #[error("every grid point gives the data zero likelihood")]
    AllPointsImpossible,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
}

impl RsaError {
    /// Stable machine-readable identifier for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            RsaError::AllZeroSupport => "AllZeroSupport",
            RsaError::AbsoluteContinuityViolation { .. } => "AbsoluteContinuityViolation",
            RsaError::LabelMismatch => "LabelMismatch",
            RsaError::Parse { .. } => "ParseError",
            RsaError::Schema(_) => "SchemaError",
            RsaError::Validation(_) => "ValidationError",
            RsaError::UnboundParameter(_) => "UnboundParameter",
            RsaError::UnknownLabel { .. } => "UnknownLabel",
            RsaError::ZeroSemanticSupport { .. } => "ZeroSemanticSupport",
            RsaError::NoUsableUtterance { .. } => "NoUsableUtterance",
            RsaError::ZeroPosterior { .. } => "ZeroPosterior",
            RsaError::DegenerateSampler => "DegenerateSampler",
            RsaError::BudgetExceeded { .. } => "BudgetExceeded",
            RsaError::AllPointsImpossible => "AllPointsImpossible",
            RsaError::InvalidArgument(_) => "InvalidArgument",
            RsaError::Io(_) => "IoError",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            RsaError::Parse { .. }
            | RsaError::Schema(_)
            | RsaError::Validation(_)
            | RsaError::UnknownLabel { .. }
            | RsaError::InvalidArgument(_)
            | RsaError::Io(_) => ErrorClass::Input,
            _ => ErrorClass::Inference,
        }
    }
}

impl From<std::io::Error> for RsaError {
    fn from(e: std::io::Error) -> Self {
        RsaError::Io(e.to_string())
    }
}
