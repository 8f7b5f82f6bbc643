use thiserror::Error;

/// Errors produced by the lab's solvers, post-processors and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("preset construction rejected: {0}")]
    PresetRejected(String),

    #[error("argument out of domain: {0}")]
    OutOfDomain(String),

    #[error("numerical failure at t = {t}: {what}")]
    NumericalFailure { t: f64, what: String },

    #[error("requested t = {requested} beyond run horizon {available}")]
    BeyondHorizon { requested: f64, available: f64 },

    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("no blow-up before hard cap t = {t_cap}; bound-violation candidate")]
    NoBlowUp { t_cap: f64 },

    #[error("scan aborted at eps = {eps}: {source}")]
    ScanFailure {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient rows for fit: need {needed}, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("empty results")]
    EmptyResults,

    #[error("fingerprint mismatch: tables were produced under different settings")]
    FingerprintMismatch,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
