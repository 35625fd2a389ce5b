use thiserror::Error;

/// Errors produced by simulation, filtering, estimation and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path diverged at step {step}")]
    PathDiverged { step: usize },

    #[error(
        "init window needs at least 2 values and must be shorter than the path (window {window}, path {path_len})"
    )]
    InitWindow { window: usize, path_len: usize },

    #[error("drift not identified: {0}")]
    DriftNotIdentified(String),

    #[error("likelihood undefined: every update step was skipped")]
    LikelihoodUndefined,

    #[error("bandwidth too small at x0 = {x0}")]
    BandwidthTooSmall { x0: f64 },

    #[error("no valid pairs: every element is missing")]
    NoValidPairs,

    #[error("too many failed paths: {dropped} of {total} dropped (limit 5%)")]
    TooManyFailures { dropped: usize, total: usize },

    #[error("malformed csv at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics (as opposed to bad input or configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PathDiverged { .. }
                | Error::DriftNotIdentified(_)
                | Error::LikelihoodUndefined
                | Error::BandwidthTooSmall { .. }
                | Error::NoValidPairs
                | Error::TooManyFailures { .. }
        )
    }
}
