use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A query reached past the window the finite data was drawn from.
    #[error("window exceeded: requested {requested}, window is {window}")]
    WindowExceeded { requested: u64, window: u64 },

    #[error("window {0} is above the supported maximum 2^48")]
    WindowTooLarge(u64),

    #[error("element {element} lies outside the window [0, {window}]")]
    ElementOutsideWindow { element: u64, window: u64 },

    #[error("duplicate element {0}")]
    DuplicateElement(u64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed set spec `{spec}`: {reason}")]
    MalformedSpec { spec: String, reason: String },

    #[error("{0}: the set is empty")]
    EmptySet(&'static str),

    #[error("mixed windows: {0} vs {1}")]
    MixedWindows(u64, u64),

    #[error("containment violated: {0} is not in the ambient set")]
    NotSubset(u64),

    #[error("counting capacity exceeded: {0}")]
    CapacityOverflow(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid certificate: {0}")]
    Certificate(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::WindowExceeded { .. }
            | Error::WindowTooLarge(_)
            | Error::CapacityOverflow(_) => 3,
            _ => 2,
        }
    }
}
