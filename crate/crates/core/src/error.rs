use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what} out of range: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter vector: {0}")]
    Params(String),

    #[error("sound too short: {frames} analysis frames, need at least {needed}")]
    TooShort { frames: usize, needed: usize },

    #[error("axis {0} is degenerate")]
    DegenerateAxis(usize),

    #[error("need at least {needed} {what}, got {got}")]
    NotEnough {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("singular linear system (regularization reached {0:e})")]
    Singular(f64),

    #[error("malformed {kind}: {msg}")]
    Format { kind: &'static str, msg: String },

    #[error("{kind} version {found} is not supported (expected {expected})")]
    Version {
        kind: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("artifact chain mismatch: {0}")]
    Chain(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Session(#[from] crate::session::SessionError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            kind,
            msg: msg.into(),
        }
    }
}
