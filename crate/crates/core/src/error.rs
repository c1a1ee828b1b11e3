use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("site {0} is outside the window")]
    OutsideWindow(String),

    #[error("bad box: site {witness} lies both in the past and in the future of the region")]
    BadBox { witness: String },

    #[error("truncation: the window does not contain {}", .missing.join(", "))]
    Truncation { missing: Vec<String> },

    #[error("past edges contain a cycle through site {0}")]
    Cyclic(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing boundary values at {}", .sites.join(", "))]
    MissingBoundary { sites: Vec<String> },

    #[error("state space too large: {size} states exceeds the limit of {limit}")]
    TooLarge { size: f64, limit: f64 },

    #[error("singular conditional: {0}")]
    Singular(String),

    #[error("load error at {location}: {message}")]
    Load { location: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("monotonicity audit failed: {0}")]
    NotMonotone(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn load(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Load {
            location: location.into(),
            message: message.into(),
        }
    }
}
