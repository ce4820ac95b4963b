use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates its constraint. `key` is the dotted
    /// config path of the offending field.
    #[error("invalid config value for `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("cannot read config file {path}")]
    ConfigRead {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("cannot compute statistics over an empty set of users")]
    EmptyStats,

    #[error("simulation produced no windows (total_windows = 0)")]
    NoWindows,
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
