use popdyn_core::PopdynError;
use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Model(#[from] PopdynError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

impl HarnessError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            context: context.into(),
            source,
        }
    }

    /// Config problems exit with 2; everything else is a run failure.
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config { .. })
    }
}
