use thiserror::Error;

/// Errors reported by the estimation and testing pipeline.
#[derive(Debug, Error)]
pub enum VolJumpError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("input format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, VolJumpError>;

impl VolJumpError {
    pub fn parameter(msg: impl Into<String>) -> Self {
        VolJumpError::Parameter(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        VolJumpError::Format(msg.into())
    }
}
