use thiserror::Error;

pub type Result<T, E = LandscapeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LandscapeError {
    /// An input value violates a type invariant. `field` names the offending input.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("x = {x} lies outside [{t0}, {t1}]")]
    Domain { x: f64, t0: f64, t1: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("cannot construct network: {0}")]
    Construction(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl LandscapeError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid { field: field.into(), reason: reason.into() }
    }

    /// `true` for errors caused by bad user input rather than by the library.
    pub fn is_validation(&self) -> bool {
        matches!(self, Self::Invalid { .. } | Self::Domain { .. } | Self::Json(_))
    }
}
