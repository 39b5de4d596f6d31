use thiserror::Error;

/// Errors raised by mechanisms, approximation routines and the experiment harness.
#[derive(Debug, Error)]
pub enum LdpError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("query outside the supported class: {0}")]
    QueryClass(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LdpError {
    /// Stable short code written into report rows when a trial fails.
    pub fn code(&self) -> &'static str {
        match self {
            LdpError::Parameter(_) => "E_PARAMETER",
            LdpError::Estimation(_) => "E_ESTIMATION",
            LdpError::Config(_) => "E_CONFIG",
            LdpError::Protocol(_) => "E_PROTOCOL",
            LdpError::QueryClass(_) => "E_QUERY_CLASS",
            LdpError::Degenerate(_) => "E_DEGENERATE",
            LdpError::Io(_) => "E_IO",
            LdpError::Csv(_) => "E_CSV",
            LdpError::Json(_) => "E_JSON",
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        LdpError::Parameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LdpError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, LdpError>;
