use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric error in {location}: {message}")]
    Numeric { location: String, message: String },

    #[error("power iteration did not converge (residual {residual:e})")]
    Convergence { residual: f64 },

    #[error("parse error{}: {message}", layer.map(|l| format!(" in layer {l}")).unwrap_or_default())]
    Parse {
        layer: Option<usize>,
        message: String,
    },

    #[error("empty eligibility set")]
    EmptyEligibilitySet,

    #[error("simulator failure: {0}")]
    Simulation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(layer: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            layer,
            message: message.into(),
        }
    }
}
