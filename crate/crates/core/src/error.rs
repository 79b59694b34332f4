use std::fmt;

/// Errors produced by the inference library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Parameters or hyperparameters violate a type invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An operation was called outside its domain.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Every emission density vanished at one observation.
    #[error("emission densities underflowed at observation index {index}")]
    Underflow { index: usize },

    /// A linear-algebra or iterative routine failed to produce a usable answer.
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: String, detail: String },

    /// A Dirichlet row prior is too weak for the concentration rate to exist.
    #[error(
        "rate condition violated: alpha_bar = {alpha_bar} must exceed k(k-1+d) = {required} (deficit {deficit})"
    )]
    RateCondition {
        alpha_bar: f64,
        required: f64,
        deficit: f64,
    },

    /// A rejection sampler could not produce a draw.
    #[error("sampler stuck: acceptance rate {rate:e} after {attempts} attempts")]
    SamplerStuck { rate: f64, attempts: u64 },

    /// Failure while running a chain, tagged with the sweep index.
    #[error("chain failed at iteration {iteration}: {source}")]
    Chain {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A serialized artifact did not have the expected layout.
    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidParams(msg.to_string())
    }

    pub(crate) fn precondition(msg: impl fmt::Display) -> Self {
        Error::Precondition(msg.to_string())
    }

    pub(crate) fn numerical(context: impl fmt::Display, detail: impl fmt::Display) -> Self {
        Error::Numerical {
            context: context.to_string(),
            detail: detail.to_string(),
        }
    }

    pub(crate) fn format(what: impl fmt::Display, detail: impl fmt::Display) -> Self {
        Error::Format {
            what: what.to_string(),
            detail: detail.to_string(),
        }
    }

    /// True for failures that come from floating-point limits rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Underflow { .. } | Error::Numerical { .. } | Error::SamplerStuck { .. } => true,
            Error::Chain { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
