use std::fmt;

/// Failure of a CLI command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("rate condition: {0}")]
    Rate(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Rate(_) => 4,
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }

    /// Prefixes the message, keeping the class.
    pub fn context(self, ctx: impl fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
            CliError::Rate(m) => CliError::Rate(format!("{ctx}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{ctx}: {m}")),
        }
    }
}

fn classify(e: &hmmob::Error) -> fn(String) -> CliError {
    use hmmob::Error as E;
    match e {
        E::RateCondition { .. } => CliError::Rate,
        E::Chain { source, .. } => classify(source),
        E::InvalidParams(_) | E::Precondition(_) => CliError::Config,
        E::Io(_) | E::Csv(_) | E::Json(_) | E::Format { .. } => CliError::Io,
        _ if e.is_numerical() => CliError::Numerical,
        _ => CliError::Io,
    }
}

impl From<hmmob::Error> for CliError {
    fn from(e: hmmob::Error) -> Self {
        classify(&e)(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
