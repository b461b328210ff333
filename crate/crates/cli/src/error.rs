use std::fmt;

/// Failure of a subcommand, carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input data. Exit code 1.
    Input(String),
    /// Invalid configuration, flags or transition table. Exit code 2.
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
        }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;
