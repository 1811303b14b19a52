use std::fmt;

/// Run failures, grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file, or out-of-range parameter. Exit 2.
    Config(String),
    /// Missing or malformed input files and checkpoints. Exit 3.
    Data(String),
    /// A checked equivalence did not hold. Exit 4.
    Assertion(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Assertion(_) => EXIT_ASSERTION,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Assertion(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            CliError::Config(_) => "config error",
            CliError::Data(_) => "data error",
            CliError::Assertion(_) => "assertion failed",
        };
        write!(f, "{kind}: {}", self.message())
    }
}

impl std::error::Error for CliError {}

impl From<recos::Error> for CliError {
    fn from(e: recos::Error) -> Self {
        use recos::Error as E;
        match e {
            E::Config(_) | E::Range { .. } | E::Spec { .. } | E::Mode(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
