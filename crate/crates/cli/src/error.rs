use std::fmt;

use pike_core::PikeError;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input files. Exit code 2.
    User(String),
    /// The numerics failed on valid input. Exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<PikeError> for CliError {
    fn from(e: PikeError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::User(e.to_string())
        }
    }
}
