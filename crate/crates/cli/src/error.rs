use std::fmt;

use stegodetect::Error;

/// Exit statuses of the command-line tool.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                Error::Usage(_) => EXIT_USAGE,
                Error::Divergence(_) => EXIT_DIVERGENCE,
                Error::Io { .. } => EXIT_IO,
                Error::Shape { .. }
                | Error::Data(_)
                | Error::Decode { .. }
                | Error::Format(_)
                | Error::Checksum { .. }
                | Error::Version { .. }
                | Error::TensorShape { .. } => EXIT_DATA,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
