use std::fmt;
use std::path::Path;

/// A failed command, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Data(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<cepairs::Error> for CliError {
    fn from(e: cepairs::Error) -> Self {
        use cepairs::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { .. } | E::MissingPairFile(_) => CliError::Io(msg),
            E::InvalidConfig(_) => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
