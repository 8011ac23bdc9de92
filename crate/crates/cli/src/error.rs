use std::fmt;

use coarsekit::ErrorKind;

/// Failure of a run, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad config file, unknown command, out-of-range parameter (exit 2).
    Config(String),
    /// Unreadable or malformed input file (exit 3).
    Input(String),
    /// A precondition of the computation does not hold (exit 4).
    Precondition(String),
    /// A numerical routine did not converge (exit 5).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Precondition(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Input(m) => write!(f, "input: {m}"),
            CliError::Precondition(m) => write!(f, "precondition: {m}"),
            CliError::Numerical(m) => write!(f, "numerical: {m}"),
        }
    }
}

impl From<coarsekit::Error> for CliError {
    fn from(e: coarsekit::Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Input => CliError::Input(msg),
            ErrorKind::Precondition => CliError::Precondition(msg),
            ErrorKind::Numerical => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Rejects a parameter outside its range before any work is done.
pub fn ensure(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}
