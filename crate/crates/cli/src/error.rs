use std::fmt;
use std::path::Path;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SIMULATION: i32 = 4;

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn simulation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_SIMULATION,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<simcal::Error> for CliError {
    fn from(e: simcal::Error) -> Self {
        match e {
            simcal::Error::Simulation(_) => Self::simulation(e.to_string()),
            _ => Self::invalid(e.to_string()),
        }
    }
}
