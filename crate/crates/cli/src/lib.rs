//! Front end of the `gradflow` binary: config schema, output files and commands.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;

/// Exit status plus message.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    /// Bad invocation or unreadable input.
    pub fn usage(message: String) -> Self {
        CliError { code: 2, message }
    }

    pub fn config(message: String) -> Self {
        CliError { code: 2, message }
    }

    /// A computation ran but failed or missed a threshold.
    pub fn failure(message: String) -> Self {
        CliError { code: 1, message }
    }

    pub fn context(mut self, prefix: &str) -> Self {
        self.message = format!("{prefix}: {}", self.message);
        self
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::failure(format!("i/o error: {e}"))
    }
}
