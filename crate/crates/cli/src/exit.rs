//! Process exit codes and the error type carrying them.

use std::fmt;
use std::process::ExitCode;

use spincm_core::Error;

use crate::state_file::FieldError;

pub const OK: u8 = 0;
pub const USAGE: u8 = 1;
pub const SINGULAR: u8 = 2;
pub const CONSTRAINT_DRIFT: u8 = 3;
pub const IO: u8 = 4;
pub const NEWTON: u8 = 5;
pub const SPECTRAL_MARGIN: u8 = 6;
pub const VERIFICATION_FAILED: u8 = 7;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Exit code for a library error raised while running a command.
pub fn code_for(err: &Error) -> u8 {
    match err {
        Error::Dimension(_) | Error::InvalidParameter(_) => USAGE,
        Error::SingularConfiguration { .. }
        | Error::Overflow { .. }
        | Error::NonFinite(_)
        | Error::PoleProximity { .. }
        | Error::SampleNearPole { .. } => SINGULAR,
        Error::ConstraintViolation { .. } | Error::ConstraintDrift { .. } => CONSTRAINT_DRIFT,
        Error::NewtonDivergence { .. } | Error::RankDeficient { .. } => NEWTON,
        Error::SpectralMargin { .. } => SPECTRAL_MARGIN,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Self::new(code_for(&err), err.to_string())
    }
}

impl From<FieldError> for Failure {
    fn from(err: FieldError) -> Self {
        Self::new(IO, format!("malformed state file: {err}"))
    }
}

pub fn io_failure(path: &std::path::Path, err: impl fmt::Display) -> Failure {
    Failure::new(IO, format!("{}: {err}", path.display()))
}
