use std::process::ExitCode;

use quasisym::Error;

/// Process exit statuses; stable across releases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Success = 0,
    BadFlags = 2,
    Io = 3,
    Coverage = 4,
    Numeric = 5,
}

impl Status {
    pub fn of(err: &Error) -> Self {
        match err {
            Error::Io { .. }
            | Error::Decode(_)
            | Error::EmptyImage
            | Error::InvalidImage(_)
            | Error::Json(_) | Error::Csv(_) | Error::Schema(_) => Status::Io,
            Error::InvalidArgument(_)
            | Error::UnsupportedFamily(_)
            | Error::Config(_)
            | Error::BeyondNyquist { .. }
            | Error::TooManyElements { .. } => Status::BadFlags,
            Error::InsufficientCoverage { .. } => Status::Coverage,
            _ => Status::Numeric,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s.code())
    }
}
