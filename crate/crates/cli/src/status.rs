use std::process::ExitCode;

/// Process exit status. The numeric codes are a stable contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Inequality holds, MC run consistent or inconclusive, search found a
    /// violation, reproduction matched.
    Ok,
    /// Search finished without a violation.
    NotFound,
    /// Reproduced values differ from the published ones.
    Mismatch,
    Invalid,
    Violated,
    Suspicious,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::NotFound | Status::Mismatch => 1,
            Status::Invalid => 2,
            Status::Violated => 3,
            Status::Suspicious => 4,
        }
    }
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s.code())
    }
}
