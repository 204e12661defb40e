use std::process::ExitCode;

use teachdim::analytic::DomainError;
use teachdim::harness::HarnessError;
use teachdim::learner::LearnerError;
use teachdim::oracle::OracleError;
use teachdim::teacher::TeachError;
use teachdim::MdpError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invariant(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Certification(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Certification(_) => 5,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_error(path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {err}", path.display()))
}

impl From<MdpError> for CliError {
    fn from(e: MdpError) -> Self {
        match e {
            MdpError::Io(_) => CliError::Usage(e.to_string()),
            MdpError::Parse { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<LearnerError> for CliError {
    fn from(e: LearnerError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<TeachError> for CliError {
    fn from(e: TeachError) -> Self {
        match e {
            TeachError::Mdp(m) => m.into(),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Teach(t) => t.into(),
            HarnessError::Mdp(m) => m.into(),
            HarnessError::Io(_) | HarnessError::Csv(_) => CliError::Usage(e.to_string()),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::CertificationFailure(_) => CliError::Certification(e.to_string()),
            OracleError::InvalidGraph(_) | OracleError::TooLarge { .. } => CliError::Usage(e.to_string()),
            OracleError::Mdp(m) => m.into(),
            OracleError::Teach(t) => t.into(),
            OracleError::Harness(h) => h.into(),
            OracleError::Unreachable(_) => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> Self {
        CliError::Usage(e.to_string())
    }
}
