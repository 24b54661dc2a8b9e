use std::fmt;

use fcsd_core::cha::ChaError;
use fcsd_core::dispatch::DispatchError;
use fcsd_core::horizon::HorizonError;
use fcsd_core::io::IoError;
use fcsd_core::qp::QpStatus;
use fcsd_core::sfr::SfrError;
use fcsd_core::uncertainty::UncertaintyError;

/// Bad input: files, flags or model data.
pub const EXIT_VALIDATION: u8 = 1;
/// The model has no feasible point.
pub const EXIT_INFEASIBLE: u8 = 2;
/// A numerical routine failed on valid input.
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            msg: msg.into(),
        }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERIC,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

fn dispatch_code(e: &DispatchError) -> u8 {
    match e {
        DispatchError::Validation { .. } => EXIT_VALIDATION,
        DispatchError::Structural { .. } | DispatchError::EmptyRegion { .. } => EXIT_INFEASIBLE,
        DispatchError::Cha(c) => cha_code(c),
        DispatchError::Solve { status, .. } => match status {
            QpStatus::Infeasible | QpStatus::Unbounded => EXIT_INFEASIBLE,
            _ => EXIT_NUMERIC,
        },
        DispatchError::Quantile(_) | DispatchError::Qp(_) => EXIT_NUMERIC,
    }
}

fn cha_code(e: &ChaError) -> u8 {
    match e {
        ChaError::EmptyRegion => EXIT_INFEASIBLE,
        ChaError::InvalidConfig(_) => EXIT_VALIDATION,
        ChaError::DegeneratePolygon { .. } => EXIT_NUMERIC,
    }
}

impl From<DispatchError> for CliError {
    fn from(e: DispatchError) -> Self {
        Self {
            code: dispatch_code(&e),
            msg: e.to_string(),
        }
    }
}

impl From<HorizonError> for CliError {
    fn from(e: HorizonError) -> Self {
        let code = match &e {
            HorizonError::Config(_) | HorizonError::Scenario(_) => EXIT_VALIDATION,
            HorizonError::Solve { source, .. } => dispatch_code(source),
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match &e {
            IoError::Case { source, .. } => dispatch_code(source),
            IoError::Scenario {
                source: HorizonError::Solve { source, .. },
                ..
            } => dispatch_code(source),
            _ => EXIT_VALIDATION,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<ChaError> for CliError {
    fn from(e: ChaError) -> Self {
        Self {
            code: cha_code(&e),
            msg: e.to_string(),
        }
    }
}

impl From<SfrError> for CliError {
    fn from(e: SfrError) -> Self {
        let code = match e {
            SfrError::IntegrationFailure { .. } => EXIT_NUMERIC,
            _ => EXIT_VALIDATION,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<UncertaintyError> for CliError {
    fn from(e: UncertaintyError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::validation(e.to_string())
    }
}
