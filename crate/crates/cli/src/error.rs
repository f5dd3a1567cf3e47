use serde::Serialize;

use srk_core::convergence::ConvergenceError;
use srk_core::solver::SolverError;
use srk_core::stability::StabilityError;
use srk_core::{FamilyError, TableauError};

/// Misconfiguration or unusable input.
pub const EXIT_VALIDATION: u8 = 2;
/// A mathematical finding or numerical failure.
pub const EXIT_NUMERIC: u8 = 1;

/// Error reported as one JSON object on stderr.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
    #[serde(skip)]
    pub exit_code: u8,
}

impl CliError {
    pub fn validation(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            error: kind,
            message: message.into(),
            detail: None,
            exit_code: EXIT_VALIDATION,
        }
    }

    pub fn numeric(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            error: kind,
            message: message.into(),
            detail: None,
            exit_code: EXIT_NUMERIC,
        }
    }

    pub fn with_detail<T: Serialize>(mut self, detail: &T) -> Self {
        self.detail = serde_json::to_value(detail).ok();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.error))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::validation("json", e.to_string())
    }
}

impl From<TableauError> for CliError {
    fn from(e: TableauError) -> Self {
        CliError::validation("tableau", e.to_string())
    }
}

impl From<FamilyError> for CliError {
    fn from(e: FamilyError) -> Self {
        if e.is_validation() {
            CliError::validation("family_parameters", e.to_string())
        } else {
            CliError::numeric("family_construction", e.to_string())
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        if e.is_validation() {
            CliError::validation("solver_input", e.to_string())
        } else {
            CliError::numeric("solver", e.to_string())
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        match e {
            StabilityError::StageSingular { .. } => CliError::numeric("stability", e.to_string()),
            _ => CliError::validation("stability_input", e.to_string()),
        }
    }
}

impl From<ConvergenceError> for CliError {
    fn from(e: ConvergenceError) -> Self {
        match e {
            ConvergenceError::Solver { source, .. } if !source.is_validation() => {
                CliError::numeric("solver", source.to_string())
            }
            ConvergenceError::NonPositiveError { .. } => {
                CliError::numeric("convergence", e.to_string())
            }
            _ => CliError::validation("convergence_input", e.to_string()),
        }
    }
}
