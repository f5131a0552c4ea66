use std::fmt;

use wqed_core::core::CoreError;
use wqed_core::fit::FitError;

/// Command failures, each mapped to a process exit code:
/// 2 config, 3 data, 4 numerical span/evaluation, 5 non-convergence.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Convergence(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Convergence(m) => write!(f, "did not converge: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Core failures during model evaluation or inversion are numerical-span
/// conditions by the time the inputs have passed config and data checks.
pub fn numerical(err: CoreError) -> CliError {
    CliError::Numerical(err.to_string())
}

pub fn from_fit_error(err: FitError) -> CliError {
    match err {
        // The dataset lacks leverage on a requested parameter.
        FitError::Identifiability(m) => CliError::Data(m),
        FitError::Model { .. } | FitError::Core(_) => CliError::Numerical(err.to_string()),
    }
}

pub fn io_data(path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {err}", path.display()))
}
