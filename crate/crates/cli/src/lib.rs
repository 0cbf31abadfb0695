//! Command implementations behind the `aqlmr` binary.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 semantic error, 4 runtime error.

pub mod args;
pub mod commands;
pub mod report;

use std::process::ExitCode;

use aqlmr::aql::{ParseError, SemanticError};
use aqlmr::engine::EngineError;
use aqlmr::planner::{ConfigError, PlanError};
use aqlmr::StoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Already rendered with a caret diagram.
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Semantic(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Semantic(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn parse(err: &ParseError, query: &str) -> Self {
        CliError::Parse(err.render(query))
    }
}

impl From<SemanticError> for CliError {
    fn from(e: SemanticError) -> Self {
        CliError::Semantic(format!("semantic error: {e}"))
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Runtime(format!("storage error: {e}"))
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Runtime(format!("engine error: {e}"))
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        CliError::Runtime(format!("planning error: {e}"))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let msg = format!("config error: {e}");
        match e {
            ConfigError::Io { .. } | ConfigError::Plan(_) => CliError::Runtime(msg),
            ConfigError::Malformed { .. }
            | ConfigError::MissingKey(_)
            | ConfigError::UnknownKey(_)
            | ConfigError::InvalidValue { .. } => CliError::Parse(msg),
            _ => CliError::Semantic(msg),
        }
    }
}

/// Runs the parsed command, printing output and diagnostics.
pub fn run(cli: args::Cli) -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    match commands::dispatch(cli.command, &mut stdout, &mut stderr) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            use std::io::Write;
            let _ = writeln!(stderr, "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
