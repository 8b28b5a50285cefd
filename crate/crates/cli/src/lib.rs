//! Command-line layer over `cbo-core`: JSON configs, the `run` and `theory`
//! commands, experiment presets and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod presets;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::RunConfig;

/// Errors surfaced by the CLI, each with a fixed process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("theory precondition failed: {0}")]
    Theory(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("write failed: {0}")]
    Write(#[from] std::io::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Theory(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<cbo_core::Error> for CliError {
    fn from(e: cbo_core::Error) -> Self {
        use cbo_core::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidDimension(_) | E::InvalidInput(_) => CliError::Config(e.to_string()),
            E::Divergence { .. } | E::NumericDomain { .. } => CliError::Divergence(e.to_string()),
            E::InfiniteRate
            | E::NonContractive { .. }
            | E::InvalidAccuracy { .. }
            | E::UnsupportedInitialization { .. }
            | E::EmptyBall => CliError::Theory(e.to_string()),
        }
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Divergence(String::new()).exit_code(), 3);
        assert_eq!(CliError::Theory(String::new()).exit_code(), 4);
        assert_eq!(CliError::Failed(String::new()).exit_code(), 1);
    }

    #[test]
    fn core_errors_map_to_classes() {
        let e: CliError = cbo_core::Error::Divergence { step: 3, particle: 1 }.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = cbo_core::Error::NonContractive {
            two_lambda: 1.0,
            d_sigma_sq: 2.0,
        }
        .into();
        assert_eq!(e.exit_code(), 4);
        let e: CliError = cbo_core::Error::InvalidConfig("x".into()).into();
        assert_eq!(e.exit_code(), 2);
    }
}
