//! Experiment plumbing behind the `vnw` binary: configuration, the end-to-end
//! pipeline and the file writers shared by the subcommands.

pub mod config;
pub mod output;
pub mod pipeline;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{Algorithm, EnvironmentSource, ExperimentConfig, Mode, Sizing};
pub use pipeline::{run_pipeline, train_batch, PipelineSummary, TrainParams};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: vnw_core::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("certification failed: margin {margin} is below -{epsilon}")]
    CertificationFailed { margin: f64, epsilon: f64 },
}

impl CliError {
    /// 2 for bad input, 3 for a failed certificate, 4 when a numeric routine
    /// did not converge.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { source: vnw_core::Error::NonConvergence(_), .. } => 4,
            CliError::CertificationFailed { .. } => 3,
            _ => 2,
        }
    }
}

/// Tags a core error with the stage that raised it.
pub fn at(stage: &'static str) -> impl FnOnce(vnw_core::Error) -> CliError {
    move |source| CliError::Stage { stage, source }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_owned(), source })
}
