//! Pipeline orchestration behind the `holoqa` binary: configuration, scene
//! construction, one function per subcommand and run manifests.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod scene;

pub use commands::{analyze, ladder, prepare_serve, reconstruct, render, report, synth, Context};
pub use config::{parse, parse_external_flag, ConfigError, PipelineConfig};
pub use manifest::{FileEntry, RunManifest, MANIFEST_DIR};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A prerequisite output of an earlier stage is missing.
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Field(#[from] holoqa_core::field::FieldError),
    #[error(transparent)]
    Propagation(#[from] holoqa_core::propagation::PropagationError),
    #[error(transparent)]
    Cgh(#[from] holoqa_core::cgh::CghError),
    #[error(transparent)]
    Codec(#[from] holoqa_core::codec::CodecError),
    #[error(transparent)]
    View(#[from] holoqa_core::view::ViewError),
    #[error(transparent)]
    Stats(#[from] holoqa_core::stats::StatsError),
    #[error(transparent)]
    Session(#[from] holoqa_session::SessionError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Outputs were written but some ladder cells failed.
    #[error("{count} ladder cell(s) failed: {detail}")]
    LadderFailures { count: usize, detail: String },
}

impl CliError {
    /// Stable kind string for structured diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Missing(_) => "missing_input",
            CliError::Field(_) => "field",
            CliError::Propagation(_) => "propagation",
            CliError::Cgh(_) => "cgh",
            CliError::Codec(_) => "codec",
            CliError::View(_) => "view",
            CliError::Stats(_) => "stats",
            CliError::Session(_) => "session",
            CliError::Io { .. } => "io",
            CliError::LadderFailures { .. } => "ladder_failures",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}
