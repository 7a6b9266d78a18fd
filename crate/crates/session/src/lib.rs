//! Test administration backend for double-stimulus impairment-scale studies:
//! per-subject randomized playlists, blinded stimulus delivery that enforces
//! reference-before-impaired, durable score capture and CSV export for the
//! statistics pipeline.

pub mod config;
pub mod http;
pub mod journal;
pub mod playlist;
pub mod study;

pub use config::{ConditionSpec, Limits, Presentation, StudyConfig, Timing, SCALE};
pub use http::{router, serve, serve_until, AppState};
pub use journal::{parse as parse_journal, Event, Journal, Role};
pub use playlist::{build_playlist, subject_seed, Playlist};
pub use study::{Ack, Next, SessionStatus, Step, StimulusLink, Study};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("{0}")]
    Invalid(String),
    #[error("missing stimulus files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingStimuli(Vec<PathBuf>),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("journal {}:{line}: {reason}", path.display())]
    Journal { path: PathBuf, line: usize, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = SessionError> = std::result::Result<T, E>;
