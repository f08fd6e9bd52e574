//! File formats, dispatch and selftest for the dyadic entropy-bump toolkit;
//! the model layer lives in `entropylab-core`.

pub mod config;
pub mod report;
pub mod run;
pub mod selftest;

pub use config::{CommandKind, FileConfig, Format, Overrides, Settings};
pub use report::{write_atomic, Envelope};

/// Errors at the CLI boundary. Exit codes: validation 2, degenerate input 3,
/// IO 4 (selftest failures exit 1 on their own path).
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] entropylab_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) => 2,
            LabError::Core(e) if e.is_degenerate() => 3,
            LabError::Core(_) => 2,
            LabError::Io(_) => 4,
        }
    }
}
