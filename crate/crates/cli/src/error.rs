use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use melodyforge::audio_io::{ManifestError, WavError};
use melodyforge::config::ConfigError;
use melodyforge::melodygen::GenError;
use melodyforge::shiftlab::ShiftError;
use melodyforge::synth::SynthError;
use thiserror::Error;

/// Exit statuses, one per error class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const DISK_FULL: u8 = 4;
    pub const MISSING_BASE: u8 = 5;
    pub const VERIFY_FAILED: u8 = 6;
    pub const INVALID_LEVEL: u8 = 7;
}

const ENOSPC: i32 = 28;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Wav { path: PathBuf, source: WavError },
    #[error("{path}: {source}")]
    Manifest { path: PathBuf, source: ManifestError },
    #[error("{0}")]
    MissingBase(String),
    #[error("{0}")]
    InvalidLevel(String),
    #[error("{0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Shift(ShiftError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl From<ShiftError> for CliError {
    fn from(e: ShiftError) -> Self {
        match e {
            ShiftError::InvalidLevel(_) | ShiftError::InvalidBiasLevel(_) => CliError::InvalidLevel(e.to_string()),
            ShiftError::MissingManifest { .. } | ShiftError::MisalignedTwins { .. } => {
                CliError::MissingBase(e.to_string())
            }
            other => CliError::Shift(other),
        }
    }
}

fn io_status(e: &io::Error) -> u8 {
    if e.raw_os_error() == Some(ENOSPC) {
        exit::DISK_FULL
    } else {
        exit::IO
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn status(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Gen(_) | CliError::Synth(_) => exit::USAGE,
            CliError::Shift(_) => exit::USAGE,
            CliError::Io { source, .. } => io_status(source),
            CliError::Wav { source, .. } => match source {
                WavError::Io(e) => io_status(e),
                _ => exit::IO,
            },
            CliError::Manifest { source, .. } => match source {
                ManifestError::Io(e) => io_status(e),
                _ => exit::IO,
            },
            CliError::MissingBase(_) => exit::MISSING_BASE,
            CliError::InvalidLevel(_) => exit::INVALID_LEVEL,
            CliError::VerificationFailed(_) => exit::VERIFY_FAILED,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.status())
    }
}
