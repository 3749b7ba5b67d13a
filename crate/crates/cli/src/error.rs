use std::io;
use std::path::PathBuf;

use hotword_core::bench::BenchError;
use hotword_core::matcher::EnrollError;
use hotword_core::spectrogram::SpectrogramError;
use hotword_core::stream::StreamError;
use hotword_core::synth::SynthError;
use hotword_core::{AudioError, TemplateError, WeightsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Audio { path: PathBuf, source: AudioError },
    #[error("{}: {source}", path.display())]
    Weights { path: PathBuf, source: WeightsError },
    #[error("{}: {source}", path.display())]
    Template {
        path: PathBuf,
        source: TemplateError,
    },
    #[error(transparent)]
    Spectrogram(#[from] SpectrogramError),
    #[error(transparent)]
    Enroll(#[from] EnrollError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Data(String),
    #[error("audio capture: {0}")]
    Capture(String),
}

impl CliError {
    /// 1 usage, 2 bad input data, 3 failure while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Input { .. }
            | Self::Audio { .. }
            | Self::Weights { .. }
            | Self::Template { .. }
            | Self::Spectrogram(_)
            | Self::Synth(_)
            | Self::Data(_) => 2,
            Self::Enroll(EnrollError::Audio(_) | EnrollError::Template(_)) => 2,
            Self::Bench(BenchError::Stream(_)) => 3,
            Self::Bench(_) => 2,
            Self::Stream(StreamError::Audio(_)) => 2,
            Self::Output { .. } | Self::Enroll(_) | Self::Stream(_) | Self::Capture(_) => 3,
        }
    }
}
