//! One-shot hotword detection.
//!
//! Audio is cut into one-second windows, turned into 98×64 log-mel
//! spectrograms and embedded by a small convolutional network onto the
//! 256-d unit sphere. A hotword is enrolled from one or a few recordings by
//! storing their embeddings; streaming audio is matched against them by
//! Euclidean distance.

pub mod audio;
pub mod bench;
pub mod embedder;
pub mod matcher;
pub mod nn;
pub mod spectrogram;
pub mod stream;
pub mod synth;

pub use audio::{AudioClip, AudioError};
pub use embedder::{Embedder, Embedding, ModelWeights, WeightsError};
pub use matcher::{HotwordTemplate, MatchResult, TemplateError};
pub use spectrogram::{LogMelExtractor, MelSpectrogram};
pub use stream::{DetectionEvent, Detector, StreamConfig};
