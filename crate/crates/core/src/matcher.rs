//! One-shot enrollment and distance-based matching.
//!
//! A template holds one or more reference embeddings of a hotword. A query
//! embedding is compared against each reference by Euclidean distance; the
//! smallest distance is mapped to a similarity score
//! `F(x) = 1 - x⁴ / (τ⁴ + x⁴)`, which is 1 at distance 0 and exactly 0.5 at
//! `x = τ`. The query is accepted when the score reaches the template cutoff.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioClip, AudioError};
use crate::embedder::{Embedder, Embedding, EmbeddingError, EMBED_DIM};
use crate::nn::NnError;
use crate::spectrogram::{LogMelExtractor, SpectrogramError};

pub const DEFAULT_TAU: f64 = 0.2;
pub const DEFAULT_CUTOFF: f64 = 0.5;
pub const MAX_REFS: usize = 32;
pub const TEMPLATE_MAGIC: &[u8; 4] = b"EWNT";
pub const TEMPLATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("invalid template: {0}")]
    Invalid(String),
    #[error("corrupt template file: {0}")]
    Corrupt(String),
    #[error("unsupported template version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum EnrollError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Spectrogram(#[from] SpectrogramError),
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

pub fn euclidean(a: &Embedding, b: &Embedding) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `1 - x⁴ / (τ⁴ + x⁴)`.
pub fn similarity_score(distance: f64, tau: f64) -> f64 {
    debug_assert!(distance >= 0.0 && tau > 0.0);
    // (τ/x)⁴ form keeps F(τ) exact and avoids overflow for large x
    if distance == 0.0 {
        return 1.0;
    }
    let r = (tau / distance).powi(4);
    r / (1.0 + r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub distance: f64,
    pub score: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotwordTemplate {
    name: String,
    refs: Vec<Embedding>,
    tau: f64,
    cutoff: f64,
}

impl HotwordTemplate {
    pub fn new(name: impl Into<String>, refs: Vec<Embedding>) -> Result<Self, TemplateError> {
        Self::with_thresholds(name, refs, DEFAULT_TAU, DEFAULT_CUTOFF)
    }

    pub fn with_thresholds(
        name: impl Into<String>,
        refs: Vec<Embedding>,
        tau: f64,
        cutoff: f64,
    ) -> Result<Self, TemplateError> {
        let name = name.into();
        if name.is_empty() || name.contains(['\t', '\n', '\r']) {
            return Err(TemplateError::Invalid(format!("bad hotword name {name:?}")));
        }
        if refs.is_empty() || refs.len() > MAX_REFS {
            return Err(TemplateError::Invalid(format!(
                "{} references, expected 1..={MAX_REFS}",
                refs.len()
            )));
        }
        check_tau(tau)?;
        check_cutoff(cutoff)?;
        Ok(Self {
            name,
            refs,
            tau,
            cutoff,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn refs(&self) -> &[Embedding] {
        &self.refs
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn set_cutoff(&mut self, cutoff: f64) -> Result<(), TemplateError> {
        check_cutoff(cutoff)?;
        self.cutoff = cutoff;
        Ok(())
    }

    pub fn set_tau(&mut self, tau: f64) -> Result<(), TemplateError> {
        check_tau(tau)?;
        self.tau = tau;
        Ok(())
    }

    /// Closest reference distance, its score, and the decision at this template's cutoff.
    pub fn match_embedding(&self, e: &Embedding) -> MatchResult {
        self.match_with_cutoff(e, self.cutoff)
    }

    pub fn match_with_cutoff(&self, e: &Embedding, cutoff: f64) -> MatchResult {
        let distance = self
            .refs
            .iter()
            .map(|r| euclidean(e, r))
            .fold(f64::INFINITY, f64::min);
        let score = similarity_score(distance, self.tau);
        MatchResult {
            distance,
            score,
            accepted: score >= cutoff,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&TemplateHeader {
            name: self.name.clone(),
            tau: self.tau,
            cutoff: self.cutoff,
            ref_count: self.refs.len(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(8 + header.len() + self.refs.len() * EMBED_DIM * 4);
        out.extend_from_slice(TEMPLATE_MAGIC);
        out.extend_from_slice(&TEMPLATE_VERSION.to_le_bytes());
        out.extend_from_slice(&header);
        for r in &self.refs {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TemplateError> {
        if bytes.len() < 8 || &bytes[..4] != TEMPLATE_MAGIC {
            return Err(TemplateError::Corrupt("bad magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != TEMPLATE_VERSION {
            return Err(TemplateError::Version(version));
        }
        // the JSON header carries no length prefix; parse one value and continue after it
        let body = &bytes[8..];
        let mut stream = serde_json::Deserializer::from_slice(body).into_iter::<TemplateHeader>();
        let header = match stream.next() {
            Some(Ok(h)) => h,
            Some(Err(e)) => return Err(TemplateError::Corrupt(format!("header: {e}"))),
            None => return Err(TemplateError::Corrupt("missing header".into())),
        };
        let payload = &body[stream.byte_offset()..];
        let expected = header.ref_count * EMBED_DIM * 4;
        if payload.len() != expected {
            return Err(TemplateError::Corrupt(format!(
                "{} payload bytes for {} references, expected {expected}",
                payload.len(),
                header.ref_count
            )));
        }
        let refs = payload
            .chunks_exact(EMBED_DIM * 4)
            .map(|chunk| {
                let v = chunk
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Embedding::new(v).map_err(|e: EmbeddingError| TemplateError::Corrupt(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_thresholds(header.name, refs, header.tau, header.cutoff)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TemplateError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct TemplateHeader {
    name: String,
    tau: f64,
    cutoff: f64,
    ref_count: usize,
}

fn check_tau(tau: f64) -> Result<(), TemplateError> {
    if tau > 0.0 && tau <= 2.0 {
        Ok(())
    } else {
        Err(TemplateError::Invalid(format!("tau {tau} outside (0, 2]")))
    }
}

fn check_cutoff(cutoff: f64) -> Result<(), TemplateError> {
    if cutoff > 0.0 && cutoff < 1.0 {
        Ok(())
    } else {
        Err(TemplateError::Invalid(format!(
            "cutoff {cutoff} outside (0, 1)"
        )))
    }
}

/// Runs one clip through the front end and network, fitting it to one second first.
pub fn embed_clip(
    clip: &AudioClip,
    extractor: &LogMelExtractor,
    embedder: &Embedder,
) -> Result<Embedding, EnrollError> {
    let window = audio::prepare_window(clip)?;
    let spec = extractor.log_mel(&window)?;
    Ok(embedder.embed(&spec)?)
}

/// Builds a template from one or more reference recordings.
pub fn enroll(
    name: &str,
    ref_clips: &[AudioClip],
    extractor: &LogMelExtractor,
    embedder: &Embedder,
) -> Result<HotwordTemplate, EnrollError> {
    if ref_clips.is_empty() {
        return Err(TemplateError::Invalid("no reference clips".into()).into());
    }
    let refs = ref_clips
        .iter()
        .map(|c| embed_clip(c, extractor, embedder))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HotwordTemplate::new(name, refs)?)
}
