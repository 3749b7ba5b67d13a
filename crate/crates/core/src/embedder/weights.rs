//! EWN1 weight files.
//!
//! Layout: magic `EWN1` | u32 LE manifest length | UTF-8 JSON manifest |
//! payload of little-endian float32 tensors. The manifest is an ordered array
//! of `{name, kind, hyperparams, shape, byte_offset, byte_len}`; offsets are
//! relative to the payload start. Tensors are looked up by name, so payload
//! order is free.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::arch::{self, TensorSpec};

pub const MAGIC: &[u8; 4] = b"EWN1";

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("bad magic: not an EWN1 weight file")]
    BadMagic,
    #[error("manifest mismatch at `{layer}`: {detail}")]
    ManifestMismatch { layer: String, detail: String },
    #[error("tensor `{0}` contains non-finite values")]
    NonFiniteTensor(String),
    #[error("manifest is not valid JSON: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn mismatch(layer: &str, detail: impl Into<String>) -> WeightsError {
    WeightsError::ManifestMismatch {
        layer: layer.to_string(),
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub name: String,
    pub kind: String,
    pub hyperparams: Value,
    pub shape: Vec<usize>,
    pub byte_offset: u64,
    pub byte_len: u64,
}

/// Validated, immutable set of named tensors matching the architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    manifest: Vec<ManifestRecord>,
    tensors: HashMap<String, Vec<f32>>,
}

impl ModelWeights {
    /// Builds weights from named tensors in canonical order, validating them.
    pub fn from_tensors(tensors: Vec<(String, Vec<f32>)>) -> Result<Self, WeightsError> {
        let specs: HashMap<String, TensorSpec> = arch::tensor_specs()
            .into_iter()
            .map(|s| (s.name.clone(), s))
            .collect();
        let mut manifest = Vec::with_capacity(tensors.len());
        let mut offset = 0u64;
        for (name, data) in &tensors {
            let spec = specs
                .get(name)
                .ok_or_else(|| mismatch(name, "unknown tensor"))?;
            let len = data.len() as u64 * 4;
            manifest.push(ManifestRecord {
                name: name.clone(),
                kind: spec.kind.to_string(),
                hyperparams: spec.hyperparams.clone(),
                shape: spec.shape.clone(),
                byte_offset: offset,
                byte_len: len,
            });
            offset += len;
        }
        let weights = Self {
            manifest,
            tensors: tensors.into_iter().collect(),
        };
        weights.validate()?;
        Ok(weights)
    }

    /// Randomly initialized but valid weights (He-normal convolutions,
    /// Glorot dense layers, mildly perturbed batch-norm statistics).
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0f32, 1.0).expect("valid normal");
        let tensors = arch::tensor_specs()
            .into_iter()
            .map(|spec| {
                let n = spec.numel();
                let leaf = spec.name.rsplit('/').next().unwrap_or_default();
                let data: Vec<f32> = match (spec.kind, leaf) {
                    ("batchnorm", "gamma") => sample_uniform(&mut rng, n, 0.8, 1.2),
                    ("batchnorm", "beta") | ("batchnorm", "moving_mean") => {
                        (0..n).map(|_| 0.1 * unit.sample(&mut rng)).collect()
                    }
                    ("batchnorm", _) => sample_uniform(&mut rng, n, 0.5, 1.5),
                    (_, "bias") => (0..n).map(|_| 0.05 * unit.sample(&mut rng)).collect(),
                    ("dense", _) => {
                        let std = (2.0 / (spec.shape[0] + spec.shape[1]) as f32).sqrt();
                        (0..n).map(|_| std * unit.sample(&mut rng)).collect()
                    }
                    _ => {
                        // conv kernels: fan-in is everything but the output axis
                        let fan_in: usize = if spec.kind == "depthwise_conv2d" {
                            spec.shape[0] * spec.shape[1]
                        } else {
                            spec.shape[..3].iter().product()
                        };
                        let std = (2.0 / fan_in as f32).sqrt();
                        (0..n).map(|_| std * unit.sample(&mut rng)).collect()
                    }
                };
                (spec.name, data)
            })
            .collect();
        Self::from_tensors(tensors).expect("random weights follow the architecture")
    }

    pub fn manifest(&self) -> &[ManifestRecord] {
        &self.manifest
    }

    pub fn tensor(&self, name: &str) -> Option<&[f32]> {
        self.tensors.get(name).map(Vec::as_slice)
    }

    /// Looks up a tensor that validation guarantees is present.
    pub(crate) fn expect(&self, name: &str) -> &[f32] {
        self.tensor(name)
            .unwrap_or_else(|| panic!("validated weights lack `{name}`"))
    }

    fn validate(&self) -> Result<(), WeightsError> {
        let expected = arch::tensor_specs();
        let by_name: HashMap<&str, &ManifestRecord> =
            self.manifest.iter().map(|r| (r.name.as_str(), r)).collect();
        if by_name.len() != self.manifest.len() {
            let mut seen = std::collections::HashSet::new();
            let dup = self
                .manifest
                .iter()
                .find(|r| !seen.insert(r.name.as_str()))
                .map(|r| r.name.clone())
                .unwrap_or_default();
            return Err(mismatch(&dup, "duplicate tensor name"));
        }
        for spec in &expected {
            let rec = by_name
                .get(spec.name.as_str())
                .ok_or_else(|| mismatch(&spec.name, "missing tensor"))?;
            if rec.kind != spec.kind {
                return Err(mismatch(
                    &spec.name,
                    format!("kind `{}`, expected `{}`", rec.kind, spec.kind),
                ));
            }
            if rec.hyperparams != spec.hyperparams {
                return Err(mismatch(
                    &spec.name,
                    format!(
                        "hyperparams {}, expected {}",
                        rec.hyperparams, spec.hyperparams
                    ),
                ));
            }
            if rec.shape != spec.shape {
                return Err(mismatch(
                    &spec.name,
                    format!("shape {:?}, expected {:?}", rec.shape, spec.shape),
                ));
            }
            let data = self
                .tensors
                .get(&spec.name)
                .ok_or_else(|| mismatch(&spec.name, "missing tensor data"))?;
            if data.len() != spec.numel() || rec.byte_len != spec.numel() as u64 * 4 {
                return Err(mismatch(
                    &spec.name,
                    format!("{} bytes, expected {}", rec.byte_len, spec.numel() * 4),
                ));
            }
            if data.iter().any(|v| !v.is_finite()) {
                return Err(WeightsError::NonFiniteTensor(spec.name.clone()));
            }
        }
        if self.manifest.len() != expected.len() {
            let extra = self
                .manifest
                .iter()
                .find(|r| !expected.iter().any(|s| s.name == r.name))
                .map(|r| r.name.clone())
                .unwrap_or_default();
            return Err(mismatch(&extra, "unexpected tensor"));
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WeightsError> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(WeightsError::BadMagic);
        }
        let manifest_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let payload_start = 8usize
            .checked_add(manifest_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| truncated("manifest"))?;
        let manifest: Vec<ManifestRecord> = serde_json::from_slice(&bytes[8..payload_start])?;
        let payload = &bytes[payload_start..];

        let mut tensors = HashMap::with_capacity(manifest.len());
        for rec in &manifest {
            let start = usize::try_from(rec.byte_offset).map_err(|_| truncated(&rec.name))?;
            let len = usize::try_from(rec.byte_len).map_err(|_| truncated(&rec.name))?;
            let end = start
                .checked_add(len)
                .filter(|&e| e <= payload.len())
                .ok_or_else(|| truncated(&rec.name))?;
            if len % 4 != 0 {
                return Err(mismatch(
                    &rec.name,
                    format!("byte_len {len} not a multiple of 4"),
                ));
            }
            let data = payload[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.insert(rec.name.clone(), data);
        }
        let mut weights = Self { manifest, tensors };
        weights.validate()?;
        weights.relayout();
        Ok(weights)
    }

    /// Assigns sequential payload offsets in manifest order.
    fn relayout(&mut self) {
        let mut offset = 0u64;
        for rec in &mut self.manifest {
            rec.byte_offset = offset;
            offset += rec.byte_len;
        }
    }

    /// Serializes with the payload laid out in manifest order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = &self.manifest;
        let payload_len: u64 = manifest.iter().map(|r| r.byte_len).sum();
        let json = serde_json::to_vec(manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(8 + json.len() + payload_len as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for rec in manifest {
            for v in &self.tensors[&rec.name] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WeightsError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WeightsError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn truncated(what: &str) -> WeightsError {
    WeightsError::Io(io::Error::new(
        io::ErrorKind::UnexpectedEof,
        format!("weight file truncated in `{what}`"),
    ))
}

fn sample_uniform(rng: &mut ChaCha8Rng, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    let dist = Uniform::new(lo, hi).expect("valid range");
    (0..n).map(|_| dist.sample(rng)).collect()
}
