//! Base network: log-mel spectrogram in, 256-d unit embedding out.

pub mod arch;
mod network;
pub mod weights;

pub use arch::{intermediate_shapes, LayerShape, EMBED_DIM};
pub use network::Embedder;
pub use weights::{ManifestRecord, ModelWeights, WeightsError};

use thiserror::Error;

/// Allowed deviation of an embedding's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding must have {EMBED_DIM} values, got {0}")]
    Length(usize),
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("embedding norm {0} is not 1")]
    NotUnit(f64),
}

/// A 256-d vector on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    /// Accepts a vector that is already unit-norm.
    pub fn new(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.len() != EMBED_DIM {
            return Err(EmbeddingError::Length(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        let e = Self(values);
        let n = e.norm();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(EmbeddingError::NotUnit(n));
        }
        Ok(e)
    }

    /// Normalizes an arbitrary nonzero vector onto the unit sphere.
    pub fn normalized(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.len() != EMBED_DIM {
            return Err(EmbeddingError::Length(values.len()));
        }
        let n = values
            .iter()
            .map(|&v| (v as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(EmbeddingError::NotUnit(n));
        }
        Self::new(values.iter().map(|&v| (v as f64 / n) as f32).collect())
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&v| (v as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        dot / (self.norm() * other.norm())
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Reads 256 raw little-endian float32 values.
    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        if bytes.len() != EMBED_DIM * 4 {
            return Err(EmbeddingError::Length(bytes.len() / 4));
        }
        Self::new(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_checks() {
        assert_eq!(Embedding::new(vec![0.0; 3]), Err(EmbeddingError::Length(3)));
        assert!(matches!(
            Embedding::new(vec![0.0; EMBED_DIM]),
            Err(EmbeddingError::NotUnit(_))
        ));
        let mut v = vec![0.0; EMBED_DIM];
        v[7] = 1.0;
        let e = Embedding::new(v).unwrap();
        assert_eq!(e.norm(), 1.0);
        let n = Embedding::normalized(vec![2.0; EMBED_DIM]).unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-6);
    }
}
