//! Log-mel spectrogram front end.
//!
//! One second of 16 kHz audio becomes a 98×64 matrix of natural-log mel band
//! power: 400-sample periodic Hann frames every 160 samples, zero-padded to a
//! 512-point FFT, pooled through 64 peak-normalized triangular filters
//! spanning 80–7600 Hz.

use std::sync::Arc;

use rustfft::{num_complex::Complex32, Fft, FftPlanner};
use thiserror::Error;

use crate::audio::{AudioClip, ENGINE_RATE};

pub const WIN_LENGTH: usize = 400;
pub const HOP_LENGTH: usize = 160;
pub const N_FFT: usize = 512;
pub const N_BINS: usize = N_FFT / 2 + 1;
pub const N_MELS: usize = 64;
pub const N_FRAMES: usize = 98;
pub const F_MIN: f64 = 80.0;
pub const F_MAX: f64 = 7600.0;
pub const POWER_FLOOR: f32 = 1e-10;
/// `ln(1e-10)` rounded once to float32; the value of every floored cell.
pub const LOG_FLOOR: f32 = -23.025_85;
/// Samples in one network window.
pub const WINDOW_SAMPLES: usize = ENGINE_RATE as usize;

#[derive(Debug, Error, PartialEq)]
pub enum SpectrogramError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid filterbank parameters: {0}")]
    Param(String),
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Number of full frames in `n_samples`; zero when shorter than one window.
pub fn frame_count(n_samples: usize) -> usize {
    if n_samples < WIN_LENGTH {
        0
    } else {
        (n_samples - WIN_LENGTH) / HOP_LENGTH + 1
    }
}

/// Frames × 257 power spectrum, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub n_frames: usize,
    pub data: Vec<f32>,
}

impl PowerSpectrogram {
    pub fn frame(&self, i: usize) -> &[f32] {
        &self.data[i * N_BINS..(i + 1) * N_BINS]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    weights: Vec<f32>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(
        n_mels: usize,
        n_fft: usize,
        rate: u32,
        f_min: f64,
        f_max: f64,
    ) -> Result<Self, SpectrogramError> {
        let nyquist = rate as f64 / 2.0;
        if n_mels == 0 || n_fft < 2 || !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
            return Err(SpectrogramError::Param(format!(
                "n_mels={n_mels} n_fft={n_fft} f_min={f_min} f_max={f_max} rate={rate}"
            )));
        }
        let n_bins = n_fft / 2 + 1;
        let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let step = (mel_hi - mel_lo) / (n_mels + 1) as f64;
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + step * i as f64))
            .collect();
        let bin_hz = rate as f64 / n_fft as f64;

        let mut weights = vec![0.0f32; n_mels * n_bins];
        for m in 0..n_mels {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let row: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f > lo && f <= center {
                        (f - lo) / (center - lo)
                    } else if f > center && f < hi {
                        (hi - f) / (hi - center)
                    } else {
                        0.0
                    }
                })
                .collect();
            let peak = row.iter().cloned().fold(0.0, f64::max);
            if peak <= 0.0 {
                return Err(SpectrogramError::Param(format!(
                    "mel band {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin"
                )));
            }
            for (dst, w) in weights[m * n_bins..(m + 1) * n_bins].iter_mut().zip(&row) {
                *dst = (w / peak) as f32;
            }
        }
        Ok(Self {
            n_mels,
            n_bins,
            weights,
            centers_hz: edges[1..=n_mels].to_vec(),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f32] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn center_hz(&self, m: usize) -> f64 {
        self.centers_hz[m]
    }

    /// Applies the filterbank to one power-spectrum frame.
    pub fn apply(&self, power: &[f32], out: &mut [f32]) {
        debug_assert_eq!(power.len(), self.n_bins);
        for (m, o) in out.iter_mut().enumerate().take(self.n_mels) {
            *o = self.row(m).iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }
}

/// 98×64 log-power matrix, frames major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    values: Vec<f32>,
}

impl MelSpectrogram {
    pub const SHAPE: (usize, usize) = (N_FRAMES, N_MELS);

    pub fn from_values(values: Vec<f32>) -> Result<Self, SpectrogramError> {
        if values.len() != N_FRAMES * N_MELS {
            return Err(SpectrogramError::Shape(format!(
                "expected {} values, got {}",
                N_FRAMES * N_MELS,
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, frame: usize, mel: usize) -> f32 {
        self.values[frame * N_MELS + mel]
    }

    /// Raw little-endian float32, row-major.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self, SpectrogramError> {
        if bytes.len() != N_FRAMES * N_MELS * 4 {
            return Err(SpectrogramError::Shape(format!(
                "expected {} bytes, got {}",
                N_FRAMES * N_MELS * 4,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::from_values(values)
    }
}

/// Reusable STFT + mel front end. Cheap to clone; the FFT plan is shared.
#[derive(Clone)]
pub struct LogMelExtractor {
    window: Vec<f32>,
    fft: Arc<dyn Fft<f32>>,
    filterbank: Arc<MelFilterbank>,
}

impl std::fmt::Debug for LogMelExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMelExtractor").finish_non_exhaustive()
    }
}

impl Default for LogMelExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl LogMelExtractor {
    pub fn new() -> Self {
        let filterbank = MelFilterbank::new(N_MELS, N_FFT, ENGINE_RATE, F_MIN, F_MAX)
            .expect("default filterbank parameters are valid");
        Self {
            window: periodic_hann(WIN_LENGTH),
            fft: FftPlanner::new().plan_fft_forward(N_FFT),
            filterbank: Arc::new(filterbank),
        }
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Power spectrum of every full frame in `samples`.
    pub fn power_frames(&self, samples: &[f32]) -> PowerSpectrogram {
        let n_frames = frame_count(samples.len());
        let mut data = vec![0.0f32; n_frames * N_BINS];
        let mut buf = vec![Complex32::new(0.0, 0.0); N_FFT];
        let mut scratch = vec![Complex32::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for (t, out) in data.chunks_exact_mut(N_BINS).enumerate() {
            let frame = &samples[t * HOP_LENGTH..t * HOP_LENGTH + WIN_LENGTH];
            for (b, (&s, &w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
                *b = Complex32::new(s * w, 0.0);
            }
            buf[WIN_LENGTH..].fill(Complex32::new(0.0, 0.0));
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (o, c) in out.iter_mut().zip(&buf) {
                *o = c.norm_sqr();
            }
        }
        PowerSpectrogram { n_frames, data }
    }

    /// Power spectrum of a one-second 16 kHz clip (98 frames).
    pub fn stft_power(&self, clip: &AudioClip) -> Result<PowerSpectrogram, SpectrogramError> {
        check_window(clip)?;
        Ok(self.power_frames(clip.samples()))
    }

    pub fn log_mel(&self, clip: &AudioClip) -> Result<MelSpectrogram, SpectrogramError> {
        let power = self.stft_power(clip)?;
        let mut values = vec![0.0f32; N_FRAMES * N_MELS];
        for (t, out) in values.chunks_exact_mut(N_MELS).enumerate() {
            self.filterbank.apply(power.frame(t), out);
            for v in out.iter_mut() {
                *v = if *v > POWER_FLOOR { v.ln() } else { LOG_FLOOR };
            }
        }
        MelSpectrogram::from_values(values)
    }
}

fn check_window(clip: &AudioClip) -> Result<(), SpectrogramError> {
    if clip.sample_rate() != ENGINE_RATE || clip.len() != WINDOW_SAMPLES {
        return Err(SpectrogramError::Shape(format!(
            "expected {WINDOW_SAMPLES} samples at {ENGINE_RATE} Hz, got {} at {} Hz",
            clip.len(),
            clip.sample_rate()
        )));
    }
    Ok(())
}

fn periodic_hann(n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            (0.5 - 0.5 * x.cos()) as f32
        })
        .collect()
}

/// Convenience wrapper using a freshly built extractor.
pub fn log_mel(clip: &AudioClip) -> Result<MelSpectrogram, SpectrogramError> {
    LogMelExtractor::new().log_mel(clip)
}
