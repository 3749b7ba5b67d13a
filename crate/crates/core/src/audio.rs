//! Audio clips: WAV decoding, resampling, noise mixing and fixed-length windowing.

use std::io::Cursor;

use thiserror::Error;

/// Sample rate the engine runs at.
pub const ENGINE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV data: {0}")]
    Decode(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: u32, right: u32 },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono float samples at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    /// Panics if `sample_rate` is zero.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f32] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    /// Scales the clip down so its peak is 1.0; clips already within range are untouched.
    pub fn normalize_peak(&mut self) {
        let peak = self.peak();
        if peak > 1.0 {
            let inv = 1.0 / peak;
            self.samples.iter_mut().for_each(|s| *s *= inv);
        }
    }
}

/// Decodes a RIFF/WAVE byte stream (PCM-16 or float-32, mono or stereo) into a mono clip.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(AudioError::UnsupportedFormat(format!(
            "{channels} channels"
        )));
    }
    if spec.sample_rate == 0 {
        return Err(AudioError::Decode("zero sample rate".into()));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (format, bits) => {
            return Err(AudioError::UnsupportedFormat(format!(
                "{bits}-bit {format:?}"
            )))
        }
    };

    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(AudioError::Decode("non-finite sample".into()));
    }

    let samples = if channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|frame| (frame[0] + frame[1]) * 0.5)
            .collect()
    } else {
        interleaved
    };
    Ok(AudioClip::new(samples, spec.sample_rate))
}

pub fn read_wav(path: impl AsRef<std::path::Path>) -> Result<AudioClip, AudioError> {
    decode_wav(&std::fs::read(path)?)
}

/// Encodes a clip as mono PCM-16. Samples are clamped to [-1, 1].
pub fn encode_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + clip.len() * 2));
    {
        let mut writer = hound::WavWriter::new(&mut buf, spec).expect("in-memory writer");
        for &s in &clip.samples {
            let v = (s.clamp(-1.0, 1.0) * 32768.0)
                .round()
                .clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(v).expect("in-memory write");
        }
        writer.finalize().expect("in-memory finalize");
    }
    buf.into_inner()
}

pub fn write_wav(path: impl AsRef<std::path::Path>, clip: &AudioClip) -> Result<(), AudioError> {
    std::fs::write(path, encode_wav_pcm16(clip))?;
    Ok(())
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) => AudioError::Decode(e.to_string()),
        hound::Error::Unsupported => AudioError::UnsupportedFormat("codec".into()),
        other => AudioError::Decode(other.to_string()),
    }
}

/// Linear-interpolation resampler.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::Param("target rate must be positive".into()));
    }
    if target_rate == clip.sample_rate || clip.is_empty() {
        return Ok(AudioClip::new(clip.samples.clone(), target_rate));
    }
    let src = &clip.samples;
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let out_len = (src.len() as f64 / ratio).round() as usize;
    let last = src.len() - 1;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let i0 = (pos.floor() as usize).min(last);
            let i1 = (i0 + 1).min(last);
            let frac = (pos - i0 as f64) as f32;
            src[i0] + (src[i1] - src[i0]) * frac
        })
        .collect();
    Ok(AudioClip::new(samples, target_rate))
}

/// Mixes `noise` into `clean` as `(1 - a) * clean + a * noise`.
///
/// The noise is looped or truncated to the clean length. The result is
/// peak-normalized only when the mix exceeds full scale.
pub fn mix_noise(
    clean: &AudioClip,
    noise: &AudioClip,
    noise_factor: f32,
) -> Result<AudioClip, AudioError> {
    if clean.sample_rate != noise.sample_rate {
        return Err(AudioError::RateMismatch {
            left: clean.sample_rate,
            right: noise.sample_rate,
        });
    }
    if !(0.0..=1.0).contains(&noise_factor) {
        return Err(AudioError::Param(format!(
            "noise factor {noise_factor} outside [0, 1]"
        )));
    }
    if noise_factor == 0.0 {
        return Ok(clean.clone());
    }
    if noise.is_empty() {
        return Err(AudioError::Param("empty noise clip".into()));
    }
    let keep = 1.0 - noise_factor;
    let samples = clean
        .samples
        .iter()
        .zip(noise.samples.iter().cycle())
        .map(|(&c, &n)| keep * c + noise_factor * n)
        .collect();
    let mut out = AudioClip::new(samples, clean.sample_rate);
    out.normalize_peak();
    Ok(out)
}

/// Zero-pads (symmetrically) or center-crops a clip to exactly `length_s` seconds.
pub fn fit_window(clip: &AudioClip, length_s: f64) -> AudioClip {
    let target = (length_s * clip.sample_rate as f64).round() as usize;
    let len = clip.len();
    let samples = if len == target {
        clip.samples.clone()
    } else if len < target {
        let before = (target - len) / 2;
        let mut out = vec![0.0; target];
        out[before..before + len].copy_from_slice(&clip.samples);
        out
    } else {
        let start = (len - target) / 2;
        clip.samples[start..start + target].to_vec()
    };
    AudioClip::new(samples, clip.sample_rate)
}

/// Brings an arbitrary clip to the engine's rate and one-second window.
pub fn prepare_window(clip: &AudioClip) -> Result<AudioClip, AudioError> {
    let clip = resample(clip, ENGINE_RATE)?;
    Ok(fit_window(&clip, 1.0))
}

/// Deterministic stand-in for a spoken word: a sequence of short harmonic
/// tones whose pitches are derived from the characters of `word`.
///
/// Used when no recorded word corpus is available.
pub fn tone_word(word: &str, sample_rate: u32) -> AudioClip {
    let syllables: Vec<u32> = word.bytes().map(u32::from).collect();
    let n = syllables.len().max(1);
    // Utterance occupies 0.6 s, centered in a 1 s clip.
    let total = sample_rate as usize;
    let voiced = (0.6 * sample_rate as f64) as usize;
    let offset = (total - voiced) / 2;
    let seg = voiced / n;
    let mut samples = vec![0.0f32; total];
    let mut phase = [0.0f64; 3];
    for (k, &c) in syllables.iter().enumerate() {
        let f0 = 120.0 + ((c * 37 + k as u32 * 11) % 180) as f64;
        let formant = 600.0 + ((c * 53) % 2200) as f64;
        for i in 0..seg {
            let idx = offset + k * seg + i;
            let env = (std::f64::consts::PI * i as f64 / seg as f64).sin();
            let freqs = [f0, 2.0 * f0, formant];
            let amps = [0.5, 0.25, 0.2];
            let mut v = 0.0;
            for h in 0..3 {
                phase[h] += 2.0 * std::f64::consts::PI * freqs[h] / sample_rate as f64;
                v += amps[h] * phase[h].sin();
            }
            samples[idx] = (0.8 * env * v) as f32;
        }
    }
    AudioClip::new(samples, sample_rate)
}
