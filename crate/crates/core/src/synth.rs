//! Noisy training-set synthesis from clean word recordings and background noise clips.
//!
//! Every output variant is a one-second, 16 kHz clip of a word mixed with a
//! randomly chosen noise clip at a random noise factor. A CSV manifest with
//! header `word,path,noise_path,alpha` describes the output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio::{self, AudioClip, AudioError, ENGINE_RATE};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_HEADER: &str = "word,path,noise_path,alpha";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("invalid synthesis option: {0}")]
    Param(String),
    #[error("{path}: {source}")]
    Audio {
        path: PathBuf,
        #[source]
        source: AudioError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub per_word: usize,
    pub alpha_min: f32,
    pub alpha_max: f32,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            per_word: 5,
            alpha_min: 0.05,
            alpha_max: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub word: String,
    /// Variant path, relative to the output directory.
    pub path: String,
    pub noise_path: String,
    pub alpha: f32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(&r.word),
                csv_field(&r.path),
                csv_field(&r.noise_path),
                r.alpha
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A word and its clean source recordings.
#[derive(Debug, Clone)]
pub struct WordSource {
    pub word: String,
    pub recordings: Vec<AudioClip>,
}

/// Scans `words_dir`. A `name.wav` file is one recording of word `name`; a
/// subdirectory `name/` holds several recordings of the same word.
pub fn load_word_corpus(words_dir: &Path) -> Result<Vec<WordSource>, SynthError> {
    let mut words: BTreeMap<String, Vec<AudioClip>> = BTreeMap::new();
    for entry in sorted_entries(words_dir)? {
        if entry.is_dir() {
            let name = file_stem(&entry);
            for wav in sorted_entries(&entry)?.into_iter().filter(|p| is_wav(p)) {
                words.entry(name.clone()).or_default().push(load(&wav)?);
            }
        } else if is_wav(&entry) {
            words
                .entry(file_stem(&entry))
                .or_default()
                .push(load(&entry)?);
        }
    }
    let words: Vec<WordSource> = words
        .into_iter()
        .filter(|(_, r)| !r.is_empty())
        .map(|(word, recordings)| WordSource { word, recordings })
        .collect();
    if words.is_empty() {
        return Err(SynthError::EmptyCorpus(format!(
            "no word recordings in {}",
            words_dir.display()
        )));
    }
    Ok(words)
}

/// Tone-synthesized stand-ins for a list of words.
pub fn tone_corpus<S: AsRef<str>>(words: &[S]) -> Vec<WordSource> {
    words
        .iter()
        .map(|w| WordSource {
            word: w.as_ref().to_string(),
            recordings: vec![audio::tone_word(w.as_ref(), ENGINE_RATE)],
        })
        .collect()
}

pub fn load_noise_dir(noises_dir: &Path) -> Result<Vec<(PathBuf, AudioClip)>, SynthError> {
    let noises = sorted_entries(noises_dir)?
        .into_iter()
        .filter(|p| is_wav(p))
        .map(|p| load(&p).map(|c| (p, c)))
        .collect::<Result<Vec<_>, _>>()?;
    if noises.is_empty() {
        return Err(SynthError::EmptyCorpus(format!(
            "no noise clips in {}",
            noises_dir.display()
        )));
    }
    Ok(noises)
}

/// Generates `per_word` noisy variants of every word into `out_dir` and writes the manifest.
pub fn synth_dataset(
    words: &[WordSource],
    noises: &[(PathBuf, AudioClip)],
    out_dir: &Path,
    opts: &SynthOptions,
) -> Result<Manifest, SynthError> {
    if words.is_empty() {
        return Err(SynthError::EmptyCorpus("no words".into()));
    }
    if noises.is_empty() {
        return Err(SynthError::EmptyCorpus("no noise clips".into()));
    }
    if !(0.0 <= opts.alpha_min && opts.alpha_min <= opts.alpha_max && opts.alpha_max <= 1.0) {
        return Err(SynthError::Param(format!(
            "alpha range [{}, {}]",
            opts.alpha_min, opts.alpha_max
        )));
    }
    std::fs::create_dir_all(out_dir)?;

    let noises: Vec<(String, AudioClip)> = noises
        .iter()
        .map(|(p, c)| {
            audio::resample(c, ENGINE_RATE)
                .map(|c| (p.display().to_string(), c))
                .map_err(|source| SynthError::Audio {
                    path: p.clone(),
                    source,
                })
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut manifest = Manifest::default();
    for word in words {
        for k in 0..opts.per_word {
            let rec = &word.recordings[rng.random_range(0..word.recordings.len())];
            let (noise_path, noise) = &noises[rng.random_range(0..noises.len())];
            let alpha = if opts.alpha_min == opts.alpha_max {
                opts.alpha_min
            } else {
                rng.random_range(opts.alpha_min..=opts.alpha_max)
            };
            let clean = audio::prepare_window(rec).map_err(|source| SynthError::Audio {
                path: PathBuf::from(&word.word),
                source,
            })?;
            let mixed =
                audio::mix_noise(&clean, noise, alpha).map_err(|source| SynthError::Audio {
                    path: PathBuf::from(noise_path),
                    source,
                })?;
            let rel = format!("{}_{k:03}.wav", sanitize(&word.word));
            audio::write_wav(out_dir.join(&rel), &mixed).map_err(|source| SynthError::Audio {
                path: out_dir.join(&rel),
                source,
            })?;
            manifest.rows.push(ManifestRow {
                word: word.word.clone(),
                path: rel,
                noise_path: noise_path.clone(),
                alpha,
            });
        }
    }
    std::fs::write(out_dir.join(MANIFEST_FILE), manifest.to_csv())?;
    Ok(manifest)
}

fn sanitize(word: &str) -> String {
    word.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn load(path: &Path) -> Result<AudioClip, SynthError> {
    audio::read_wav(path).map_err(|source| SynthError::Audio {
        path: path.to_path_buf(),
        source,
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
    let mut entries = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?;
    entries.sort();
    Ok(entries)
}

fn is_wav(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
