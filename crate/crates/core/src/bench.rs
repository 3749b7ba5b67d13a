//! False-rejection / false-acceptance benchmarking.
//!
//! FRR is the fraction of positive clips in which no window reaches the
//! cutoff. FAR is the number of accepted events on hotword-free background
//! audio divided by its length in hours; with debouncing on, events follow the
//! same refractory rule as the live detector, with it off every accepted
//! window counts.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::audio::{self, AudioClip, ENGINE_RATE};
use crate::embedder::Embedder;
use crate::matcher::{embed_clip, HotwordTemplate};
use crate::spectrogram::LogMelExtractor;
use crate::stream::{StreamConfig, StreamError};

pub const CSV_HEADER: &str = "cutoff,frr,far_per_hour,n_positives,background_hours";
pub const MIN_BACKGROUND_S: f64 = 60.0;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no positive clips")]
    NoPositives,
    #[error("background audio is {0:.1} s; at least {MIN_BACKGROUND_S} s required")]
    BackgroundTooShort(f64),
    #[error("invalid cutoff {0}")]
    Cutoff(f64),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// `rejected / total`.
pub fn frr(rejected: usize, total: usize) -> f64 {
    rejected as f64 / total as f64
}

/// Accepted events per hour of background audio.
pub fn far_per_hour(accepts: usize, duration_s: f64) -> f64 {
    accepts as f64 / (duration_s / 3600.0)
}

/// Counts events in a per-window score sequence, applying the refractory rule of `cfg`.
pub fn count_events(scores: &[f64], cutoff: f64, cfg: &StreamConfig) -> usize {
    let hop = cfg.hop_samples() as u64;
    let refractory = (cfg.refractory_s * ENGINE_RATE as f64).round() as u64;
    let mut last: Option<u64> = None;
    let mut events = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s < cutoff {
            continue;
        }
        let start = k as u64 * hop;
        if last.is_some_and(|prev| start.saturating_sub(prev) < refractory) {
            continue;
        }
        last = Some(start);
        events += 1;
    }
    events
}

pub fn default_cutoffs() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

fn check_cutoff(c: f64) -> Result<(), BenchError> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(BenchError::Cutoff(c))
    }
}

/// Scores every window of a clip against one template.
#[derive(Debug, Clone)]
pub struct WindowScorer<'a> {
    extractor: LogMelExtractor,
    embedder: &'a Embedder,
    template: &'a HotwordTemplate,
    cfg: StreamConfig,
    windows: u64,
    compute: Duration,
}

impl<'a> WindowScorer<'a> {
    pub fn new(
        embedder: &'a Embedder,
        template: &'a HotwordTemplate,
        cfg: StreamConfig,
    ) -> Result<Self, BenchError> {
        cfg.validate()?;
        Ok(Self {
            extractor: LogMelExtractor::new(),
            embedder,
            template,
            cfg,
            windows: 0,
            compute: Duration::ZERO,
        })
    }

    fn score_window(&mut self, window: &AudioClip) -> Result<f64, BenchError> {
        let started = Instant::now();
        let e = embed_clip(window, &self.extractor, self.embedder).map_err(StreamError::from)?;
        let score = self.template.match_with_cutoff(&e, 1.0).score;
        self.compute += started.elapsed();
        self.windows += 1;
        Ok(score)
    }

    /// Scores of the stream windows `[k·hop, k·hop + window)` of a long recording.
    pub fn stream_scores(&mut self, clip: &AudioClip) -> Result<Vec<f64>, BenchError> {
        let clip = audio::resample(clip, ENGINE_RATE).map_err(StreamError::from)?;
        let (w, hop) = (self.cfg.window_samples(), self.cfg.hop_samples());
        (0..self.cfg.window_count(clip.len()))
            .map(|k| {
                let window = clip.samples()[k * hop..k * hop + w].to_vec();
                self.score_window(&AudioClip::new(window, ENGINE_RATE))
            })
            .collect()
    }

    /// Best score over a positive clip. Clips up to one window long are
    /// centered in a single window; longer clips are scanned with the stream
    /// hop plus one window flush with the end.
    pub fn clip_max_score(&mut self, clip: &AudioClip) -> Result<f64, BenchError> {
        let clip = audio::resample(clip, ENGINE_RATE).map_err(StreamError::from)?;
        let w = self.cfg.window_samples();
        if clip.len() <= w {
            return self.score_window(&audio::fit_window(&clip, self.cfg.window_s));
        }
        let mut best = self
            .stream_scores(&clip)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if !(clip.len() - w).is_multiple_of(self.cfg.hop_samples()) {
            let tail = AudioClip::new(clip.samples()[clip.len() - w..].to_vec(), ENGINE_RATE);
            best = best.max(self.score_window(&tail)?);
        }
        Ok(best)
    }

    pub fn windows_scored(&self) -> u64 {
        self.windows
    }

    pub fn mean_window_time(&self) -> Duration {
        if self.windows == 0 {
            Duration::ZERO
        } else {
            self.compute / self.windows as u32
        }
    }
}

pub fn measure_frr(
    positives: &[AudioClip],
    template: &HotwordTemplate,
    embedder: &Embedder,
    cutoff: f64,
) -> Result<f64, BenchError> {
    check_cutoff(cutoff)?;
    if positives.is_empty() {
        return Err(BenchError::NoPositives);
    }
    let mut scorer = WindowScorer::new(embedder, template, StreamConfig::default())?;
    let mut rejected = 0;
    for clip in positives {
        if scorer.clip_max_score(clip)? < cutoff {
            rejected += 1;
        }
    }
    Ok(frr(rejected, positives.len()))
}

pub fn measure_far(
    background: &AudioClip,
    template: &HotwordTemplate,
    embedder: &Embedder,
    cutoff: f64,
    cfg: &StreamConfig,
) -> Result<f64, BenchError> {
    check_cutoff(cutoff)?;
    let duration = background.duration_s();
    if duration < MIN_BACKGROUND_S {
        return Err(BenchError::BackgroundTooShort(duration));
    }
    let mut scorer = WindowScorer::new(embedder, template, cfg.clone())?;
    let scores = scorer.stream_scores(background)?;
    Ok(far_per_hour(count_events(&scores, cutoff, cfg), duration))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub cutoff: f64,
    pub frr: f64,
    pub far_per_hour: f64,
    pub n_positives: usize,
    pub background_hours: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Mean wall time of one window (front end + network + match).
    pub mean_window_time: Duration,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.cutoff, r.frr, r.far_per_hour, r.n_positives, r.background_hours
            );
        }
        out
    }
}

/// Evaluates FRR and FAR at each cutoff. Scores are computed once and re-thresholded.
pub fn sweep(
    positives: &[AudioClip],
    background: &AudioClip,
    template: &HotwordTemplate,
    embedder: &Embedder,
    cutoffs: &[f64],
    cfg: &StreamConfig,
) -> Result<BenchReport, BenchError> {
    if positives.is_empty() {
        return Err(BenchError::NoPositives);
    }
    for &c in cutoffs {
        check_cutoff(c)?;
    }
    let duration = background.duration_s();
    if duration < MIN_BACKGROUND_S {
        return Err(BenchError::BackgroundTooShort(duration));
    }
    let mut scorer = WindowScorer::new(embedder, template, cfg.clone())?;
    let positive_best = positives
        .iter()
        .map(|c| scorer.clip_max_score(c))
        .collect::<Result<Vec<_>, _>>()?;
    let background_scores = scorer.stream_scores(background)?;
    let rows = cutoffs
        .iter()
        .map(|&cutoff| {
            let rejected = positive_best.iter().filter(|&&s| s < cutoff).count();
            BenchRow {
                cutoff,
                frr: frr(rejected, positives.len()),
                far_per_hour: far_per_hour(count_events(&background_scores, cutoff, cfg), duration),
                n_positives: positives.len(),
                background_hours: duration / 3600.0,
            }
        })
        .collect();
    Ok(BenchReport {
        rows,
        mean_window_time: scorer.mean_window_time(),
    })
}

/// Confirms the sweep's monotonicity properties: as the cutoff decreases FRR
/// never rises, and without debouncing FAR never falls.
pub fn check_monotone(report: &BenchReport, debounced: bool) -> Result<(), String> {
    let mut rows: Vec<&BenchRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| b.cutoff.total_cmp(&a.cutoff));
    for pair in rows.windows(2) {
        let (hi, lo) = (pair[0], pair[1]);
        if lo.frr > hi.frr {
            return Err(format!(
                "FRR rose from {} to {} as cutoff fell {} -> {}",
                hi.frr, lo.frr, hi.cutoff, lo.cutoff
            ));
        }
        if !debounced && lo.far_per_hour < hi.far_per_hour {
            return Err(format!(
                "FAR fell from {} to {} as cutoff fell {} -> {}",
                hi.far_per_hour, lo.far_per_hour, hi.cutoff, lo.cutoff
            ));
        }
    }
    Ok(())
}
