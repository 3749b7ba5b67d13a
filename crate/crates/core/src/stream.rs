//! Streaming detection over 1 s windows advanced by 0.25 s.
//!
//! [`Detector`] is the synchronous core: one window in, zero or more debounced
//! events out. [`run_stream`] drives it from a pull-based [`SampleSource`] on the
//! calling thread and is fully deterministic. [`LiveStream`] splits the work
//! into a capture thread feeding a bounded window queue (oldest window dropped
//! on overflow) and a consumer doing embedding and matching.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Read};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::audio::{self, AudioClip, AudioError, ENGINE_RATE};
use crate::embedder::Embedder;
use crate::matcher::{EnrollError, HotwordTemplate, MatchResult};
use crate::nn::NnError;
use crate::spectrogram::{LogMelExtractor, SpectrogramError};

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("invalid stream configuration: {0}")]
    Config(String),
    #[error("audio source failed: {0}")]
    Source(#[from] io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Spectrogram(#[from] SpectrogramError),
    #[error(transparent)]
    Network(#[from] NnError),
}

impl From<EnrollError> for StreamError {
    fn from(e: EnrollError) -> Self {
        match e {
            EnrollError::Audio(e) => Self::Audio(e),
            EnrollError::Spectrogram(e) => Self::Spectrogram(e),
            EnrollError::Network(e) => Self::Network(e),
            EnrollError::Template(e) => Self::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub window_s: f64,
    pub hop_s: f64,
    /// Minimum spacing between two events of the same hotword; 0 disables debouncing.
    pub refractory_s: f64,
    /// Capacity of the live window queue.
    pub queue_capacity: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            hop_s: 0.25,
            refractory_s: 1.0,
            queue_capacity: 8,
        }
    }
}

impl StreamConfig {
    pub fn without_debounce() -> Self {
        Self {
            refractory_s: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        let bad = |m: String| Err(StreamError::Config(m));
        if !(self.window_s > 0.0 && self.hop_s > 0.0) {
            return bad(format!(
                "window {} / hop {} must be positive",
                self.window_s, self.hop_s
            ));
        }
        if self.hop_s > self.window_s {
            return bad(format!(
                "hop {} exceeds window {}",
                self.hop_s, self.window_s
            ));
        }
        if self.refractory_s != 0.0 && self.refractory_s < self.hop_s {
            return bad(format!(
                "refractory {} shorter than hop {}",
                self.refractory_s, self.hop_s
            ));
        }
        if self.queue_capacity == 0 {
            return bad("queue capacity must be at least 1".into());
        }
        if self.window_samples() == 0 || self.hop_samples() == 0 {
            return bad("window or hop shorter than one sample".into());
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        (self.window_s * ENGINE_RATE as f64).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_s * ENGINE_RATE as f64).round() as usize
    }

    fn refractory_samples(&self) -> u64 {
        (self.refractory_s * ENGINE_RATE as f64).round() as u64
    }

    /// Number of full windows in a stream of `n_samples`.
    pub fn window_count(&self, n_samples: usize) -> usize {
        let (w, h) = (self.window_samples(), self.hop_samples());
        if n_samples < w {
            0
        } else {
            (n_samples - w) / h + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub hotword: String,
    /// Window start, seconds from stream start.
    pub t_start: f64,
    pub score: f64,
    pub distance: f64,
}

impl DetectionEvent {
    /// `t_start_s\thotword\tscore\tdistance`.
    pub fn to_line(&self) -> String {
        format!(
            "{:.3}\t{}\t{:.6}\t{:.6}",
            self.t_start, self.hotword, self.score, self.distance
        )
    }
}

/// Per-window embedding + matching against every enrolled template, with debouncing.
#[derive(Debug, Clone)]
pub struct Detector {
    extractor: LogMelExtractor,
    embedder: Arc<Embedder>,
    templates: Vec<HotwordTemplate>,
    cfg: StreamConfig,
    next_window: u64,
    last_event: HashMap<String, u64>,
    last_latency: Duration,
}

impl Detector {
    pub fn new(
        embedder: Arc<Embedder>,
        templates: Vec<HotwordTemplate>,
        cfg: StreamConfig,
    ) -> Result<Self, StreamError> {
        cfg.validate()?;
        Ok(Self {
            extractor: LogMelExtractor::new(),
            embedder,
            templates,
            cfg,
            next_window: 0,
            last_event: HashMap::new(),
            last_latency: Duration::ZERO,
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.cfg
    }

    pub fn templates(&self) -> &[HotwordTemplate] {
        &self.templates
    }

    /// Compute time of the most recent window.
    pub fn last_latency(&self) -> Duration {
        self.last_latency
    }

    pub fn reset(&mut self) {
        self.next_window = 0;
        self.last_event.clear();
    }

    /// Match results for one window against every template, without debouncing.
    pub fn score(&self, window: &AudioClip) -> Result<Vec<MatchResult>, StreamError> {
        let window = audio::prepare_window(window)?;
        let spec = self.extractor.log_mel(&window)?;
        let e = self.embedder.embed(&spec)?;
        Ok(self
            .templates
            .iter()
            .map(|t| t.match_embedding(&e))
            .collect())
    }

    /// Processes the next window in sequence.
    pub fn step(&mut self, window: &AudioClip) -> Result<Vec<DetectionEvent>, StreamError> {
        let index = self.next_window;
        self.step_at(index, window)
    }

    /// Processes window number `index` (its start is `index · hop`). Indices must increase.
    pub fn step_at(
        &mut self,
        index: u64,
        window: &AudioClip,
    ) -> Result<Vec<DetectionEvent>, StreamError> {
        let started = Instant::now();
        let results = self.score(window)?;
        self.last_latency = started.elapsed();
        self.next_window = index + 1;

        let hop = self.cfg.hop_samples() as u64;
        let start = index * hop;
        let refractory = self.cfg.refractory_samples();
        let mut events = Vec::new();
        for (t, r) in self.templates.iter().zip(results) {
            if !r.accepted {
                continue;
            }
            if let Some(&prev) = self.last_event.get(t.name()) {
                if start.saturating_sub(prev) < refractory {
                    continue;
                }
            }
            self.last_event.insert(t.name().to_string(), start);
            events.push(DetectionEvent {
                hotword: t.name().to_string(),
                t_start: start as f64 / ENGINE_RATE as f64,
                score: r.score,
                distance: r.distance,
            });
        }
        Ok(events)
    }
}

/// A pull-based provider of 16 kHz mono samples.
pub trait SampleSource {
    /// Fills `buf` and returns the number of samples written; 0 means end of stream.
    fn read(&mut self, buf: &mut [f32]) -> io::Result<usize>;
}

/// Serves an in-memory clip, resampled to 16 kHz.
#[derive(Debug, Clone)]
pub struct ClipSource {
    samples: Vec<f32>,
    pos: usize,
}

impl ClipSource {
    pub fn new(clip: &AudioClip) -> Result<Self, AudioError> {
        Ok(Self {
            samples: audio::resample(clip, ENGINE_RATE)?.into_samples(),
            pos: 0,
        })
    }
}

impl SampleSource for ClipSource {
    fn read(&mut self, buf: &mut [f32]) -> io::Result<usize> {
        let n = buf.len().min(self.samples.len() - self.pos);
        buf[..n].copy_from_slice(&self.samples[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// Raw signed 16-bit little-endian mono PCM at 16 kHz from any reader (stdin, a pipe).
pub struct Pcm16Source<R> {
    reader: R,
    bytes: Vec<u8>,
    carry: Option<u8>,
}

impl<R: Read> Pcm16Source<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            bytes: Vec::new(),
            carry: None,
        }
    }
}

impl<R: Read> SampleSource for Pcm16Source<R> {
    fn read(&mut self, buf: &mut [f32]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        self.bytes.clear();
        self.bytes.extend(self.carry.take());
        let want = buf.len() * 2;
        let mut chunk = vec![0u8; want - self.bytes.len()];
        loop {
            let n = match self.reader.read(&mut chunk) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            };
            self.bytes.extend_from_slice(&chunk[..n]);
            if n == 0 || self.bytes.len() >= 2 {
                break;
            }
        }
        if self.bytes.len() % 2 == 1 {
            self.carry = self.bytes.pop();
        }
        let n = self.bytes.len() / 2;
        for (dst, pair) in buf.iter_mut().zip(self.bytes.chunks_exact(2)) {
            *dst = i16::from_le_bytes([pair[0], pair[1]]) as f32 / 32768.0;
        }
        Ok(n)
    }
}

/// Turns a sample stream into overlapping windows.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    window: usize,
    hop: usize,
    buf: VecDeque<f32>,
    emitted: u64,
}

impl SlidingWindow {
    pub fn new(window: usize, hop: usize) -> Self {
        assert!(hop > 0 && hop <= window, "hop must be in 1..=window");
        Self {
            window,
            hop,
            buf: VecDeque::with_capacity(window + hop),
            emitted: 0,
        }
    }

    /// Appends samples and calls `emit(index, window)` for every window completed.
    pub fn push(&mut self, samples: &[f32], mut emit: impl FnMut(u64, Vec<f32>)) {
        for chunk in samples.chunks(self.hop) {
            self.buf.extend(chunk);
            while self.buf.len() >= self.window {
                let w: Vec<f32> = self.buf.range(..self.window).copied().collect();
                emit(self.emitted, w);
                self.emitted += 1;
                self.buf.drain(..self.hop);
            }
        }
    }

    pub fn windows_emitted(&self) -> u64 {
        self.emitted
    }
}

const READ_CHUNK: usize = 1024;

/// Deterministic, single-threaded detection over a source.
pub struct StreamRunner<S> {
    source: S,
    detector: Detector,
    windows: SlidingWindow,
    pending: VecDeque<DetectionEvent>,
    failure: Option<StreamError>,
    done: bool,
    buf: Vec<f32>,
}

pub fn run_stream<S: SampleSource>(source: S, detector: Detector) -> StreamRunner<S> {
    let cfg = detector.config().clone();
    StreamRunner {
        source,
        windows: SlidingWindow::new(cfg.window_samples(), cfg.hop_samples()),
        detector,
        pending: VecDeque::new(),
        failure: None,
        done: false,
        buf: vec![0.0; READ_CHUNK],
    }
}

impl<S: SampleSource> StreamRunner<S> {
    pub fn windows_processed(&self) -> u64 {
        self.windows.windows_emitted()
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    fn pump(&mut self) {
        let n = match self.source.read(&mut self.buf) {
            Ok(0) => {
                self.done = true;
                return;
            }
            Ok(n) => n,
            Err(e) => {
                self.failure = Some(e.into());
                self.done = true;
                return;
            }
        };
        let mut ready = Vec::new();
        self.windows.push(&self.buf[..n], |i, w| ready.push((i, w)));
        for (i, w) in ready {
            match self.detector.step_at(i, &AudioClip::new(w, ENGINE_RATE)) {
                Ok(events) => self.pending.extend(events),
                Err(e) => {
                    self.failure = Some(e);
                    self.done = true;
                    return;
                }
            }
        }
    }
}

impl<S: SampleSource> Iterator for StreamRunner<S> {
    type Item = Result<DetectionEvent, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(ev) = self.pending.pop_front() {
                return Some(Ok(ev));
            }
            if self.done {
                return self.failure.take().map(Err);
            }
            self.pump();
        }
    }
}

#[derive(Debug)]
struct QueueState {
    items: VecDeque<(u64, Vec<f32>)>,
    closed: bool,
    dropped: u64,
    error: Option<io::Error>,
}

/// Bounded window queue; pushing into a full queue evicts the oldest window.
#[derive(Debug)]
pub struct WindowQueue {
    capacity: usize,
    state: Mutex<QueueState>,
    ready: Condvar,
}

impl WindowQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            state: Mutex::new(QueueState {
                items: VecDeque::with_capacity(capacity),
                closed: false,
                dropped: 0,
                error: None,
            }),
            ready: Condvar::new(),
        }
    }

    /// Never blocks beyond the lock.
    pub fn push(&self, index: u64, window: Vec<f32>) {
        let mut s = self.state.lock().expect("queue lock");
        if s.items.len() == self.capacity {
            s.items.pop_front();
            s.dropped += 1;
        }
        s.items.push_back((index, window));
        self.ready.notify_one();
    }

    pub fn close(&self, error: Option<io::Error>) {
        let mut s = self.state.lock().expect("queue lock");
        s.closed = true;
        if s.error.is_none() {
            s.error = error;
        }
        self.ready.notify_all();
    }

    /// Blocks until a window is available. `Ok(None)` once closed and drained.
    pub fn pop(&self) -> Result<Option<(u64, Vec<f32>)>, io::Error> {
        let mut s = self.state.lock().expect("queue lock");
        loop {
            if let Some(item) = s.items.pop_front() {
                return Ok(Some(item));
            }
            if s.closed {
                return match s.error.take() {
                    Some(e) => Err(e),
                    None => Ok(None),
                };
            }
            s = self.ready.wait(s).expect("queue lock");
        }
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("queue lock").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.state.lock().expect("queue lock").dropped
    }
}

/// Capture thread + consumer over a live source.
pub struct LiveStream {
    queue: Arc<WindowQueue>,
    producer: Option<JoinHandle<()>>,
    detector: Detector,
    pending: VecDeque<DetectionEvent>,
    finished: bool,
}

impl LiveStream {
    pub fn spawn<S: SampleSource + Send + 'static>(mut source: S, detector: Detector) -> Self {
        let cfg = detector.config().clone();
        let queue = Arc::new(WindowQueue::new(cfg.queue_capacity));
        let q = Arc::clone(&queue);
        let producer = std::thread::spawn(move || {
            let mut windows = SlidingWindow::new(cfg.window_samples(), cfg.hop_samples());
            let mut buf = vec![0.0f32; READ_CHUNK];
            loop {
                match source.read(&mut buf) {
                    Ok(0) => break q.close(None),
                    Ok(n) => windows.push(&buf[..n], |i, w| q.push(i, w)),
                    Err(e) => break q.close(Some(e)),
                }
            }
        });
        Self {
            queue,
            producer: Some(producer),
            detector,
            pending: VecDeque::new(),
            finished: false,
        }
    }

    pub fn dropped_windows(&self) -> u64 {
        self.queue.dropped()
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    fn join_producer(&mut self) {
        if let Some(h) = self.producer.take() {
            let _ = h.join();
        }
    }
}

impl Iterator for LiveStream {
    type Item = Result<DetectionEvent, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(ev) = self.pending.pop_front() {
                return Some(Ok(ev));
            }
            if self.finished {
                return None;
            }
            match self.queue.pop() {
                Ok(Some((index, w))) => {
                    match self
                        .detector
                        .step_at(index, &AudioClip::new(w, ENGINE_RATE))
                    {
                        Ok(events) => self.pending.extend(events),
                        Err(e) => {
                            self.finished = true;
                            self.queue.close(None);
                            return Some(Err(e));
                        }
                    }
                }
                Ok(None) => {
                    self.finished = true;
                    self.join_producer();
                }
                Err(e) => {
                    self.finished = true;
                    self.join_producer();
                    return Some(Err(e.into()));
                }
            }
        }
    }
}
