//! `hotword`: enrollment, detection, benchmarking and dataset tooling.

mod error;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode, Stdio};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use hotword_core::audio::{self, AudioClip};
use hotword_core::bench::{self, BenchReport};
use hotword_core::embedder::Embedding;
use hotword_core::matcher::{self, DEFAULT_TAU};
use hotword_core::spectrogram::MelSpectrogram;
use hotword_core::stream::{run_stream, ClipSource, LiveStream, Pcm16Source, SampleSource};
use hotword_core::synth::{self, SynthOptions, MANIFEST_FILE};
use hotword_core::{
    Detector, Embedder, HotwordTemplate, LogMelExtractor, ModelWeights, StreamConfig,
};

use error::CliError;

/// Cosine similarity an engine embedding must reach against a reference embedding.
const PARITY_COSINE: f64 = 0.9999;

#[derive(Parser)]
#[command(name = "hotword", version, about = "One-shot hotword detection")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a hotword template from one or more reference recordings.
    Enroll {
        #[arg(long)]
        name: String,
        /// Comma-separated WAV files.
        #[arg(long, value_delimiter = ',', required = true)]
        refs: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Scan a WAV file and print one line per detection.
    Detect {
        #[arg(long)]
        wav: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Detect on live audio: `mic` records via `arecord`, `-` reads raw s16le 16 kHz mono from stdin.
    Listen {
        #[arg(long, default_value = "mic")]
        input: String,
        /// Capture device passed to `arecord -D`.
        #[arg(long)]
        device: Option<String>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Sweep cutoffs and write FRR/FAR as CSV.
    Bench {
        /// Directory of positive WAV clips.
        #[arg(long)]
        positives: PathBuf,
        /// Hotword-free background recording.
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Count every accepted window instead of debounced events.
        #[arg(long)]
        no_debounce: bool,
    },
    /// Write the 98x64 log-mel spectrogram of a clip as raw little-endian float32.
    Spectrogram {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed a raw spectrogram; with `--expect`, check it against a reference embedding.
    Embed {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    /// Generate noisy word variants and a manifest.
    Synth {
        /// Directory of word recordings (`word.wav` or `word/*.wav`).
        #[arg(
            long,
            conflicts_with = "tone_words",
            required_unless_present = "tone_words"
        )]
        words: Option<PathBuf>,
        /// Comma-separated words rendered as synthetic tones instead of recordings.
        #[arg(long, value_delimiter = ',')]
        tone_words: Vec<String>,
        #[arg(long)]
        noises: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        per_word: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha_min: f32,
        #[arg(long, default_value_t = 0.2)]
        alpha_max: f32,
    },
    /// Write a randomly initialized, valid weight file.
    InitModel {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long)]
    model: PathBuf,
    /// A template file or a directory of `.ewnt` files.
    #[arg(long)]
    templates: PathBuf,
    /// Overrides the cutoff stored in each template.
    #[arg(long)]
    cutoff: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Enroll {
            name,
            refs,
            model,
            out,
            tau,
            cutoff,
        } => {
            let embedder = load_model(&model)?;
            let clips = refs
                .iter()
                .map(|p| read_wav(p))
                .collect::<Result<Vec<_>, _>>()?;
            let mut t = matcher::enroll(&name, &clips, &LogMelExtractor::new(), &embedder)?;
            t.set_tau(tau).map_err(|e| CliError::Usage(e.to_string()))?;
            if let Some(c) = cutoff {
                t.set_cutoff(c)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            t.save(&out).map_err(|source| CliError::Template {
                path: out.clone(),
                source,
            })?;
            eprintln!(
                "enrolled `{name}` from {} clip(s) -> {}",
                clips.len(),
                out.display()
            );
            Ok(())
        }
        Cmd::Detect { wav, engine } => {
            let clip = read_wav(&wav)?;
            let detector = engine.detector()?;
            let source =
                ClipSource::new(&clip).map_err(|source| CliError::Audio { path: wav, source })?;
            let mut stdout = io::stdout().lock();
            for ev in run_stream(source, detector) {
                print_line(&mut stdout, &ev?.to_line())?;
            }
            Ok(())
        }
        Cmd::Listen {
            input,
            device,
            engine,
        } => {
            let detector = engine.detector()?;
            match input.as_str() {
                "-" => listen(Pcm16Source::new(io::stdin()), detector),
                "mic" => {
                    let mut child = spawn_arecord(device.as_deref())?;
                    let stdout = child.stdout.take().expect("piped stdout");
                    let result = listen(Pcm16Source::new(stdout), detector);
                    let _ = child.kill();
                    let _ = child.wait();
                    result
                }
                other => Err(CliError::Usage(format!(
                    "--input must be `mic` or `-`, got `{other}`"
                ))),
            }
        }
        Cmd::Bench {
            positives,
            background,
            model,
            template,
            out,
            no_debounce,
        } => {
            let embedder = load_model(&model)?;
            let t = load_template(&template)?;
            let clips = wav_files(&positives)?
                .iter()
                .map(|p| read_wav(p))
                .collect::<Result<Vec<_>, _>>()?;
            let bg = read_wav(&background)?;
            let cfg = if no_debounce {
                StreamConfig::without_debounce()
            } else {
                StreamConfig::default()
            };
            let report: BenchReport =
                bench::sweep(&clips, &bg, &t, &embedder, &bench::default_cutoffs(), &cfg)?;
            write_file(&out, report.to_csv().as_bytes())?;
            eprintln!(
                "{} cutoffs -> {}; mean window time {:.2} ms",
                report.rows.len(),
                out.display(),
                report.mean_window_time.as_secs_f64() * 1e3
            );
            Ok(())
        }
        Cmd::Spectrogram { wav, out } => {
            let clip = read_wav(&wav)?;
            let window = audio::prepare_window(&clip)
                .map_err(|source| CliError::Audio { path: wav, source })?;
            let spec = LogMelExtractor::new().log_mel(&window)?;
            write_file(&out, &spec.to_le_bytes())
        }
        Cmd::Embed {
            spec,
            model,
            out,
            expect,
        } => {
            let embedder = load_model(&model)?;
            let spec = MelSpectrogram::from_le_bytes(&read_file(&spec)?)?;
            let e = embedder
                .embed(&spec)
                .map_err(|e| CliError::Data(format!("embedding failed: {e}")))?;
            if let Some(path) = out {
                write_file(&path, &e.to_le_bytes())?;
            }
            if let Some(path) = expect {
                let reference = Embedding::from_le_bytes(&read_file(&path)?)
                    .map_err(|err| CliError::Data(format!("{}: {err}", path.display())))?;
                let cos = e.cosine(&reference);
                println!("cosine {cos:.6}");
                if cos < PARITY_COSINE {
                    return Err(CliError::Data(format!(
                        "cosine {cos:.6} below {PARITY_COSINE}"
                    )));
                }
            }
            Ok(())
        }
        Cmd::Synth {
            words,
            tone_words,
            noises,
            out,
            seed,
            per_word,
            alpha_min,
            alpha_max,
        } => {
            let corpus = match words {
                Some(dir) => synth::load_word_corpus(&dir)?,
                None => synth::tone_corpus(&tone_words),
            };
            let noise = synth::load_noise_dir(&noises)?;
            let opts = SynthOptions {
                per_word,
                alpha_min,
                alpha_max,
                seed,
            };
            let manifest = synth::synth_dataset(&corpus, &noise, &out, &opts)?;
            eprintln!(
                "{} variants -> {}",
                manifest.rows.len(),
                out.join(MANIFEST_FILE).display()
            );
            Ok(())
        }
        Cmd::InitModel { seed, out } => ModelWeights::random(seed)
            .save(&out)
            .map_err(|source| CliError::Weights { path: out, source }),
    }
}

impl EngineArgs {
    fn detector(&self) -> Result<Detector, CliError> {
        let embedder = load_model(&self.model)?;
        let mut templates = load_templates(&self.templates)?;
        if let Some(c) = self.cutoff {
            for t in &mut templates {
                t.set_cutoff(c)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
        Ok(Detector::new(embedder, templates, StreamConfig::default())?)
    }
}

fn listen<S: SampleSource + Send + 'static>(source: S, detector: Detector) -> Result<(), CliError> {
    let mut live = LiveStream::spawn(source, detector);
    let mut stdout = io::stdout().lock();
    for ev in live.by_ref() {
        print_line(&mut stdout, &ev?.to_line())?;
    }
    if live.dropped_windows() > 0 {
        eprintln!(
            "dropped {} window(s): detection fell behind capture",
            live.dropped_windows()
        );
    }
    Ok(())
}

fn spawn_arecord(device: Option<&str>) -> Result<Child, CliError> {
    let mut cmd = Command::new("arecord");
    cmd.args(["-q", "-t", "raw", "-f", "S16_LE", "-r", "16000", "-c", "1"]);
    if let Some(d) = device {
        cmd.args(["-D", d]);
    }
    cmd.stdout(Stdio::piped()).spawn().map_err(|e| {
        CliError::Capture(format!(
            "cannot start `arecord` ({e}); pipe raw audio with `--input -` instead"
        ))
    })
}

fn print_line(out: &mut impl Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}")
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Output {
            path: "<stdout>".into(),
            source,
        })
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn read_wav(path: &Path) -> Result<AudioClip, CliError> {
    audio::decode_wav(&read_file(path)?).map_err(|source| CliError::Audio {
        path: path.to_path_buf(),
        source,
    })
}

fn load_model(path: &Path) -> Result<Arc<Embedder>, CliError> {
    let weights =
        ModelWeights::from_bytes(&read_file(path)?).map_err(|source| CliError::Weights {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(Arc::new(Embedder::new(weights)))
}

fn load_template(path: &Path) -> Result<HotwordTemplate, CliError> {
    HotwordTemplate::from_bytes(&read_file(path)?).map_err(|source| CliError::Template {
        path: path.to_path_buf(),
        source,
    })
}

fn load_templates(path: &Path) -> Result<Vec<HotwordTemplate>, CliError> {
    let files = if path.is_dir() {
        sorted_files(path, "ewnt")?
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "no .ewnt templates in {}",
            path.display()
        )));
    }
    files.iter().map(|p| load_template(p)).collect()
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let files = sorted_files(dir, "wav")?;
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "no .wav files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CliError::Input {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry
            .map_err(|source| CliError::Input {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}
