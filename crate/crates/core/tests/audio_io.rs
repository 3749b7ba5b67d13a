mod common;

use hotword_core::audio::{self, AudioClip, ENGINE_RATE};
use hotword_core::spectrogram::LogMelExtractor;
use hotword_core::synth::{self, SynthOptions, MANIFEST_FILE};
use proptest::prelude::*;

#[test]
fn resampled_sine_keeps_its_peak_bin() {
    let src: Vec<f32> = (0..48_000)
        .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 48_000.0).sin() as f32)
        .collect();
    let down = audio::resample(&AudioClip::new(src, 48_000), ENGINE_RATE).unwrap();
    assert_eq!(down.len(), 16_000);
    let power = LogMelExtractor::new().stft_power(&down).unwrap();
    for t in [0, 49, 97] {
        let f = power.frame(t);
        let argmax = (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
        // 1000 Hz · 512 / 16000
        assert_eq!(argmax, 32);
    }
}

#[test]
fn synth_is_deterministic_under_seed() {
    let words_dir = tempfile::tempdir().unwrap();
    let noises_dir = tempfile::tempdir().unwrap();
    // one word as a single file, one as a directory of two takes
    audio::write_wav(
        words_dir.path().join("alpha.wav"),
        &audio::tone_word("alpha", ENGINE_RATE),
    )
    .unwrap();
    std::fs::create_dir(words_dir.path().join("bravo")).unwrap();
    for (i, w) in ["bravo", "brav0"].iter().enumerate() {
        let clip = audio::resample(&audio::tone_word(w, ENGINE_RATE), 22_050).unwrap();
        audio::write_wav(
            words_dir.path().join("bravo").join(format!("take{i}.wav")),
            &clip,
        )
        .unwrap();
    }
    audio::write_wav(
        words_dir.path().join("charlie.wav"),
        &audio::tone_word("charlie", ENGINE_RATE),
    )
    .unwrap();
    audio::write_wav(
        noises_dir.path().join("street.wav"),
        &common::noise(24_000, 0.6, 1),
    )
    .unwrap();
    audio::write_wav(
        noises_dir.path().join("office.wav"),
        &common::noise(8_000, 0.3, 2),
    )
    .unwrap();

    let words = synth::load_word_corpus(words_dir.path()).unwrap();
    assert_eq!(
        words.iter().map(|w| w.word.as_str()).collect::<Vec<_>>(),
        ["alpha", "bravo", "charlie"]
    );
    assert_eq!(words[1].recordings.len(), 2);
    let noises = synth::load_noise_dir(noises_dir.path()).unwrap();

    let opts = SynthOptions {
        seed: 42,
        ..SynthOptions::default()
    };
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    let ma = synth::synth_dataset(&words, &noises, out_a.path(), &opts).unwrap();
    let mb = synth::synth_dataset(&words, &noises, out_b.path(), &opts).unwrap();
    assert_eq!(ma.rows.len(), 15);
    let csv_a = std::fs::read(out_a.path().join(MANIFEST_FILE)).unwrap();
    let csv_b = std::fs::read(out_b.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(ma, mb);
    for row in &ma.rows {
        assert!((0.05..=0.2).contains(&row.alpha));
        let a = std::fs::read(out_a.path().join(&row.path)).unwrap();
        assert_eq!(a, std::fs::read(out_b.path().join(&row.path)).unwrap());
        let clip = audio::decode_wav(&a).unwrap();
        assert_eq!((clip.len(), clip.sample_rate()), (16_000, ENGINE_RATE));
    }

    let other = synth::synth_dataset(
        &words,
        &noises,
        out_b.path(),
        &SynthOptions { seed: 43, ..opts },
    )
    .unwrap();
    assert_ne!(other, ma);
}

proptest! {
    #[test]
    fn pcm16_round_trip_within_one_step(samples in prop::collection::vec(-1.0f32..=1.0, 1..2000)) {
        let clip = AudioClip::new(samples, ENGINE_RATE);
        let once = audio::decode_wav(&audio::encode_wav_pcm16(&clip)).unwrap();
        let twice = audio::decode_wav(&audio::encode_wav_pcm16(&once)).unwrap();
        for ((a, b), c) in clip.samples().iter().zip(once.samples()).zip(twice.samples()) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            prop_assert_eq!(b, c);
        }
    }

    #[test]
    fn resample_preserves_duration(len in 1usize..5000, src in prop::sample::select(vec![8000u32, 11025, 22050, 44100, 48000]), dst in prop::sample::select(vec![8000u32, 16000, 44100])) {
        let clip = AudioClip::new(vec![0.1; len], src);
        let out = audio::resample(&clip, dst).unwrap();
        prop_assert!((out.duration_s() - clip.duration_s()).abs() <= 1.0 / dst as f64);
    }

    #[test]
    fn mix_is_convex(clean in prop::collection::vec(-1.0f32..=1.0, 1..500), noise in prop::collection::vec(-1.0f32..=1.0, 1..500), alpha in 0.0f32..=1.0) {
        let c = AudioClip::new(clean, ENGINE_RATE);
        let n = AudioClip::new(noise, ENGINE_RATE);
        let out = audio::mix_noise(&c, &n, alpha).unwrap();
        prop_assert_eq!(out.len(), c.len());
        let bound = ((1.0 - alpha) * c.peak() + alpha * n.peak()).min(1.0);
        prop_assert!(out.peak() <= bound + 1e-6);
    }

    #[test]
    fn fit_window_is_exactly_one_second(len in 1usize..40_000) {
        let out = audio::fit_window(&AudioClip::new(vec![0.2; len], ENGINE_RATE), 1.0);
        prop_assert_eq!(out.len(), 16_000);
    }
}
