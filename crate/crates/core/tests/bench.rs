mod common;

use hotword_core::audio::ENGINE_RATE;
use hotword_core::bench::{self, BenchError, WindowScorer, CSV_HEADER};
use hotword_core::{matcher, Detector, HotwordTemplate, LogMelExtractor, StreamConfig};

fn template() -> HotwordTemplate {
    let emb = common::fixture_embedder();
    matcher::enroll(
        "alexa",
        &[common::hotword_clip()],
        &LogMelExtractor::new(),
        &emb,
    )
    .unwrap()
}

#[test]
fn frr_counts_rejected_clips() {
    let emb = common::fixture_embedder();
    let t = template();
    let hot = common::hotword_clip();
    let mut positives = vec![hot.clone(); 7];
    positives.extend((0..3).map(|s| common::noise(ENGINE_RATE as usize, 0.05, 100 + s)));
    assert_eq!(bench::measure_frr(&positives, &t, &emb, 0.5).unwrap(), 0.3);
    assert_eq!(
        bench::measure_frr(&positives[..7], &t, &emb, 0.5).unwrap(),
        0.0
    );
    assert!(matches!(
        bench::measure_frr(&[], &t, &emb, 0.5),
        Err(BenchError::NoPositives)
    ));
}

#[test]
fn long_positive_clips_are_scanned() {
    let emb = common::fixture_embedder();
    let t = template();
    // 2.1 s long, hotword flush with the end: only the end-aligned window sees it exactly
    let bg = common::noise(33_600, 0.05, 7);
    let clip = common::splice(&bg, &common::hotword_clip(), 1.1);
    let mut scorer = WindowScorer::new(&emb, &t, StreamConfig::default()).unwrap();
    assert!(scorer.clip_max_score(&clip).unwrap() >= 0.999);
}

#[test]
fn far_counts_events_per_hour() {
    let emb = common::fixture_embedder();
    let t = template();
    let bg = common::noise(90 * ENGINE_RATE as usize, 0.05, 21);
    let cfg = StreamConfig::default();
    assert_eq!(bench::measure_far(&bg, &t, &emb, 0.5, &cfg).unwrap(), 0.0);
    let hot = common::hotword_clip();
    let with_two = common::splice(&common::splice(&bg, &hot, 20.0), &hot, 61.5);
    assert_eq!(
        bench::measure_far(&with_two, &t, &emb, 0.5, &cfg).unwrap(),
        80.0
    );

    let short = common::noise(30 * ENGINE_RATE as usize, 0.05, 22);
    assert!(matches!(
        bench::measure_far(&short, &t, &emb, 0.5, &cfg),
        Err(BenchError::BackgroundTooShort(_))
    ));
}

#[test]
fn event_counting_agrees_with_the_detector() {
    let cfg = StreamConfig::default();
    let emb = common::fixture_embedder();
    let t = template();
    let hot = common::hotword_clip();
    let quiet = common::noise(ENGINE_RATE as usize, 0.05, 5);
    let pattern = [
        true, true, false, true, true, true, false, false, true, true, true, true, true,
    ];
    let scores: Vec<f64> = pattern.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let mut d = Detector::new(emb, vec![t], cfg.clone()).unwrap();
    let mut fired = 0;
    for &a in &pattern {
        fired += d.step(if a { &hot } else { &quiet }).unwrap().len();
    }
    assert_eq!(bench::count_events(&scores, 0.5, &cfg), fired);
    assert_eq!(fired, 4);
    assert_eq!(
        bench::count_events(&scores, 0.5, &StreamConfig::without_debounce()),
        10
    );
}

#[test]
fn sweep_is_monotone_without_debounce() {
    let emb = common::fixture_embedder();
    let t = template();
    let hot = common::hotword_clip();
    let mut bg = common::noise(60 * ENGINE_RATE as usize, 0.05, 31);
    bg = common::splice(&bg, &hot, 10.0);
    bg = common::splice(&bg, &hot, 40.1);
    let mut positives = vec![hot.clone(); 3];
    positives.push(common::noise(ENGINE_RATE as usize, 0.3, 32));
    positives.push(common::splice(&common::noise(24_000, 0.05, 33), &hot, 0.3));
    let cfg = StreamConfig::without_debounce();
    let report = bench::sweep(&positives, &bg, &t, &emb, &bench::default_cutoffs(), &cfg).unwrap();
    assert_eq!(report.rows.len(), 19);
    bench::check_monotone(&report, false).unwrap();
    assert!(report.mean_window_time.as_nanos() > 0);

    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 19);
    for pair in rows.windows(2) {
        // rows ascend in cutoff, so FRR may only grow and FAR only shrink
        assert!(pair[0][0] < pair[1][0]);
        assert!(pair[1][1] >= pair[0][1]);
        assert!(pair[1][2] <= pair[0][2]);
    }
}

#[test]
fn monotonicity_violations_are_reported() {
    use hotword_core::bench::{BenchReport, BenchRow};
    let row = |cutoff, frr, far_per_hour| BenchRow {
        cutoff,
        frr,
        far_per_hour,
        n_positives: 10,
        background_hours: 1.0,
    };
    let report = BenchReport {
        rows: vec![row(0.3, 0.5, 2.0), row(0.6, 0.2, 1.0)],
        mean_window_time: Default::default(),
    };
    assert!(bench::check_monotone(&report, false)
        .unwrap_err()
        .contains("FRR"));
    let report = BenchReport {
        rows: vec![row(0.3, 0.1, 1.0), row(0.6, 0.2, 2.0)],
        mean_window_time: Default::default(),
    };
    assert!(bench::check_monotone(&report, false)
        .unwrap_err()
        .contains("FAR"));
    assert!(bench::check_monotone(&report, true).is_ok());
}
