mod common;

use common::oracles;
use hotword_core::embedder::{Embedding, EMBED_DIM};
use hotword_core::matcher::{
    self, similarity_score, HotwordTemplate, TemplateError, TEMPLATE_MAGIC,
};
use hotword_core::LogMelExtractor;
use proptest::prelude::*;

fn unit(values: Vec<f32>) -> Embedding {
    Embedding::normalized(values).unwrap()
}

fn axis(i: usize) -> Embedding {
    let mut v = vec![0.0; EMBED_DIM];
    v[i] = 1.0;
    unit(v)
}

/// A unit vector at exact Euclidean distance `d` from `axis(0)`, built in the plane of axes 0 and 1.
fn at_distance(d: f64) -> Embedding {
    let cos = 1.0 - d * d / 2.0;
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let mut v = vec![0.0f32; EMBED_DIM];
    v[0] = cos as f32;
    v[1] = sin as f32;
    unit(v)
}

fn taus() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

#[test]
fn score_fixed_points() {
    for tau in taus() {
        assert_eq!(similarity_score(0.0, tau), 1.0);
        assert!(
            (similarity_score(tau, tau) - 0.5).abs() <= 1e-9,
            "tau {tau}"
        );
    }
}

#[test]
fn score_matches_the_formula_and_decreases() {
    for tau in taus() {
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 * 2.0 / 999.0).collect();
        let scores: Vec<f64> = grid.iter().map(|&x| similarity_score(x, tau)).collect();
        for (&x, &s) in grid.iter().zip(&scores) {
            assert!(
                (s - oracles::similarity(x, tau)).abs() <= 1e-12,
                "x {x} tau {tau}"
            );
            if x < tau {
                assert!(s > 0.5);
            } else if x > tau {
                assert!(s < 0.5);
            }
        }
        assert!(
            scores.windows(2).all(|p| p[1] < p[0]),
            "not strictly decreasing at tau {tau}"
        );
    }
}

proptest! {
    #[test]
    fn score_stays_in_unit_interval(x in 0.0f64..2.0, tau in 0.01f64..2.0) {
        let s = similarity_score(x, tau);
        prop_assert!((0.0..=1.0).contains(&s));
    }
}

#[test]
fn boundary_distance_is_accepted() {
    let t = HotwordTemplate::new("hey", vec![axis(0)]).unwrap();
    let q = at_distance(0.2);
    let r = t.match_embedding(&q);
    assert!((r.distance - 0.2).abs() < 1e-6);
    // a score equal to the cutoff is accepted
    assert!(t.match_with_cutoff(&q, r.score).accepted);
    let at_tau = HotwordTemplate::with_thresholds("hey", vec![axis(0)], r.distance, 0.5).unwrap();
    let r = at_tau.match_embedding(&q);
    assert_eq!(r.score, 0.5);
    assert!(r.accepted);
    // at the cutoff, acceptance coincides with distance <= tau
    for d in [0.05, 0.15, 0.19, 0.21, 0.3, 1.0] {
        let r = t.match_embedding(&at_distance(d));
        assert_eq!(r.accepted, r.distance <= 0.2, "distance {d}");
    }
}

#[test]
fn nearest_reference_decides() {
    let refs = vec![axis(3), at_distance(0.1), axis(5)];
    let t = HotwordTemplate::new("multi", refs).unwrap();
    let r = t.match_embedding(&axis(0));
    assert!((r.distance - 0.1).abs() < 1e-6);
    assert!(r.accepted);
    assert!((r.score - oracles::similarity(r.distance, 0.2)).abs() < 1e-12);
    let far = t.match_embedding(&axis(9));
    assert!(!far.accepted);
    assert!((far.distance - 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn single_reference_distance_is_symmetric() {
    let a = unit((0..EMBED_DIM).map(|i| (i as f32).sin()).collect());
    let b = unit((0..EMBED_DIM).map(|i| (i as f32 * 0.3).cos()).collect());
    let ta = HotwordTemplate::new("a", vec![a.clone()]).unwrap();
    let tb = HotwordTemplate::new("b", vec![b.clone()]).unwrap();
    assert_eq!(
        ta.match_embedding(&b).distance,
        tb.match_embedding(&a).distance
    );
}

#[test]
fn enrolled_clip_matches_itself() {
    let emb = common::fixture_embedder();
    let ex = LogMelExtractor::new();
    let clip = common::hotword_clip();
    let t = matcher::enroll("alexa", std::slice::from_ref(&clip), &ex, &emb).unwrap();
    let r = t.match_embedding(&matcher::embed_clip(&clip, &ex, &emb).unwrap());
    assert_eq!(r.distance, 0.0);
    assert_eq!(r.score, 1.0);
    assert!(r.accepted);
}

#[test]
fn enrolling_nothing_fails() {
    let emb = common::fixture_embedder();
    assert!(matcher::enroll("x", &[], &LogMelExtractor::new(), &emb).is_err());
}

#[test]
fn template_validation() {
    assert!(matches!(
        HotwordTemplate::new("a\tb", vec![axis(0)]),
        Err(TemplateError::Invalid(_))
    ));
    assert!(matches!(
        HotwordTemplate::new("a", vec![]),
        Err(TemplateError::Invalid(_))
    ));
    assert!(matches!(
        HotwordTemplate::new("a", vec![axis(0); 33]),
        Err(TemplateError::Invalid(_))
    ));
    assert!(HotwordTemplate::with_thresholds("a", vec![axis(0)], 0.0, 0.5).is_err());
    assert!(HotwordTemplate::with_thresholds("a", vec![axis(0)], 0.2, 1.0).is_err());
}

#[test]
fn template_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hey.ewnt");
    let t = HotwordTemplate::with_thresholds("hey", vec![axis(0), at_distance(0.4)], 0.25, 0.6)
        .unwrap();
    t.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let back = HotwordTemplate::load(&path).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_bytes(), bytes);
}

#[test]
fn corrupt_templates_are_rejected() {
    let t = HotwordTemplate::new("hey", vec![axis(0)]).unwrap();
    let good = t.to_bytes();

    let mut bad_magic = good.clone();
    bad_magic[..4].copy_from_slice(b"NOPE");
    assert!(matches!(
        HotwordTemplate::from_bytes(&bad_magic),
        Err(TemplateError::Corrupt(_))
    ));

    let mut bad_version = good.clone();
    bad_version[4..8].copy_from_slice(&7u32.to_le_bytes());
    assert!(matches!(
        HotwordTemplate::from_bytes(&bad_version),
        Err(TemplateError::Version(7))
    ));

    let truncated = &good[..good.len() - 3];
    assert!(matches!(
        HotwordTemplate::from_bytes(truncated),
        Err(TemplateError::Corrupt(_))
    ));

    let mut not_unit = good.clone();
    let n = not_unit.len();
    not_unit[n - 4..].copy_from_slice(&5.0f32.to_le_bytes());
    assert!(matches!(
        HotwordTemplate::from_bytes(&not_unit),
        Err(TemplateError::Corrupt(_))
    ));

    let mut garbled = good;
    garbled[8] = b'[';
    assert!(matches!(
        HotwordTemplate::from_bytes(&garbled),
        Err(TemplateError::Corrupt(_))
    ));
    assert_eq!(TEMPLATE_MAGIC, b"EWNT");
}
