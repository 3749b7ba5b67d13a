#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use hotword_core::audio::{self, AudioClip, ENGINE_RATE};
use hotword_core::{Embedder, ModelWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed of the random-weights fixture used across integration tests.
pub const FIXTURE_SEED: u64 = 0;

pub fn fixture_embedder() -> Arc<Embedder> {
    Arc::new(Embedder::new(ModelWeights::random(FIXTURE_SEED)))
}

/// Uniform white noise in `[-amp, amp)`.
pub fn noise(len: usize, amp: f32, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioClip::new(
        (0..len).map(|_| rng.random_range(-amp..amp)).collect(),
        ENGINE_RATE,
    )
}

/// Overwrites `background` with `clip` starting at `at_s` seconds.
pub fn splice(background: &AudioClip, clip: &AudioClip, at_s: f64) -> AudioClip {
    let mut out = background.clone();
    let at = (at_s * ENGINE_RATE as f64).round() as usize;
    out.samples_mut()[at..at + clip.len()].copy_from_slice(clip.samples());
    out
}

pub fn hotword_clip() -> AudioClip {
    audio::tone_word("alexa", ENGINE_RATE)
}

/// Worst relative error per kernel over `cases` random shapes.
#[derive(Debug, Default)]
pub struct KernelErrors {
    pub cases: usize,
    pub conv2d: f64,
    pub depthwise: f64,
    pub dense: f64,
    pub max_pool: f64,
    pub avg_pool: f64,
}

impl KernelErrors {
    pub fn worst(&self) -> f64 {
        [
            self.conv2d,
            self.depthwise,
            self.dense,
            self.max_pool,
            self.avg_pool,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn run_kernel_oracles(seed: u64, cases: usize) -> KernelErrors {
    use hotword_core::nn::{self, Padding, Tensor};
    use oracles::Hwc;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = KernelErrors {
        cases,
        ..Default::default()
    };
    let vals = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f32> {
        (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()
    };
    for _ in 0..cases {
        let h = rng.random_range(1..=12);
        let w = rng.random_range(1..=12);
        let cin = rng.random_range(1..=6);
        let cout = rng.random_range(1..=6);
        let k = [1, 3, 5][rng.random_range(0..3)];
        let s = rng.random_range(1..=3);
        let same = rng.random_bool(0.5) || h < k || w < k;
        let padding = if same { Padding::Same } else { Padding::Valid };
        let x = vals(&mut rng, h * w * cin);
        let xt = Tensor::new(vec![h, w, cin], x.clone()).unwrap();
        let xo = Hwc {
            h,
            w,
            c: cin,
            data: x,
        };

        let kern = vals(&mut rng, k * k * cin * cout);
        let got = nn::conv2d(
            &xt,
            &Tensor::new(vec![k, k, cin, cout], kern.clone()).unwrap(),
            None,
            s,
            padding,
        )
        .unwrap();
        let want = oracles::conv2d(&xo, &kern, k, cout, s, same);
        assert_eq!(got.shape(), &[want.h, want.w, want.c], "conv2d shape");
        errs.conv2d = errs
            .conv2d
            .max(oracles::max_rel_err(got.data(), &want.data));

        let dk = vals(&mut rng, k * k * cin);
        let got = nn::depthwise_conv2d(
            &xt,
            &Tensor::new(vec![k, k, cin], dk.clone()).unwrap(),
            s,
            padding,
        )
        .unwrap();
        let want = oracles::depthwise(&xo, &dk, k, s, same);
        assert_eq!(got.shape(), &[want.h, want.w, want.c], "depthwise shape");
        errs.depthwise = errs
            .depthwise
            .max(oracles::max_rel_err(got.data(), &want.data));

        let n = h * w * cin;
        let m = rng.random_range(1..=40);
        let dw = vals(&mut rng, n * m);
        let db = vals(&mut rng, m);
        let got = nn::dense(
            &Tensor::vector(xo.data.clone()),
            &Tensor::new(vec![n, m], dw.clone()).unwrap(),
            &db,
        )
        .unwrap();
        errs.dense = errs.dense.max(oracles::max_rel_err(
            got.data(),
            &oracles::dense(&xo.data, &dw, &db),
        ));

        if h >= 2 && w >= 2 {
            let got = nn::max_pool2d(&xt, 2, 2).unwrap();
            let want = oracles::max_pool(&xo, 2, 2);
            assert_eq!(got.shape(), &[want.h, want.w, want.c], "max_pool shape");
            errs.max_pool = errs
                .max_pool
                .max(oracles::max_rel_err(got.data(), &want.data));
        }
        let got = nn::global_avg_pool(&xt).unwrap();
        errs.avg_pool = errs.avg_pool.max(oracles::max_rel_err(
            got.data(),
            &oracles::global_avg_pool(&xo),
        ));
    }
    errs
}
