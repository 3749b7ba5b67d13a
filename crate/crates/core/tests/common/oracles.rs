//! Direct-loop reference kernels, accumulated in f64. Padding is materialized
//! explicitly so the index arithmetic differs from the library kernels.

pub struct Hwc {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f32>,
}

impl Hwc {
    fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.w + x) * self.c + c] as f64
    }
}

/// Pads per the SAME rule: total `max((ceil(n/s)-1)*s + k - n, 0)`, half (floored) in front.
fn pad_same(x: &Hwc, k: usize, s: usize) -> Hwc {
    let total = |n: usize| {
        let need = (n.div_ceil(s) - 1) * s + k;
        need.max(n) - n
    };
    let (th, tw) = (total(x.h), total(x.w));
    let (top, left) = (th / 2, tw / 2);
    let (h, w) = (x.h + th, x.w + tw);
    let mut data = vec![0.0f32; h * w * x.c];
    for y in 0..x.h {
        for xx in 0..x.w {
            for c in 0..x.c {
                data[((y + top) * w + xx + left) * x.c + c] = x.data[(y * x.w + xx) * x.c + c];
            }
        }
    }
    Hwc { h, w, c: x.c, data }
}

fn valid_len(n: usize, k: usize, s: usize) -> usize {
    if n < k {
        0
    } else {
        (n - k) / s + 1
    }
}

/// kernel layout (k, k, cin, cout)
pub fn conv2d(x: &Hwc, kernel: &[f32], k: usize, cout: usize, s: usize, same: bool) -> Hwc {
    let p = if same {
        pad_same(x, k, s)
    } else {
        Hwc {
            h: x.h,
            w: x.w,
            c: x.c,
            data: x.data.clone(),
        }
    };
    let (oh, ow) = (valid_len(p.h, k, s), valid_len(p.w, k, s));
    let mut data = vec![0.0f32; oh * ow * cout];
    for oy in 0..oh {
        for ox in 0..ow {
            for co in 0..cout {
                let mut acc = 0.0f64;
                for ky in 0..k {
                    for kx in 0..k {
                        for ci in 0..x.c {
                            let wv = kernel[((ky * k + kx) * x.c + ci) * cout + co] as f64;
                            acc += p.at(oy * s + ky, ox * s + kx, ci) * wv;
                        }
                    }
                }
                data[(oy * ow + ox) * cout + co] = acc as f32;
            }
        }
    }
    Hwc {
        h: oh,
        w: ow,
        c: cout,
        data,
    }
}

/// kernel layout (k, k, c)
pub fn depthwise(x: &Hwc, kernel: &[f32], k: usize, s: usize, same: bool) -> Hwc {
    let p = if same {
        pad_same(x, k, s)
    } else {
        Hwc {
            h: x.h,
            w: x.w,
            c: x.c,
            data: x.data.clone(),
        }
    };
    let (oh, ow) = (valid_len(p.h, k, s), valid_len(p.w, k, s));
    let mut data = vec![0.0f32; oh * ow * x.c];
    for oy in 0..oh {
        for ox in 0..ow {
            for c in 0..x.c {
                let mut acc = 0.0f64;
                for ky in 0..k {
                    for kx in 0..k {
                        acc += p.at(oy * s + ky, ox * s + kx, c)
                            * kernel[(ky * k + kx) * x.c + c] as f64;
                    }
                }
                data[(oy * ow + ox) * x.c + c] = acc as f32;
            }
        }
    }
    Hwc {
        h: oh,
        w: ow,
        c: x.c,
        data,
    }
}

/// weight layout (n, m)
pub fn dense(x: &[f32], weight: &[f32], bias: &[f32]) -> Vec<f32> {
    let m = bias.len();
    (0..m)
        .map(|j| {
            let mut acc = bias[j] as f64;
            for (i, &v) in x.iter().enumerate() {
                acc += v as f64 * weight[i * m + j] as f64;
            }
            acc as f32
        })
        .collect()
}

pub fn max_pool(x: &Hwc, k: usize, s: usize) -> Hwc {
    let (oh, ow) = (valid_len(x.h, k, s), valid_len(x.w, k, s));
    let mut data = Vec::with_capacity(oh * ow * x.c);
    for oy in 0..oh {
        for ox in 0..ow {
            for c in 0..x.c {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..k {
                    for kx in 0..k {
                        best = best.max(x.at(oy * s + ky, ox * s + kx, c));
                    }
                }
                data.push(best as f32);
            }
        }
    }
    Hwc {
        h: oh,
        w: ow,
        c: x.c,
        data,
    }
}

pub fn global_avg_pool(x: &Hwc) -> Vec<f32> {
    (0..x.c)
        .map(|c| {
            let mut acc = 0.0f64;
            for y in 0..x.h {
                for xx in 0..x.w {
                    acc += x.at(y, xx, c);
                }
            }
            (acc / (x.h * x.w) as f64) as f32
        })
        .collect()
}

/// Largest `|a - b| / max(|b|, 1)` over two equally long slices.
pub fn max_rel_err(actual: &[f32], expected: &[f32]) -> f64 {
    assert_eq!(actual.len(), expected.len(), "length mismatch");
    actual
        .iter()
        .zip(expected)
        .map(|(&a, &b)| (a as f64 - b as f64).abs() / (b as f64).abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Similarity straight from the definition `1 - x⁴ / (τ⁴ + x⁴)`.
pub fn similarity(x: f64, tau: f64) -> f64 {
    1.0 - x.powi(4) / (tau.powi(4) + x.powi(4))
}
