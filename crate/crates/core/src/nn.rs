//! Inference-only float32 kernels over HWC tensors.
//!
//! Layouts follow the TensorFlow conventions: activations are `(H, W, C)`
//! row-major, convolution kernels are `(k, k, C_in, C_out)`, depthwise
//! kernels are `(k, k, C)` and dense weights are `(N, M)`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

fn shape_err<T>(msg: impl Into<String>) -> Result<T, NnError> {
    Err(NnError::Shape(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return shape_err(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: Vec<usize>, value: f32) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn vector(data: Vec<f32>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(H, W, C)` of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize), NnError> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => shape_err(format!("expected rank-3 HWC tensor, got {:?}", self.shape)),
        }
    }

    /// Reinterprets the data with a new shape of equal size.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self, NnError> {
        Self::new(shape, self.data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

impl Padding {
    pub fn as_str(self) -> &'static str {
        match self {
            Padding::Same => "same",
            Padding::Valid => "valid",
        }
    }
}

/// Output length and leading pad along one axis.
///
/// SAME pads `max((ceil(n/s) - 1) * s + k - n, 0)` in total with the odd
/// element at the end.
pub fn conv_out_dim(n: usize, k: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => {
            let out = n.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(n);
            (out, total / 2)
        }
        Padding::Valid => {
            if n < k {
                (0, 0)
            } else {
                ((n - k) / stride + 1, 0)
            }
        }
    }
}

fn check_conv_params(k: usize, stride: usize) -> Result<(), NnError> {
    if k == 0 || stride == 0 {
        return shape_err(format!("kernel {k} / stride {stride} must be positive"));
    }
    Ok(())
}

pub fn conv2d(
    x: &Tensor,
    kernel: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor, NnError> {
    let (h, w, cin) = x.dims3()?;
    let (k, cout) = match kernel.shape[..] {
        [kh, kw, ci, co] if kh == kw && ci == cin => (kh, co),
        _ => {
            return shape_err(format!(
                "kernel {:?} incompatible with input {:?}",
                kernel.shape, x.shape
            ))
        }
    };
    check_conv_params(k, stride)?;
    if let Some(b) = bias {
        if b.len() != cout {
            return shape_err(format!("bias len {} != {cout}", b.len()));
        }
    }
    let (oh, pad_top) = conv_out_dim(h, k, stride, padding);
    let (ow, pad_left) = conv_out_dim(w, k, stride, padding);
    let mut out = vec![0.0f32; oh * ow * cout];
    let kd = &kernel.data;

    for oy in 0..oh {
        for ox in 0..ow {
            let acc = &mut out[(oy * ow + ox) * cout..(oy * ow + ox + 1) * cout];
            if let Some(b) = bias {
                acc.copy_from_slice(b);
            }
            for ky in 0..k {
                let iy = (oy * stride + ky) as isize - pad_top as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * stride + kx) as isize - pad_left as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let px = ((iy as usize) * w + ix as usize) * cin;
                    let pixel = &x.data[px..px + cin];
                    let kbase = (ky * k + kx) * cin * cout;
                    for (ci, &v) in pixel.iter().enumerate() {
                        let krow = &kd[kbase + ci * cout..kbase + (ci + 1) * cout];
                        for (a, &kv) in acc.iter_mut().zip(krow) {
                            *a += v * kv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, cout], out)
}

pub fn depthwise_conv2d(
    x: &Tensor,
    kernel: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor, NnError> {
    let (h, w, c) = x.dims3()?;
    let k = match kernel.shape[..] {
        [kh, kw, kc] if kh == kw && kc == c => kh,
        _ => {
            return shape_err(format!(
                "depthwise kernel {:?} incompatible with input {:?}",
                kernel.shape, x.shape
            ))
        }
    };
    check_conv_params(k, stride)?;
    let (oh, pad_top) = conv_out_dim(h, k, stride, padding);
    let (ow, pad_left) = conv_out_dim(w, k, stride, padding);
    let mut out = vec![0.0f32; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let acc = &mut out[(oy * ow + ox) * c..(oy * ow + ox + 1) * c];
            for ky in 0..k {
                let iy = (oy * stride + ky) as isize - pad_top as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * stride + kx) as isize - pad_left as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let px = ((iy as usize) * w + ix as usize) * c;
                    let kbase = (ky * k + kx) * c;
                    let pixel = &x.data[px..px + c];
                    let krow = &kernel.data[kbase..kbase + c];
                    for ((a, &v), &kv) in acc.iter_mut().zip(pixel).zip(krow) {
                        *a += v * kv;
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

/// Batch-norm parameters folded into a per-channel affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    scale: Vec<f32>,
    shift: Vec<f32>,
}

impl BatchNorm {
    pub const DEFAULT_EPS: f32 = 1e-3;

    pub fn new(
        gamma: &[f32],
        beta: &[f32],
        mean: &[f32],
        var: &[f32],
        eps: f32,
    ) -> Result<Self, NnError> {
        let c = gamma.len();
        if beta.len() != c || mean.len() != c || var.len() != c {
            return shape_err("batch-norm parameter lengths differ");
        }
        let scale: Vec<f32> = gamma
            .iter()
            .zip(var)
            .map(|(g, v)| g / (v + eps).sqrt())
            .collect();
        let shift = beta
            .iter()
            .zip(mean)
            .zip(&scale)
            .map(|((b, m), s)| b - m * s)
            .collect();
        Ok(Self { scale, shift })
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, x: &mut Tensor) -> Result<(), NnError> {
        let c = self.scale.len();
        if x.shape.last() != Some(&c) {
            return shape_err(format!("batch-norm over {c} channels, input {:?}", x.shape));
        }
        for px in x.data.chunks_exact_mut(c) {
            for ((v, s), b) in px.iter_mut().zip(&self.scale).zip(&self.shift) {
                *v = *v * s + b;
            }
        }
        Ok(())
    }
}

/// `γ·(x − mean)/sqrt(var + ε) + β` per channel (last axis).
pub fn batchnorm_inf(
    x: &Tensor,
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    var: &[f32],
    eps: f32,
) -> Result<Tensor, NnError> {
    let bn = BatchNorm::new(gamma, beta, mean, var, eps)?;
    let mut y = x.clone();
    bn.apply(&mut y)?;
    Ok(y)
}

#[inline]
pub fn sigmoid_scalar(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

#[inline]
pub fn swish_scalar(v: f32) -> f32 {
    v * sigmoid_scalar(v)
}

pub fn swish_inplace(x: &mut Tensor) {
    x.data.iter_mut().for_each(|v| *v = swish_scalar(*v));
}

pub fn sigmoid_inplace(x: &mut Tensor) {
    x.data.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
}

pub fn swish(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    swish_inplace(&mut y);
    y
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    sigmoid_inplace(&mut y);
    y
}

/// `(H, W, C) -> (C)` mean over all pixels.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor, NnError> {
    let (h, w, c) = x.dims3()?;
    let mut acc = vec![0.0f32; c];
    for px in x.data.chunks_exact(c) {
        for (a, v) in acc.iter_mut().zip(px) {
            *a += v;
        }
    }
    let inv = 1.0 / (h * w) as f32;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(Tensor::vector(acc))
}

/// Max pooling without padding; trailing rows/columns that don't fill a window are dropped.
pub fn max_pool2d(x: &Tensor, k: usize, stride: usize) -> Result<Tensor, NnError> {
    let (h, w, c) = x.dims3()?;
    check_conv_params(k, stride)?;
    let (oh, _) = conv_out_dim(h, k, stride, Padding::Valid);
    let (ow, _) = conv_out_dim(w, k, stride, Padding::Valid);
    let mut out = vec![f32::NEG_INFINITY; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let acc = &mut out[(oy * ow + ox) * c..(oy * ow + ox + 1) * c];
            for ky in 0..k {
                for kx in 0..k {
                    let px = ((oy * stride + ky) * w + ox * stride + kx) * c;
                    for (a, &v) in acc.iter_mut().zip(&x.data[px..px + c]) {
                        *a = a.max(v);
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

/// `y = xᵀW + b` for `x: (N)`, `W: (N, M)`, `b: (M)`.
pub fn dense(x: &Tensor, weight: &Tensor, bias: &[f32]) -> Result<Tensor, NnError> {
    let n = x.len();
    let m = match weight.shape[..] {
        [wn, wm] if wn == n && bias.len() == wm => wm,
        _ => {
            return shape_err(format!(
                "dense weight {:?} / bias {} incompatible with input len {n}",
                weight.shape,
                bias.len()
            ))
        }
    };
    let mut out = bias.to_vec();
    for (i, &v) in x.data.iter().enumerate() {
        let row = &weight.data[i * m..(i + 1) * m];
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += v * wv;
        }
    }
    Ok(Tensor::vector(out))
}

/// `x / max(‖x‖₂, ε)`.
pub fn l2_normalize(x: &Tensor, eps: f32) -> Tensor {
    let norm = x
        .data
        .iter()
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        .sqrt();
    let denom = norm.max(eps as f64);
    let data = x.data.iter().map(|&v| (v as f64 / denom) as f32).collect();
    Tensor {
        shape: x.shape.clone(),
        data,
    }
}
