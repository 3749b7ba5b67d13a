//! The fixed base-network architecture and the tensor manifest it implies.
//!
//! ```text
//! stem    conv3x3/2 32, BN, swish                    98×64×1  -> 49×32×32
//! stage1  MBConv e1 k3 s1 -> 16, ×1                             -> 49×32×16
//! stage2  MBConv e6 k3 s2 -> 24, ×2                             -> 25×16×24
//! stage3  MBConv e6 k5 s2 -> 40, ×2                             -> 13×8×40
//! stage4  MBConv e6 k3 s2 -> 80, ×3                             -> 7×4×80
//! head    [conv3x3/1 32 (bias), BN, maxpool2] ×2                -> 1×1×32
//! embed   dense 256, L2 normalize                               -> 256
//! ```
//!
//! Every MBConv block carries squeeze-excitation with ratio 0.25 of the block
//! input channels.

use serde_json::{json, Value};

use crate::nn::{conv_out_dim, Padding};
use crate::spectrogram::{N_FRAMES, N_MELS};

pub const INPUT_SHAPE: (usize, usize, usize) = (N_FRAMES, N_MELS, 1);
pub const STEM_CHANNELS: usize = 32;
pub const HEAD_CHANNELS: usize = 32;
pub const HEAD_REPEATS: usize = 2;
pub const HEAD_KERNEL: usize = 3;
pub const HEAD_STRIDE: usize = 1;
pub const HEAD_POOL: usize = 2;
pub const EMBED_DIM: usize = 256;
pub const SE_RATIO: f64 = 0.25;
pub const BN_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSpec {
    pub expand_ratio: usize,
    pub kernel: usize,
    pub stride: usize,
    pub out_channels: usize,
    pub repeats: usize,
}

pub const STAGES: [StageSpec; 4] = [
    StageSpec {
        expand_ratio: 1,
        kernel: 3,
        stride: 1,
        out_channels: 16,
        repeats: 1,
    },
    StageSpec {
        expand_ratio: 6,
        kernel: 3,
        stride: 2,
        out_channels: 24,
        repeats: 2,
    },
    StageSpec {
        expand_ratio: 6,
        kernel: 5,
        stride: 2,
        out_channels: 40,
        repeats: 2,
    },
    StageSpec {
        expand_ratio: 6,
        kernel: 3,
        stride: 2,
        out_channels: 80,
        repeats: 3,
    },
];

/// One concrete MBConv block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub expand_ratio: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl BlockSpec {
    pub fn expanded_channels(&self) -> usize {
        self.in_channels * self.expand_ratio
    }

    pub fn se_channels(&self) -> usize {
        ((self.in_channels as f64 * SE_RATIO).round() as usize).max(1)
    }

    pub fn has_residual(&self) -> bool {
        self.stride == 1 && self.in_channels == self.out_channels
    }
}

pub fn blocks() -> Vec<BlockSpec> {
    let mut in_ch = STEM_CHANNELS;
    let mut out = Vec::new();
    for (s, stage) in STAGES.iter().enumerate() {
        for r in 0..stage.repeats {
            out.push(BlockSpec {
                name: format!("stage{}/block{}", s + 1, r + 1),
                in_channels: in_ch,
                out_channels: stage.out_channels,
                expand_ratio: stage.expand_ratio,
                kernel: stage.kernel,
                stride: if r == 0 { stage.stride } else { 1 },
            });
            in_ch = stage.out_channels;
        }
    }
    out
}

/// Output shape after each named layer group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub layer: String,
    pub dims: Vec<usize>,
}

impl LayerShape {
    fn new(layer: impl Into<String>, dims: Vec<usize>) -> Self {
        Self {
            layer: layer.into(),
            dims,
        }
    }
}

/// The shape chain of the architecture, derived from stride arithmetic.
pub fn intermediate_shapes() -> Vec<LayerShape> {
    let (mut h, mut w, _) = INPUT_SHAPE;
    let mut shapes = vec![LayerShape::new("input", vec![h, w, 1])];
    h = conv_out_dim(h, 3, 2, Padding::Same).0;
    w = conv_out_dim(w, 3, 2, Padding::Same).0;
    shapes.push(LayerShape::new("stem", vec![h, w, STEM_CHANNELS]));

    let all = blocks();
    for (s, stage) in STAGES.iter().enumerate() {
        h = conv_out_dim(h, stage.kernel, stage.stride, Padding::Same).0;
        w = conv_out_dim(w, stage.kernel, stage.stride, Padding::Same).0;
        debug_assert!(all.iter().any(|b| b.out_channels == stage.out_channels));
        shapes.push(LayerShape::new(
            format!("stage{}", s + 1),
            vec![h, w, stage.out_channels],
        ));
    }
    for j in 0..HEAD_REPEATS {
        h = conv_out_dim(h, HEAD_KERNEL, HEAD_STRIDE, Padding::Same).0;
        w = conv_out_dim(w, HEAD_KERNEL, HEAD_STRIDE, Padding::Same).0;
        h = conv_out_dim(h, HEAD_POOL, HEAD_POOL, Padding::Valid).0;
        w = conv_out_dim(w, HEAD_POOL, HEAD_POOL, Padding::Valid).0;
        shapes.push(LayerShape::new(
            format!("head{}", j + 1),
            vec![h, w, HEAD_CHANNELS],
        ));
    }
    shapes.push(LayerShape::new("flatten", vec![h * w * HEAD_CHANNELS]));
    shapes.push(LayerShape::new("embedding", vec![EMBED_DIM]));
    shapes
}

/// Flattened feature count entering the embedding layer.
pub fn flatten_len() -> usize {
    intermediate_shapes()
        .iter()
        .find(|s| s.layer == "flatten")
        .map(|s| s.dims[0])
        .expect("flatten layer present")
}

/// One expected tensor of the weight file.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub kind: &'static str,
    pub hyperparams: Value,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

pub const BN_PARAMS: [&str; 4] = ["gamma", "beta", "moving_mean", "moving_variance"];

fn conv_hp(kernel: usize, stride: usize, padding: Padding) -> Value {
    json!({ "kernel": kernel, "stride": stride, "padding": padding.as_str() })
}

fn push_bn(out: &mut Vec<TensorSpec>, prefix: &str, channels: usize) {
    for p in BN_PARAMS {
        out.push(TensorSpec {
            name: format!("{prefix}/{p}"),
            kind: "batchnorm",
            hyperparams: json!({ "eps": BN_EPS }),
            shape: vec![channels],
        });
    }
}

fn push_conv(
    out: &mut Vec<TensorSpec>,
    prefix: &str,
    kernel: usize,
    stride: usize,
    cin: usize,
    cout: usize,
    bias: bool,
) {
    let hp = conv_hp(kernel, stride, Padding::Same);
    out.push(TensorSpec {
        name: format!("{prefix}/kernel"),
        kind: "conv2d",
        hyperparams: hp.clone(),
        shape: vec![kernel, kernel, cin, cout],
    });
    if bias {
        out.push(TensorSpec {
            name: format!("{prefix}/bias"),
            kind: "conv2d",
            hyperparams: hp,
            shape: vec![cout],
        });
    }
}

fn push_dense(out: &mut Vec<TensorSpec>, prefix: &str, n: usize, m: usize, activation: &str) {
    let hp = json!({ "activation": activation });
    out.push(TensorSpec {
        name: format!("{prefix}/kernel"),
        kind: "dense",
        hyperparams: hp.clone(),
        shape: vec![n, m],
    });
    out.push(TensorSpec {
        name: format!("{prefix}/bias"),
        kind: "dense",
        hyperparams: hp,
        shape: vec![m],
    });
}

/// Every tensor the architecture needs, in canonical file order.
pub fn tensor_specs() -> Vec<TensorSpec> {
    let mut out = Vec::new();
    push_conv(
        &mut out,
        "stem/conv",
        3,
        2,
        INPUT_SHAPE.2,
        STEM_CHANNELS,
        false,
    );
    push_bn(&mut out, "stem/bn", STEM_CHANNELS);

    for b in blocks() {
        let exp = b.expanded_channels();
        if b.expand_ratio != 1 {
            push_conv(
                &mut out,
                &format!("{}/expand/conv", b.name),
                1,
                1,
                b.in_channels,
                exp,
                false,
            );
            push_bn(&mut out, &format!("{}/expand/bn", b.name), exp);
        }
        out.push(TensorSpec {
            name: format!("{}/depthwise/kernel", b.name),
            kind: "depthwise_conv2d",
            hyperparams: conv_hp(b.kernel, b.stride, Padding::Same),
            shape: vec![b.kernel, b.kernel, exp],
        });
        push_bn(&mut out, &format!("{}/depthwise/bn", b.name), exp);
        push_dense(
            &mut out,
            &format!("{}/se/reduce", b.name),
            exp,
            b.se_channels(),
            "swish",
        );
        push_dense(
            &mut out,
            &format!("{}/se/expand", b.name),
            b.se_channels(),
            exp,
            "sigmoid",
        );
        push_conv(
            &mut out,
            &format!("{}/project/conv", b.name),
            1,
            1,
            exp,
            b.out_channels,
            false,
        );
        push_bn(&mut out, &format!("{}/project/bn", b.name), b.out_channels);
    }

    let mut cin = STAGES[STAGES.len() - 1].out_channels;
    for j in 1..=HEAD_REPEATS {
        push_conv(
            &mut out,
            &format!("head{j}/conv"),
            HEAD_KERNEL,
            HEAD_STRIDE,
            cin,
            HEAD_CHANNELS,
            true,
        );
        push_bn(&mut out, &format!("head{j}/bn"), HEAD_CHANNELS);
        cin = HEAD_CHANNELS;
    }
    push_dense(
        &mut out,
        "embedding/dense",
        flatten_len(),
        EMBED_DIM,
        "linear",
    );
    out
}
