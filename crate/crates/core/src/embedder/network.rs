use std::sync::Arc;

use super::arch::{self, BlockSpec, LayerShape, BN_EPS, EMBED_DIM, HEAD_POOL, HEAD_REPEATS};
use super::weights::ModelWeights;
use super::Embedding;
use crate::nn::{self, BatchNorm, NnError, Padding, Tensor};
use crate::spectrogram::{MelSpectrogram, N_FRAMES, N_MELS};

const L2_EPS: f32 = 1e-12;

#[derive(Debug, Clone)]
struct Conv {
    kernel: Tensor,
    bias: Option<Vec<f32>>,
    stride: usize,
}

impl Conv {
    fn load(w: &ModelWeights, prefix: &str, shape: Vec<usize>, stride: usize, bias: bool) -> Self {
        Self {
            kernel: tensor(w, &format!("{prefix}/kernel"), shape),
            bias: bias.then(|| w.expect(&format!("{prefix}/bias")).to_vec()),
            stride,
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor, NnError> {
        nn::conv2d(
            x,
            &self.kernel,
            self.bias.as_deref(),
            self.stride,
            Padding::Same,
        )
    }
}

#[derive(Debug, Clone)]
struct Dense {
    kernel: Tensor,
    bias: Vec<f32>,
}

impl Dense {
    fn load(w: &ModelWeights, prefix: &str, n: usize, m: usize) -> Self {
        Self {
            kernel: tensor(w, &format!("{prefix}/kernel"), vec![n, m]),
            bias: w.expect(&format!("{prefix}/bias")).to_vec(),
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor, NnError> {
        nn::dense(x, &self.kernel, &self.bias)
    }
}

fn tensor(w: &ModelWeights, name: &str, shape: Vec<usize>) -> Tensor {
    Tensor::new(shape, w.expect(name).to_vec()).expect("validated tensor shape")
}

fn batch_norm(w: &ModelWeights, prefix: &str) -> BatchNorm {
    let p = |leaf: &str| w.expect(&format!("{prefix}/{leaf}"));
    BatchNorm::new(
        p("gamma"),
        p("beta"),
        p("moving_mean"),
        p("moving_variance"),
        BN_EPS as f32,
    )
    .expect("validated batch-norm shapes")
}

#[derive(Debug, Clone)]
struct MbConv {
    spec: BlockSpec,
    expand: Option<(Conv, BatchNorm)>,
    depthwise: Tensor,
    depthwise_bn: BatchNorm,
    se_reduce: Dense,
    se_expand: Dense,
    project: Conv,
    project_bn: BatchNorm,
}

impl MbConv {
    fn load(w: &ModelWeights, spec: BlockSpec) -> Self {
        let p = &spec.name;
        let exp = spec.expanded_channels();
        let expand = (spec.expand_ratio != 1).then(|| {
            (
                Conv::load(
                    w,
                    &format!("{p}/expand/conv"),
                    vec![1, 1, spec.in_channels, exp],
                    1,
                    false,
                ),
                batch_norm(w, &format!("{p}/expand/bn")),
            )
        });
        Self {
            expand,
            depthwise: tensor(
                w,
                &format!("{p}/depthwise/kernel"),
                vec![spec.kernel, spec.kernel, exp],
            ),
            depthwise_bn: batch_norm(w, &format!("{p}/depthwise/bn")),
            se_reduce: Dense::load(w, &format!("{p}/se/reduce"), exp, spec.se_channels()),
            se_expand: Dense::load(w, &format!("{p}/se/expand"), spec.se_channels(), exp),
            project: Conv::load(
                w,
                &format!("{p}/project/conv"),
                vec![1, 1, exp, spec.out_channels],
                1,
                false,
            ),
            project_bn: batch_norm(w, &format!("{p}/project/bn")),
            spec,
        }
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let mut x = match &self.expand {
            Some((conv, bn)) => {
                let mut y = conv.forward(input)?;
                bn.apply(&mut y)?;
                nn::swish_inplace(&mut y);
                y
            }
            None => input.clone(),
        };
        x = nn::depthwise_conv2d(&x, &self.depthwise, self.spec.stride, Padding::Same)?;
        self.depthwise_bn.apply(&mut x)?;
        nn::swish_inplace(&mut x);

        // squeeze-excitation
        let pooled = nn::global_avg_pool(&x)?;
        let mut gate = self.se_reduce.forward(&pooled)?;
        nn::swish_inplace(&mut gate);
        let mut gate = self.se_expand.forward(&gate)?;
        nn::sigmoid_inplace(&mut gate);
        let c = gate.len();
        for px in x.data_mut().chunks_exact_mut(c) {
            for (v, g) in px.iter_mut().zip(gate.data()) {
                *v *= g;
            }
        }

        let mut y = self.project.forward(&x)?;
        self.project_bn.apply(&mut y)?;
        if self.spec.has_residual() {
            for (o, i) in y.data_mut().iter_mut().zip(input.data()) {
                *o += i;
            }
        }
        Ok(y)
    }
}

/// The base network with resolved layers. Immutable and cheap to share.
#[derive(Debug, Clone)]
pub struct Embedder {
    weights: Arc<ModelWeights>,
    stem: Conv,
    stem_bn: BatchNorm,
    blocks: Vec<MbConv>,
    head: Vec<(Conv, BatchNorm)>,
    embedding: Dense,
}

impl Embedder {
    pub fn new(weights: ModelWeights) -> Self {
        Self::from_shared(Arc::new(weights))
    }

    pub fn from_shared(weights: Arc<ModelWeights>) -> Self {
        let w = &*weights;
        let stem = Conv::load(w, "stem/conv", vec![3, 3, 1, arch::STEM_CHANNELS], 2, false);
        let stem_bn = batch_norm(w, "stem/bn");
        let blocks = arch::blocks()
            .into_iter()
            .map(|b| MbConv::load(w, b))
            .collect();
        let mut cin = arch::STAGES[arch::STAGES.len() - 1].out_channels;
        let head = (1..=HEAD_REPEATS)
            .map(|j| {
                let conv = Conv::load(
                    w,
                    &format!("head{j}/conv"),
                    vec![
                        arch::HEAD_KERNEL,
                        arch::HEAD_KERNEL,
                        cin,
                        arch::HEAD_CHANNELS,
                    ],
                    arch::HEAD_STRIDE,
                    true,
                );
                cin = arch::HEAD_CHANNELS;
                (conv, batch_norm(w, &format!("head{j}/bn")))
            })
            .collect();
        let embedding = Dense::load(w, "embedding/dense", arch::flatten_len(), EMBED_DIM);
        Self {
            stem,
            stem_bn,
            blocks,
            head,
            embedding,
            weights,
        }
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn embed(&self, spec: &MelSpectrogram) -> Result<Embedding, NnError> {
        self.forward(spec, |_, _| {})
    }

    /// Runs the network and reports the output shape of every layer group.
    pub fn trace_shapes(&self, spec: &MelSpectrogram) -> Result<Vec<LayerShape>, NnError> {
        let mut shapes = vec![LayerShape {
            layer: "input".into(),
            dims: vec![N_FRAMES, N_MELS, 1],
        }];
        self.forward(spec, |layer, t| {
            shapes.push(LayerShape {
                layer: layer.to_string(),
                dims: t.shape().to_vec(),
            })
        })?;
        Ok(shapes)
    }

    fn forward(
        &self,
        spec: &MelSpectrogram,
        mut observe: impl FnMut(&str, &Tensor),
    ) -> Result<Embedding, NnError> {
        let input = Tensor::new(vec![N_FRAMES, N_MELS, 1], spec.values().to_vec())?;
        let mut x = self.stem.forward(&input)?;
        self.stem_bn.apply(&mut x)?;
        nn::swish_inplace(&mut x);
        observe("stem", &x);

        let mut stage_end = arch::STAGES.iter().scan(0, |n, s| {
            *n += s.repeats;
            Some(*n)
        });
        let mut next_end = stage_end.next();
        let mut stage = 1;
        for (i, block) in self.blocks.iter().enumerate() {
            x = block.forward(&x)?;
            if Some(i + 1) == next_end {
                observe(&format!("stage{stage}"), &x);
                stage += 1;
                next_end = stage_end.next();
            }
        }

        for (j, (conv, bn)) in self.head.iter().enumerate() {
            x = conv.forward(&x)?;
            bn.apply(&mut x)?;
            x = nn::max_pool2d(&x, HEAD_POOL, HEAD_POOL)?;
            observe(&format!("head{}", j + 1), &x);
        }

        let n = x.len();
        let flat = x.reshape(vec![n])?;
        observe("flatten", &flat);
        let out = nn::l2_normalize(&self.embedding.forward(&flat)?, L2_EPS);
        observe("embedding", &out);
        if !out.is_finite() {
            return Err(NnError::NonFinite("embedder"));
        }
        Ok(Embedding::from_vec_unchecked(out.into_data()))
    }
}
