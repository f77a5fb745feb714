//! Two-block convolutional classifier.
//!
//! Each block is convolution, batch norm, ReLU, max pooling. The pooled
//! features are flattened, passed through inverted dropout, a dense layer,
//! and a softmax over the five classes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::{ClassifierImage, IMAGE_ROWS, WINDOW_SIZE};
use super::layers::{
    channel_stats, conv_forward, conv_output_shape, dense_forward, dropout_mask, maxpool2d_forward,
    normalize_channels, softmax, Mode, PoolSpec, Shape3,
};
use crate::error::{Error, Result};
use crate::par;
use crate::trace::VehicleClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub filters: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub pool: PoolSpec,
}

/// Layer sizes and fixed hyperparameters of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_rows: usize,
    pub input_cols: usize,
    pub blocks: Vec<BlockSpec>,
    pub dropout: f64,
    pub n_classes: usize,
    pub bn_epsilon: f64,
    /// Weight kept on the old running statistic at each update.
    pub bn_decay: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        let pool = PoolSpec {
            pool_h: 1,
            pool_w: 4,
            stride_h: 1,
            stride_w: 4,
        };
        Self {
            input_rows: IMAGE_ROWS,
            input_cols: WINDOW_SIZE,
            blocks: vec![
                BlockSpec {
                    filters: 8,
                    kernel_h: 3,
                    kernel_w: 7,
                    pool,
                },
                BlockSpec {
                    filters: 16,
                    kernel_h: 3,
                    kernel_w: 5,
                    pool,
                },
            ],
            dropout: 0.6,
            n_classes: VehicleClass::ALL.len(),
            bn_epsilon: 1e-5,
            bn_decay: 0.9,
        }
    }
}

/// Shapes around one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockShapes {
    pub input: Shape3,
    pub conv: Shape3,
    pub pooled: Shape3,
}

impl Architecture {
    pub fn input_shape(&self) -> Shape3 {
        Shape3::new(1, self.input_rows, self.input_cols)
    }

    /// Shapes through every block; fails if any layer does not fit.
    pub fn block_shapes(&self) -> Result<Vec<BlockShapes>> {
        if self.blocks.is_empty() {
            return Err(Error::Shape("network needs at least one block".into()));
        }
        let mut input = self.input_shape();
        self.blocks
            .iter()
            .map(|b| {
                let conv = conv_output_shape(input, b.filters, b.kernel_h, b.kernel_w)?;
                let pooled = b.pool.output_shape(conv)?;
                let s = BlockShapes { input, conv, pooled };
                input = pooled;
                Ok(s)
            })
            .collect()
    }

    pub fn feature_len(&self) -> Result<usize> {
        Ok(self.block_shapes()?.last().map_or(0, |s| s.pooled.len()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Domain(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.n_classes < 2 {
            return Err(Error::Domain("need at least two classes".into()));
        }
        if !(self.bn_epsilon >= 0.0 && (0.0..1.0).contains(&self.bn_decay)) {
            return Err(Error::Domain("bad batch-norm epsilon or decay".into()));
        }
        self.block_shapes().map(|_| ())
    }

    /// Parameter count including batch-norm running statistics.
    pub fn n_params(&self) -> Result<usize> {
        let shapes = self.block_shapes()?;
        let blocks: usize = self
            .blocks
            .iter()
            .zip(&shapes)
            .map(|(b, s)| b.filters * s.input.c * b.kernel_h * b.kernel_w + 5 * b.filters)
            .sum();
        Ok(blocks + self.n_classes * (self.feature_len()? + 1))
    }
}

/// Parameters of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    /// `[filters][in_channels][kernel_h][kernel_w]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub arch: Architecture,
    pub blocks: Vec<BlockParams>,
    /// `[n_classes][feature_len]`
    pub fc_weights: Vec<f64>,
    pub fc_bias: Vec<f64>,
}

impl CnnModel {
    /// He-normal weights, zero biases, unit batch-norm scale.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = arch.block_shapes()?;
        let mut he = |n: usize, fan_in: usize| -> Vec<f64> {
            let d = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            (0..n).map(|_| d.sample(&mut rng)).collect()
        };
        let blocks = arch
            .blocks
            .iter()
            .zip(&shapes)
            .map(|(b, s)| {
                let fan_in = s.input.c * b.kernel_h * b.kernel_w;
                BlockParams {
                    weights: he(b.filters * fan_in, fan_in),
                    bias: vec![0.0; b.filters],
                    gamma: vec![1.0; b.filters],
                    beta: vec![0.0; b.filters],
                    running_mean: vec![0.0; b.filters],
                    running_var: vec![1.0; b.filters],
                }
            })
            .collect();
        let features = arch.feature_len()?;
        let fc_weights = he(arch.n_classes * features, features);
        Ok(Self {
            fc_bias: vec![0.0; arch.n_classes],
            arch,
            blocks,
            fc_weights,
        })
    }

    /// Every parameter in file order: per block weights, bias, gamma, beta,
    /// running mean, running variance; then dense weights and bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for part in [&b.weights, &b.bias, &b.gamma, &b.beta, &b.running_mean, &b.running_var] {
                out.extend_from_slice(part);
            }
        }
        out.extend_from_slice(&self.fc_weights);
        out.extend_from_slice(&self.fc_bias);
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn from_flat(arch: Architecture, flat: &[f64]) -> Result<Self> {
        arch.validate()?;
        let expected = arch.n_params()?;
        if flat.len() != expected {
            return Err(Error::Length(format!("{} parameters, architecture needs {expected}", flat.len())));
        }
        let shapes = arch.block_shapes()?;
        let mut rest = flat;
        let mut take = |n: usize| {
            let (a, b) = rest.split_at(n);
            rest = b;
            a.to_vec()
        };
        let blocks = arch
            .blocks
            .iter()
            .zip(&shapes)
            .map(|(b, s)| BlockParams {
                weights: take(b.filters * s.input.c * b.kernel_h * b.kernel_w),
                bias: take(b.filters),
                gamma: take(b.filters),
                beta: take(b.filters),
                running_mean: take(b.filters),
                running_var: take(b.filters),
            })
            .collect();
        let features = arch.feature_len()?;
        let fc_weights = take(arch.n_classes * features);
        let fc_bias = take(arch.n_classes);
        Ok(Self {
            arch,
            blocks,
            fc_weights,
            fc_bias,
        })
    }

    /// Trainable tensors in gradient order: per block weights, bias, gamma,
    /// beta; then dense weights and bias.
    pub fn trainable(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for b in &self.blocks {
            v.extend([&b.weights[..], &b.bias[..], &b.gamma[..], &b.beta[..]]);
        }
        v.extend([&self.fc_weights[..], &self.fc_bias[..]]);
        v
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for b in &mut self.blocks {
            v.push(&mut b.weights);
            v.push(&mut b.bias);
            v.push(&mut b.gamma);
            v.push(&mut b.beta);
        }
        v.push(&mut self.fc_weights);
        v.push(&mut self.fc_bias);
        v
    }

    fn check_image(&self, image: &ClassifierImage) -> Result<()> {
        if image.rows() != self.arch.input_rows || image.cols() != self.arch.input_cols {
            return Err(Error::Shape(format!(
                "{}x{} image for a {}x{} network",
                image.rows(),
                image.cols(),
                self.arch.input_rows,
                self.arch.input_cols
            )));
        }
        Ok(())
    }

    /// Dense-layer scores in inference mode (running statistics, no dropout).
    pub fn scores(&self, image: &ClassifierImage) -> Result<Vec<f64>> {
        self.check_image(image)?;
        let shapes = self.arch.block_shapes()?;
        let mut x = image.data().to_vec();
        for ((spec, p), s) in self.arch.blocks.iter().zip(&self.blocks).zip(&shapes) {
            let (z, cs) = conv_forward(&x, s.input, &p.weights, &p.bias, spec.kernel_h, spec.kernel_w)?;
            let inv: Vec<f64> = p.running_var.iter().map(|v| 1.0 / (v + self.arch.bn_epsilon).sqrt()).collect();
            let (mut y, _) = normalize_channels(&z, cs, &p.running_mean, &inv, &p.gamma, &p.beta);
            y.iter_mut().for_each(|v| *v = v.max(0.0));
            x = maxpool2d_forward(&y, cs, spec.pool)?.0;
        }
        Ok(dense_forward(&x, &self.fc_weights, &self.fc_bias))
    }

    /// Class probabilities in inference mode.
    pub fn predict_proba(&self, image: &ClassifierImage) -> Result<Vec<f64>> {
        Ok(softmax(&self.scores(image)?))
    }

    /// Most probable class and the full probability vector.
    pub fn predict(&self, image: &ClassifierImage) -> Result<(VehicleClass, Vec<f64>)> {
        let p = self.predict_proba(image)?;
        let i = argmax(&p);
        let class = VehicleClass::from_ordinal(i)
            .ok_or_else(|| Error::Domain(format!("class index {i} outside the five vehicle classes")))?;
        Ok((class, p))
    }
}

/// Index of the largest entry, first on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Forward pass for one image. Training mode needs batch statistics, so it
/// is only available through [`cnn_forward_batch`].
pub fn cnn_forward(model: &CnnModel, image: &ClassifierImage, mode: Mode) -> Result<Vec<f64>> {
    match mode {
        Mode::Inference => model.predict_proba(image),
        Mode::Training => Err(Error::Domain("training-mode batch norm needs a batch of at least 2".into())),
    }
}

/// Per-block intermediate values kept for the backward pass.
pub(crate) struct BlockCache {
    pub input: Vec<Vec<f64>>,
    pub xhat: Vec<Vec<f64>>,
    pub pre_relu: Vec<Vec<f64>>,
    pub argmax: Vec<Vec<usize>>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub(crate) struct TrainForward {
    pub blocks: Vec<BlockCache>,
    pub dropped: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
}

/// Training-mode forward over a batch: batch statistics in batch norm and the
/// given per-sample dropout masks.
pub(crate) fn forward_train(model: &CnnModel, images: &[&ClassifierImage], masks: &[Vec<f64>]) -> Result<TrainForward> {
    if images.len() < 2 {
        return Err(Error::Domain(format!("training-mode batch of {} < 2", images.len())));
    }
    for im in images {
        model.check_image(im)?;
    }
    let shapes = model.arch.block_shapes()?;
    let eps = model.arch.bn_epsilon;
    let mut x: Vec<Vec<f64>> = images.iter().map(|im| im.data().to_vec()).collect();
    let mut caches = Vec::with_capacity(shapes.len());
    for ((spec, p), s) in model.arch.blocks.iter().zip(&model.blocks).zip(&shapes) {
        let z = par::try_map(&x, |xi| {
            conv_forward(xi, s.input, &p.weights, &p.bias, spec.kernel_h, spec.kernel_w).map(|r| r.0)
        })?;
        let (mean, var) = channel_stats(&z, s.conv);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let normed = par::map(&z, |zi| normalize_channels(zi, s.conv, &mean, &inv_std, &p.gamma, &p.beta));
        drop(z);
        let (pre_relu, xhat): (Vec<_>, Vec<_>) = normed.into_iter().unzip();
        let pooled = par::try_map(&pre_relu, |y| {
            let a: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
            maxpool2d_forward(&a, s.conv, spec.pool).map(|(o, _, arg)| (o, arg))
        })?;
        let (out, argmax): (Vec<_>, Vec<_>) = pooled.into_iter().unzip();
        caches.push(BlockCache {
            input: std::mem::replace(&mut x, out),
            xhat,
            pre_relu,
            argmax,
            inv_std,
            mean,
            var,
        });
    }
    let dropped: Vec<Vec<f64>> = x
        .iter()
        .zip(masks)
        .map(|(f, m)| f.iter().zip(m).map(|(a, b)| a * b).collect())
        .collect();
    let probs = dropped
        .iter()
        .map(|d| softmax(&dense_forward(d, &model.fc_weights, &model.fc_bias)))
        .collect();
    Ok(TrainForward {
        blocks: caches,
        dropped,
        probs,
    })
}

/// Forward pass over a batch in either mode. In training mode batch norm
/// uses batch statistics and dropout masks are drawn from `seed`.
pub fn cnn_forward_batch(model: &CnnModel, images: &[&ClassifierImage], mode: Mode, seed: u64) -> Result<Vec<Vec<f64>>> {
    match mode {
        Mode::Inference => par::try_map(images, |im| model.predict_proba(im)),
        Mode::Training => {
            let n = model.arch.feature_len()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let masks: Vec<Vec<f64>> = images
                .iter()
                .map(|_| dropout_mask(n, model.arch.dropout, &mut rng))
                .collect();
            Ok(forward_train(model, images, &masks)?.probs)
        }
    }
}
