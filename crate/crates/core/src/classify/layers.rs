//! Network building blocks, forward and backward.
//!
//! Tensors are flat `Vec<f64>` in channel-major order `[c][y][x]` with a
//! separate [`Shape3`]. Convolution is the valid-region cross-correlation
//! `out[o][y][x] = b[o] + sum_{c,dy,dx} w[o][c][dy][dx] * in[c][y+dy][x+dx]`
//! with stride 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape3 {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// Training or inference behaviour of batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Training,
    Inference,
}

#[inline]
fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Output shape of a valid convolution, or a shape error.
pub fn conv_output_shape(input: Shape3, out_c: usize, kh: usize, kw: usize) -> Result<Shape3> {
    if kh == 0 || kw == 0 || out_c == 0 {
        return Err(Error::Shape("kernel dimensions must be positive".into()));
    }
    if kh > input.h || kw > input.w {
        return Err(Error::Shape(format!(
            "{kh}x{kw} kernel does not fit a {}x{} input",
            input.h, input.w
        )));
    }
    Ok(Shape3::new(out_c, input.h - kh + 1, input.w - kw + 1))
}

/// Valid, stride-1 convolution. `weights` is `[out_c][in_c][kh][kw]`.
pub fn conv_forward(
    input: &[f64],
    shape: Shape3,
    weights: &[f64],
    bias: &[f64],
    kh: usize,
    kw: usize,
) -> Result<(Vec<f64>, Shape3)> {
    let out_c = bias.len();
    let os = conv_output_shape(shape, out_c, kh, kw)?;
    if input.len() != shape.len() {
        return Err(Error::Shape(format!("input has {} values, shape says {}", input.len(), shape.len())));
    }
    if weights.len() != out_c * shape.c * kh * kw {
        return Err(Error::Shape(format!(
            "{} kernel weights for {out_c}x{}x{kh}x{kw}",
            weights.len(),
            shape.c
        )));
    }
    let mut out = vec![0.0; os.len()];
    for (o, plane) in out.chunks_exact_mut(os.plane()).enumerate() {
        plane.iter_mut().for_each(|v| *v = bias[o]);
        for c in 0..shape.c {
            let src = &input[c * shape.plane()..(c + 1) * shape.plane()];
            for dy in 0..kh {
                for dx in 0..kw {
                    let w = weights[((o * shape.c + c) * kh + dy) * kw + dx];
                    for y in 0..os.h {
                        let row = &src[(y + dy) * shape.w + dx..][..os.w];
                        axpy(&mut plane[y * os.w..(y + 1) * os.w], w, row);
                    }
                }
            }
        }
    }
    Ok((out, os))
}

/// Gradients of a convolution with respect to its weights, bias, and
/// (optionally) its input.
pub struct ConvGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: Option<Vec<f64>>,
}

pub fn conv_backward(
    input: &[f64],
    shape: Shape3,
    weights: &[f64],
    out_c: usize,
    kh: usize,
    kw: usize,
    grad_out: &[f64],
    want_input: bool,
) -> ConvGrad {
    let os = Shape3::new(out_c, shape.h - kh + 1, shape.w - kw + 1);
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; out_c];
    let mut gi = want_input.then(|| vec![0.0; shape.len()]);
    for (o, g) in grad_out.chunks_exact(os.plane()).enumerate() {
        gb[o] = g.iter().sum();
        for c in 0..shape.c {
            let src = &input[c * shape.plane()..(c + 1) * shape.plane()];
            for dy in 0..kh {
                for dx in 0..kw {
                    let idx = ((o * shape.c + c) * kh + dy) * kw + dx;
                    let mut acc = 0.0;
                    for y in 0..os.h {
                        let row = &src[(y + dy) * shape.w + dx..][..os.w];
                        acc += dot(&g[y * os.w..(y + 1) * os.w], row);
                    }
                    gw[idx] = acc;
                    if let Some(gi) = gi.as_mut() {
                        let dst = &mut gi[c * shape.plane()..(c + 1) * shape.plane()];
                        for y in 0..os.h {
                            axpy(&mut dst[(y + dy) * shape.w + dx..][..os.w], weights[idx], &g[y * os.w..(y + 1) * os.w]);
                        }
                    }
                }
            }
        }
    }
    ConvGrad {
        weights: gw,
        bias: gb,
        input: gi,
    }
}

/// Batch-normalise one channel's values:
/// `gamma * (b - mean) / sqrt(var + eps) + beta` with the biased variance.
pub fn batchnorm_forward(batch: &[f64], gamma: f64, beta: f64, eps: f64) -> Result<Vec<f64>> {
    if batch.len() < 2 {
        return Err(Error::Domain(format!("batch norm needs at least 2 values, got {}", batch.len())));
    }
    let (mean, var) = mean_var(batch);
    let inv = 1.0 / (var + eps).sqrt();
    Ok(batch.iter().map(|b| gamma * (b - mean) * inv + beta).collect())
}

/// Mean and biased (divide-by-N) variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Per-channel statistics of a batch of `[c][y][x]` tensors. Sums run over
/// samples in order, so the result does not depend on how the samples were
/// produced.
pub fn channel_stats(batch: &[Vec<f64>], shape: Shape3) -> (Vec<f64>, Vec<f64>) {
    let plane = shape.plane();
    let count = (batch.len() * plane) as f64;
    let mut mean = vec![0.0; shape.c];
    let mut var = vec![0.0; shape.c];
    for c in 0..shape.c {
        let s: f64 = batch.iter().map(|x| x[c * plane..(c + 1) * plane].iter().sum::<f64>()).sum();
        mean[c] = s / count;
        let q: f64 = batch
            .iter()
            .map(|x| x[c * plane..(c + 1) * plane].iter().map(|v| (v - mean[c]) * (v - mean[c])).sum::<f64>())
            .sum();
        var[c] = q / count;
    }
    (mean, var)
}

/// Apply a per-channel affine normalisation `gamma * (x - mean) * inv + beta`,
/// returning the output and the normalised values `(x - mean) * inv`.
pub fn normalize_channels(
    x: &[f64],
    shape: Shape3,
    mean: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    beta: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let plane = shape.plane();
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for c in 0..shape.c {
        for i in c * plane..(c + 1) * plane {
            xhat[i] = (x[i] - mean[c]) * inv_std[c];
            out[i] = gamma[c] * xhat[i] + beta[c];
        }
    }
    (out, xhat)
}

/// Batch-norm backward in training mode for a whole batch.
///
/// Returns input gradients per sample and the `gamma`, `beta` gradients.
pub fn batchnorm_backward(
    grad_out: &[Vec<f64>],
    xhat: &[Vec<f64>],
    shape: Shape3,
    gamma: &[f64],
    inv_std: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let plane = shape.plane();
    let m = (grad_out.len() * plane) as f64;
    let mut g_gamma = vec![0.0; shape.c];
    let mut g_beta = vec![0.0; shape.c];
    for c in 0..shape.c {
        let r = c * plane..(c + 1) * plane;
        for (g, xh) in grad_out.iter().zip(xhat) {
            g_beta[c] += g[r.clone()].iter().sum::<f64>();
            g_gamma[c] += dot(&g[r.clone()], &xh[r.clone()]);
        }
    }
    let grads = grad_out
        .iter()
        .zip(xhat)
        .map(|(g, xh)| {
            let mut gi = vec![0.0; g.len()];
            for c in 0..shape.c {
                let k = gamma[c] * inv_std[c] / m;
                for i in c * plane..(c + 1) * plane {
                    gi[i] = k * (m * g[i] - g_beta[c] - xh[i] * g_gamma[c]);
                }
            }
            gi
        })
        .collect();
    (grads, g_gamma, g_beta)
}

pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Max over windows of length `pool` taken every `stride` samples.
pub fn maxpool_forward(row: &[f64], pool: usize, stride: usize) -> Result<Vec<f64>> {
    if pool == 0 || stride == 0 || pool > row.len() {
        return Err(Error::Shape(format!(
            "pooling window {pool} (stride {stride}) does not fit a row of {}",
            row.len()
        )));
    }
    Ok((0..=(row.len() - pool) / stride)
        .map(|i| row[i * stride..i * stride + pool].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Pooling window and stride over the two spatial axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub pool_h: usize,
    pub pool_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl PoolSpec {
    pub fn output_shape(&self, input: Shape3) -> Result<Shape3> {
        if self.pool_h == 0 || self.pool_w == 0 || self.stride_h == 0 || self.stride_w == 0 {
            return Err(Error::Shape("pooling window and stride must be positive".into()));
        }
        if self.pool_h > input.h || self.pool_w > input.w {
            return Err(Error::Shape(format!(
                "{}x{} pooling window does not fit a {}x{} map",
                self.pool_h, self.pool_w, input.h, input.w
            )));
        }
        Ok(Shape3::new(
            input.c,
            (input.h - self.pool_h) / self.stride_h + 1,
            (input.w - self.pool_w) / self.stride_w + 1,
        ))
    }
}

/// 2-D max pooling; also returns the flat input index of each maximum (the
/// first one on ties) for the backward pass.
pub fn maxpool2d_forward(input: &[f64], shape: Shape3, spec: PoolSpec) -> Result<(Vec<f64>, Shape3, Vec<usize>)> {
    let os = spec.output_shape(shape)?;
    let mut out = Vec::with_capacity(os.len());
    let mut arg = Vec::with_capacity(os.len());
    for c in 0..shape.c {
        let base = c * shape.plane();
        for oy in 0..os.h {
            for ox in 0..os.w {
                let mut best = f64::NEG_INFINITY;
                let mut at = base + oy * spec.stride_h * shape.w + ox * spec.stride_w;
                for dy in 0..spec.pool_h {
                    let row = base + (oy * spec.stride_h + dy) * shape.w + ox * spec.stride_w;
                    for i in row..row + spec.pool_w {
                        if input[i] > best {
                            best = input[i];
                            at = i;
                        }
                    }
                }
                out.push(best);
                arg.push(at);
            }
        }
    }
    Ok((out, os, arg))
}

pub fn maxpool2d_backward(grad_out: &[f64], argmax: &[usize], input_len: usize) -> Vec<f64> {
    let mut g = vec![0.0; input_len];
    for (&i, &v) in argmax.iter().zip(grad_out) {
        g[i] += v;
    }
    g
}

/// Per-element scale factors for inverted dropout: 0 with probability
/// `p_drop`, else `1 / (1 - p_drop)`.
pub fn dropout_mask<R: Rng>(n: usize, p_drop: f64, rng: &mut R) -> Vec<f64> {
    if p_drop <= 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - p_drop);
    (0..n)
        .map(|_| if rng.random::<f64>() < p_drop { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout. Identity in inference mode or when `p_drop` is 0.
pub fn dropout(values: &[f64], p_drop: f64, mode: Mode, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::Domain(format!("dropout probability {p_drop} not in [0, 1)")));
    }
    if mode == Mode::Inference || p_drop == 0.0 {
        return Ok(values.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = dropout_mask(values.len(), p_drop, &mut rng);
    Ok(values.iter().zip(&mask).map(|(v, m)| v * m).collect())
}

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// `out = W x + b` with `W` row-major `[out][in]`.
pub fn dense_forward(x: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    bias.iter()
        .enumerate()
        .map(|(o, b)| b + dot(&weights[o * x.len()..(o + 1) * x.len()], x))
        .collect()
}
