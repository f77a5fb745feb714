//! Mini-batch SGD with momentum, backpropagated through every layer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cnn::{argmax, forward_train, Architecture, CnnModel};
use super::image::ClassifierImage;
use super::layers::{batchnorm_backward, conv_backward, dropout_mask, maxpool2d_backward};
use crate::error::{Error, Result};
use crate::par;
use crate::trace::VehicleClass;

/// What to do with the learning rate between epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// When an epoch raises the full training loss, undo it and halve the
    /// learning rate.
    HalveOnIncrease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub schedule: LrSchedule,
    /// Stop after this many epochs without a better validation accuracy.
    pub patience: Option<usize>,
    /// Stop once training accuracy (inference mode) reaches this value.
    pub stop_at_train_accuracy: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::default(),
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 100,
            batch_size: 16,
            validation_fraction: 0.3,
            schedule: LrSchedule::HalveOnIncrease,
            patience: None,
            stop_at_train_accuracy: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Domain(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Domain(format!("momentum {} not in [0, 1)", self.momentum)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Domain("epochs and batch size must be positive".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Domain(format!(
                "validation fraction {} not in (0, 1)",
                self.validation_fraction
            )));
        }
        self.architecture.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean cross-entropy over the training split, inference mode, after the
    /// epoch (or of the restored parameters if the epoch was undone).
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CnnModel,
    pub history: Vec<EpochStats>,
    /// Epoch (1-based) whose parameters were kept; 0 means the initial model.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Stratified split: per class, a shuffled `round(fraction * n)` samples
/// (at least one, at most `n - 1`) go to validation.
pub fn stratified_split(
    labels: &[VehicleClass],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut present = 0;
    for class in VehicleClass::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Data(format!("class {class} has {} sample, need at least 2", idx.len())));
        }
        present += 1;
        idx.shuffle(rng);
        let n_val = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    if present < 2 {
        return Err(Error::Data("training needs at least two classes".into()));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Loss and gradients of one mini-batch.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub loss: f64,
    /// Aligned with [`CnnModel::trainable`].
    pub grads: Vec<Vec<f64>>,
    /// Per block, the batch mean and variance used by batch norm.
    pub batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Mean cross-entropy of a training-mode batch and its gradient with respect
/// to every trainable parameter. `masks` are per-sample dropout scale
/// factors over the flattened features.
pub fn batch_gradient(
    model: &CnnModel,
    images: &[&ClassifierImage],
    labels: &[usize],
    masks: &[Vec<f64>],
) -> Result<BatchGradient> {
    let n_feat = model.arch.feature_len()?;
    if labels.len() != images.len() || masks.len() != images.len() || masks.iter().any(|m| m.len() != n_feat) {
        return Err(Error::Shape("images, labels, and dropout masks disagree".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= model.arch.n_classes) {
        return Err(Error::Domain(format!("label {l} outside {} classes", model.arch.n_classes)));
    }
    let fwd = forward_train(model, images, masks)?;
    let b = images.len() as f64;
    let k = model.arch.n_classes;

    let loss = fwd.probs.iter().zip(labels).map(|(p, &l)| -p[l].ln()).sum::<f64>() / b;

    // Dense layer.
    let mut g_fc_w = vec![0.0; k * n_feat];
    let mut g_fc_b = vec![0.0; k];
    let mut g_feat = Vec::with_capacity(images.len());
    for ((p, &l), (d, m)) in fwd.probs.iter().zip(labels).zip(fwd.dropped.iter().zip(masks)) {
        let ds: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(o, &po)| (po - if o == l { 1.0 } else { 0.0 }) / b)
            .collect();
        let mut gd = vec![0.0; n_feat];
        for (o, &g) in ds.iter().enumerate() {
            g_fc_b[o] += g;
            let w = &model.fc_weights[o * n_feat..(o + 1) * n_feat];
            for ((gw, gdj), (&dj, &wj)) in g_fc_w[o * n_feat..(o + 1) * n_feat]
                .iter_mut()
                .zip(gd.iter_mut())
                .zip(d.iter().zip(w))
            {
                *gw += g * dj;
                *gdj += g * wj;
            }
        }
        gd.iter_mut().zip(m).for_each(|(g, &mj)| *g *= mj);
        g_feat.push(gd);
    }

    let shapes = model.arch.block_shapes()?;
    let mut block_grads = Vec::with_capacity(shapes.len());
    let mut g_out = g_feat;
    for (bi, ((spec, p), (s, cache))) in model
        .arch
        .blocks
        .iter()
        .zip(&model.blocks)
        .zip(shapes.iter().zip(&fwd.blocks))
        .enumerate()
        .rev()
    {
        let conv_len = s.conv.len();
        // Pool, then ReLU.
        let g_y: Vec<Vec<f64>> = g_out
            .iter()
            .zip(cache.argmax.iter().zip(&cache.pre_relu))
            .map(|(g, (arg, y))| {
                let mut gy = maxpool2d_backward(g, arg, conv_len);
                gy.iter_mut().zip(y).for_each(|(gv, &yv)| {
                    if yv <= 0.0 {
                        *gv = 0.0
                    }
                });
                gy
            })
            .collect();
        let (g_z, g_gamma, g_beta) = batchnorm_backward(&g_y, &cache.xhat, s.conv, &p.gamma, &cache.inv_std);
        let want_input = bi > 0;
        let items: Vec<(&Vec<f64>, &Vec<f64>)> = cache.input.iter().zip(&g_z).collect();
        let per_sample = par::map(&items, |(x, g)| {
            conv_backward(x, s.input, &p.weights, spec.filters, spec.kernel_h, spec.kernel_w, g, want_input)
        });
        let mut g_w = vec![0.0; p.weights.len()];
        let mut g_b = vec![0.0; p.bias.len()];
        let mut g_in = Vec::with_capacity(per_sample.len());
        for cg in per_sample {
            g_w.iter_mut().zip(&cg.weights).for_each(|(a, v)| *a += v);
            g_b.iter_mut().zip(&cg.bias).for_each(|(a, v)| *a += v);
            if let Some(gi) = cg.input {
                g_in.push(gi);
            }
        }
        block_grads.push([g_w, g_b, g_gamma, g_beta]);
        g_out = g_in;
    }
    block_grads.reverse();
    let mut grads: Vec<Vec<f64>> = block_grads.into_iter().flatten().collect();
    grads.push(g_fc_w);
    grads.push(g_fc_b);
    let batch_stats = fwd.blocks.into_iter().map(|c| (c.mean, c.var)).collect();
    Ok(BatchGradient {
        loss,
        grads,
        batch_stats,
    })
}

/// Mean cross-entropy of a training-mode batch, for finite-difference checks.
pub fn batch_loss(model: &CnnModel, images: &[&ClassifierImage], labels: &[usize], masks: &[Vec<f64>]) -> Result<f64> {
    let fwd = forward_train(model, images, masks)?;
    Ok(fwd.probs.iter().zip(labels).map(|(p, &l)| -p[l].ln()).sum::<f64>() / images.len() as f64)
}

/// Mean cross-entropy of single images in inference mode and its gradient.
/// Batch norm uses the running statistics, so samples are independent.
pub fn inference_gradient(model: &CnnModel, image: &ClassifierImage, label: usize) -> Result<(f64, Vec<Vec<f64>>)> {
    // Inference mode is a training-mode pass with frozen statistics: rebuild
    // it through a per-layer walk.
    use super::layers::{conv_forward, dense_forward, maxpool2d_forward, normalize_channels, softmax};
    let shapes = model.arch.block_shapes()?;
    let eps = model.arch.bn_epsilon;
    let mut x = image.data().to_vec();
    let mut caches = Vec::new();
    for ((spec, p), s) in model.arch.blocks.iter().zip(&model.blocks).zip(&shapes) {
        let (z, cs) = conv_forward(&x, s.input, &p.weights, &p.bias, spec.kernel_h, spec.kernel_w)?;
        let inv: Vec<f64> = p.running_var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let (y, xhat) = normalize_channels(&z, cs, &p.running_mean, &inv, &p.gamma, &p.beta);
        let a: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
        let (o, _, arg) = maxpool2d_forward(&a, cs, spec.pool)?;
        caches.push((std::mem::replace(&mut x, o), y, xhat, arg, inv));
    }
    let probs = softmax(&dense_forward(&x, &model.fc_weights, &model.fc_bias));
    let loss = -probs[label].ln();
    let n_feat = x.len();
    let ds: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(o, &p)| p - if o == label { 1.0 } else { 0.0 })
        .collect();
    let mut g_fc_w = vec![0.0; ds.len() * n_feat];
    let mut g = vec![0.0; n_feat];
    for (o, &d) in ds.iter().enumerate() {
        for j in 0..n_feat {
            g_fc_w[o * n_feat + j] = d * x[j];
            g[j] += d * model.fc_weights[o * n_feat + j];
        }
    }
    let mut block_grads = Vec::new();
    for (bi, ((spec, p), (s, (input, y, xhat, arg, inv)))) in model
        .arch
        .blocks
        .iter()
        .zip(&model.blocks)
        .zip(shapes.iter().zip(&caches))
        .enumerate()
        .rev()
    {
        let mut gy = maxpool2d_backward(&g, arg, s.conv.len());
        gy.iter_mut().zip(y).for_each(|(gv, &yv)| {
            if yv <= 0.0 {
                *gv = 0.0
            }
        });
        let plane = s.conv.plane();
        let mut g_gamma = vec![0.0; spec.filters];
        let mut g_beta = vec![0.0; spec.filters];
        for c in 0..spec.filters {
            for i in c * plane..(c + 1) * plane {
                g_gamma[c] += gy[i] * xhat[i];
                g_beta[c] += gy[i];
                gy[i] *= p.gamma[c] * inv[c];
            }
        }
        let cg = conv_backward(input, s.input, &p.weights, spec.filters, spec.kernel_h, spec.kernel_w, &gy, bi > 0);
        block_grads.push([cg.weights, cg.bias, g_gamma, g_beta]);
        g = cg.input.unwrap_or_default();
    }
    block_grads.reverse();
    let mut grads: Vec<Vec<f64>> = block_grads.into_iter().flatten().collect();
    grads.push(g_fc_w);
    grads.push(ds);
    Ok((loss, grads))
}

/// Mean inference-mode cross-entropy and accuracy over `idx`.
pub fn evaluate_split(model: &CnnModel, images: &[ClassifierImage], labels: &[usize], idx: &[usize]) -> Result<(f64, f64)> {
    if idx.is_empty() {
        return Ok((0.0, 0.0));
    }
    let probs = par::try_map(idx, |&i| model.predict_proba(&images[i]))?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (p, &i) in probs.iter().zip(idx) {
        loss -= p[labels[i]].ln();
        correct += usize::from(argmax(p) == labels[i]);
    }
    let n = idx.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Batch boundaries over `n` samples; a trailing batch of one joins the one
/// before it so batch norm always sees at least two samples.
fn batches(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() < 2) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").end = last.end;
    }
    out
}

struct Snapshot {
    model: CnnModel,
    velocity: Vec<Vec<f64>>,
    stats_initialised: bool,
}

/// Train a fresh network on `images` with labels `labels`.
pub fn cnn_train(images: &[ClassifierImage], labels: &[VehicleClass], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if images.len() != labels.len() {
        return Err(Error::Data(format!("{} images but {} labels", images.len(), labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train_idx, val_idx) = stratified_split(labels, config.validation_fraction, &mut rng)?;
    let ordinals: Vec<usize> = labels.iter().map(|c| c.ordinal()).collect();
    let mut model = CnnModel::new(config.architecture.clone(), config.seed)?;
    for im in images {
        model.scores(im)?;
    }
    let n_feat = model.arch.feature_len()?;
    let decay = model.arch.bn_decay;
    let mut velocity: Vec<Vec<f64>> = model.trainable().iter().map(|t| vec![0.0; t.len()]).collect();
    let mut stats_initialised = false;
    let mut lr = config.learning_rate;

    let (mut prev_loss, _) = evaluate_split(&model, images, &ordinals, &train_idx)?;
    let (_, val0) = evaluate_split(&model, images, &ordinals, &val_idx)?;
    let mut best = (model.clone(), 0usize, val0);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order = train_idx.clone();

    for epoch in 1..=config.epochs {
        let snapshot = Snapshot {
            model: model.clone(),
            velocity: velocity.clone(),
            stats_initialised,
        };
        order.shuffle(&mut rng);
        for range in batches(order.len(), config.batch_size) {
            let idx = &order[range];
            let batch: Vec<&ClassifierImage> = idx.iter().map(|&i| &images[i]).collect();
            let y: Vec<usize> = idx.iter().map(|&i| ordinals[i]).collect();
            let masks: Vec<Vec<f64>> = idx
                .iter()
                .map(|_| dropout_mask(n_feat, model.arch.dropout, &mut rng))
                .collect();
            let g = batch_gradient(&model, &batch, &y, &masks)?;
            if !g.loss.is_finite() {
                return Err(Error::Divergence { epoch, loss: g.loss });
            }
            for ((param, vel), grad) in model.trainable_mut().into_iter().zip(&mut velocity).zip(&g.grads) {
                for ((p, v), d) in param.iter_mut().zip(vel.iter_mut()).zip(grad) {
                    *v = config.momentum * *v - lr * d;
                    *p += *v;
                }
            }
            for (block, (mean, var)) in model.blocks.iter_mut().zip(g.batch_stats) {
                if stats_initialised {
                    for (r, m) in block.running_mean.iter_mut().zip(mean) {
                        *r = decay * *r + (1.0 - decay) * m;
                    }
                    for (r, v) in block.running_var.iter_mut().zip(var) {
                        *r = decay * *r + (1.0 - decay) * v;
                    }
                } else {
                    block.running_mean = mean;
                    block.running_var = var;
                }
            }
            stats_initialised = true;
        }

        let (mut loss, mut train_acc) = evaluate_split(&model, images, &ordinals, &train_idx)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let mut rejected = false;
        if config.schedule == LrSchedule::HalveOnIncrease && loss > prev_loss {
            model = snapshot.model;
            velocity = snapshot.velocity;
            stats_initialised = snapshot.stats_initialised;
            lr /= 2.0;
            rejected = true;
            (loss, train_acc) = evaluate_split(&model, images, &ordinals, &train_idx)?;
        }
        prev_loss = loss;
        let (_, val_acc) = evaluate_split(&model, images, &ordinals, &val_idx)?;
        history.push(EpochStats {
            epoch,
            learning_rate: lr,
            train_loss: loss,
            train_accuracy: train_acc,
            val_accuracy: val_acc,
            rejected,
        });
        if val_acc > best.2 {
            best = (model.clone(), epoch, val_acc);
        }
        if config.stop_at_train_accuracy.is_some_and(|t| train_acc >= t) {
            break;
        }
        if config.patience.is_some_and(|p| epoch - best.1 >= p) {
            break;
        }
    }

    let (model, best_epoch, best_val_accuracy) = best;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_accuracy,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::layers::{PoolSpec, Shape3};
    use crate::classify::cnn::BlockSpec;
    use rand::Rng;

    fn tiny_arch() -> Architecture {
        let pool = PoolSpec {
            pool_h: 1,
            pool_w: 2,
            stride_h: 1,
            stride_w: 2,
        };
        Architecture {
            input_rows: 3,
            input_cols: 14,
            blocks: vec![
                BlockSpec {
                    filters: 2,
                    kernel_h: 2,
                    kernel_w: 3,
                    pool,
                },
                BlockSpec {
                    filters: 2,
                    kernel_h: 1,
                    kernel_w: 2,
                    pool,
                },
            ],
            dropout: 0.5,
            n_classes: 5,
            bn_epsilon: 1e-5,
            bn_decay: 0.9,
        }
    }

    fn random_image(rng: &mut ChaCha8Rng, arch: &Architecture) -> ClassifierImage {
        let n = arch.input_rows * arch.input_cols;
        ClassifierImage::from_raw(arch.input_rows, arch.input_cols, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn perturbed_model(seed: u64) -> CnnModel {
        let mut m = CnnModel::new(tiny_arch(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        for b in &mut m.blocks {
            b.gamma.iter_mut().for_each(|g| *g = rng.random_range(0.5..1.5));
            b.beta.iter_mut().for_each(|g| *g = rng.random_range(-0.3..0.3));
            b.bias.iter_mut().for_each(|g| *g = rng.random_range(-0.3..0.3));
            b.running_mean.iter_mut().for_each(|g| *g = rng.random_range(-0.2..0.2));
            b.running_var.iter_mut().for_each(|g| *g = rng.random_range(0.5..2.0));
        }
        m.fc_bias.iter_mut().for_each(|g| *g = rng.random_range(-0.3..0.3));
        m
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    }

    /// Central differences over every trainable parameter.
    fn check<F: Fn(&CnnModel) -> f64>(model: &CnnModel, analytic: &[Vec<f64>], loss: F) {
        let h = 1e-5;
        for (t, grad) in analytic.iter().enumerate() {
            for j in 0..grad.len() {
                let mut plus = model.clone();
                plus.trainable_mut()[t][j] += h;
                let mut minus = model.clone();
                minus.trainable_mut()[t][j] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let e = rel_err(grad[j], numeric);
                assert!(e < 1e-4, "tensor {t} index {j}: analytic {} numeric {numeric} rel {e}", grad[j]);
            }
        }
    }

    #[test]
    fn training_mode_gradient_matches_finite_differences() {
        let model = perturbed_model(5);
        let arch = tiny_arch();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let images: Vec<ClassifierImage> = (0..4).map(|_| random_image(&mut rng, &arch)).collect();
        let refs: Vec<&ClassifierImage> = images.iter().collect();
        let labels = vec![0, 3, 1, 4];
        let n = arch.feature_len().unwrap();
        let masks: Vec<Vec<f64>> = (0..4).map(|_| dropout_mask(n, arch.dropout, &mut rng)).collect();
        let g = batch_gradient(&model, &refs, &labels, &masks).unwrap();
        assert_eq!(g.grads.len(), model.trainable().len());
        check(&model, &g.grads, |m| batch_loss(m, &refs, &labels, &masks).unwrap());
    }

    #[test]
    fn inference_mode_gradient_matches_finite_differences() {
        let model = perturbed_model(8);
        let arch = tiny_arch();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let image = random_image(&mut rng, &arch);
        let (loss, grads) = inference_gradient(&model, &image, 2).unwrap();
        assert!((loss + model.predict_proba(&image).unwrap()[2].ln()).abs() < 1e-12);
        check(&model, &grads, |m| -m.predict_proba(&image).unwrap()[2].ln());
    }

    #[test]
    fn batches_never_leave_a_single_sample() {
        assert_eq!(batches(33, 16), vec![0..16, 16..33]);
        assert_eq!(batches(34, 16), vec![0..16, 16..32, 32..34]);
        assert_eq!(batches(5, 16), vec![0..5]);
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<VehicleClass> = VehicleClass::ALL.iter().flat_map(|&c| [c; 10]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (train, val) = stratified_split(&labels, 0.3, &mut rng).unwrap();
        assert_eq!(val.len(), 15);
        assert_eq!(train.len(), 35);
        for c in VehicleClass::ALL {
            assert_eq!(val.iter().filter(|&&i| labels[i] == c).count(), 3);
        }
        let mut few = labels.clone();
        few.push(VehicleClass::Bike);
        few.retain(|&c| c != VehicleClass::Suv);
        few.push(VehicleClass::Suv);
        assert!(matches!(stratified_split(&few, 0.3, &mut rng), Err(Error::Data(_))));
    }

    #[test]
    fn bad_config_is_rejected() {
        let mut c = TrainConfig::default();
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.validation_fraction = 1.0;
        assert!(c.validate().is_err());
        let _ = Shape3::new(1, 1, 1);
    }

    #[test]
    fn divergence_reports_epoch() {
        let arch = tiny_arch();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let images: Vec<ClassifierImage> = (0..10)
            .map(|_| {
                let im = random_image(&mut rng, &arch);
                ClassifierImage::from_raw(3, 14, im.data().iter().map(|v| v * 1e3).collect()).unwrap()
            })
            .collect();
        let labels: Vec<VehicleClass> = (0..10).map(|i| VehicleClass::ALL[i % 5]).collect();
        let config = TrainConfig {
            architecture: arch,
            learning_rate: 1e12,
            batch_size: 2,
            schedule: LrSchedule::Constant,
            epochs: 5,
            ..TrainConfig::default()
        };
        match cnn_train(&images, &labels, &config) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
