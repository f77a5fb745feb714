//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numeric kernels.
#![allow(dead_code)]

pub mod checks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csi_traffic::classify::{Architecture, BlockSpec, CnnModel, PoolSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Run the command-line binary with `args`.
pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csi-traffic"))
        .args(args)
        .output()
        .expect("spawn csi-traffic")
}

pub fn cli_ok(args: &[&str]) {
    let out = cli(args);
    assert!(
        out.status.success(),
        "csi-traffic {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Every file [`run_chain`] writes, relative to its output directory.
pub const CHAIN_FILES: [&str; 11] = [
    "gen/trace.csi",
    "gen/trace.labels.jsonl",
    "gen/scenario.json",
    "streams.csv",
    "streams.svg",
    "events/trace.jsonl",
    "events/trace.bin",
    "model.wtcn",
    "model2.wtcn",
    "pred.jsonl",
    "report.json",
];

pub fn write_plan(dir: &Path) -> String {
    let classes: Vec<&str> = ["bike", "car", "suv", "pickup", "truck"].iter().flat_map(|c| [*c; 3]).collect();
    let plan = serde_json::json!({ "n_events": classes.len(), "classes": classes });
    let path = dir.join("plan.json");
    fs::write(&path, plan.to_string()).unwrap();
    path_str(&path).to_string()
}

/// Both files exist, are non-empty, and hold the same bytes.
pub fn same_bytes(a: &Path, b: &Path) -> Result<(), String> {
    let read = |p: &Path| fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    let (x, y) = (read(a)?, read(b)?);
    if x.is_empty() {
        return Err(format!("{} is empty", a.display()));
    }
    if x != y {
        return Err(format!("{} and {} differ", a.display(), b.display()));
    }
    Ok(())
}

/// Run the whole tool chain into `root/<tag>` and return that directory.
pub fn run_chain(root: &Path, plan: &str, tag: &str) -> PathBuf {
    let out = root.join(tag);
    let gen = out.join("gen");
    let ev = out.join("events");
    fs::create_dir_all(&ev).unwrap();
    let p = |x: &Path| path_str(x).to_string();
    cli_ok(&["generate", "--scenario", plan, "--seed", "5", "--out", &p(&gen)]);
    let trace = p(&gen.join("trace.csi"));
    cli_ok(&["preprocess", "--trace", &trace, "--out", &p(&out.join("streams.csv"))]);
    cli_ok(&["plot", "--series", &p(&out.join("streams.csv")), "--out", &p(&out.join("streams.svg"))]);
    cli_ok(&[
        "detect",
        "--trace",
        &trace,
        "--labels",
        &p(&gen.join("trace.labels.jsonl")),
        "--out",
        &p(&ev.join("trace.jsonl")),
    ]);
    cli_ok(&[
        "train",
        "--events",
        &p(&ev),
        "--out",
        &p(&out.join("model.wtcn")),
        "--epochs",
        "3",
        "--seed",
        "11",
    ]);
    cli_ok(&[
        "train",
        "--events",
        &p(&ev),
        "--out",
        &p(&out.join("model2.wtcn")),
        "--epochs",
        "2",
        "--seed",
        "12",
    ]);
    cli_ok(&[
        "classify",
        "--events",
        &p(&ev),
        "--model",
        &p(&out.join("model.wtcn")),
        "--model2",
        &p(&out.join("model2.wtcn")),
        "--fuse",
        "max-prob",
        "--out",
        &p(&out.join("pred.jsonl")),
    ]);
    cli_ok(&[
        "evaluate",
        "--pred",
        &p(&out.join("pred.jsonl")),
        "--truth",
        &p(&gen),
        "--scheme",
        "sml",
        "--report",
        &p(&out.join("report.json")),
        "--repeat",
        "4",
    ]);
    out
}

/// Inverse of the complementary error function by bisection on `libm::erfc`.
pub fn erfc_inv_bisect(y: f64) -> f64 {
    // erfc is strictly decreasing; erfc(0) = 1, so y < 1 puts the root above 0.
    let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if libm::erfc(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `1 / (sqrt(2) * erfc^-1(3/2))`, i.e. `-1 / (sqrt(2) * erfc^-1(1/2))`.
pub fn consistency_constant() -> f64 {
    1.0 / (2f64.sqrt() * erfc_inv_bisect(0.5))
}

/// Two small blocks over a 4 x 14 input, five classes.
pub fn tiny_arch(dropout: f64) -> Architecture {
    Architecture {
        input_rows: 4,
        input_cols: 14,
        blocks: vec![
            BlockSpec {
                filters: 2,
                kernel_h: 2,
                kernel_w: 3,
                pool: PoolSpec {
                    pool_h: 1,
                    pool_w: 2,
                    stride_h: 1,
                    stride_w: 2,
                },
            },
            BlockSpec {
                filters: 3,
                kernel_h: 2,
                kernel_w: 2,
                pool: PoolSpec {
                    pool_h: 2,
                    pool_w: 2,
                    stride_h: 1,
                    stride_w: 1,
                },
            },
        ],
        dropout,
        n_classes: 5,
        bn_epsilon: 1e-5,
        bn_decay: 0.9,
    }
}

/// A model with every parameter, including running statistics, randomised.
pub fn random_model(arch: Architecture, seed: u64) -> CnnModel {
    let mut m = CnnModel::new(arch, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for b in &mut m.blocks {
        b.bias.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        b.gamma.iter_mut().for_each(|v| *v = rng.random_range(0.5..1.5));
        b.beta.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        b.running_mean.iter_mut().for_each(|v| *v = rng.random_range(-0.2..0.2));
        b.running_var.iter_mut().for_each(|v| *v = rng.random_range(0.5..2.0));
    }
    m.fc_bias.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
    m
}

pub fn random_pixels(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Feature map `[c][h][w]` as nested vectors.
type Map = Vec<Vec<Vec<f64>>>;

fn naive_conv(x: &Map, w: &[f64], bias: &[f64], kh: usize, kw: usize) -> Map {
    let (c_in, h, wd) = (x.len(), x[0].len(), x[0][0].len());
    let (oh, ow) = (h - kh + 1, wd - kw + 1);
    let mut out = vec![vec![vec![0.0; ow]; oh]; bias.len()];
    for (o, plane) in out.iter_mut().enumerate() {
        for (y, row) in plane.iter_mut().enumerate() {
            for (xx, v) in row.iter_mut().enumerate() {
                let mut s = bias[o];
                for c in 0..c_in {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            s += w[o * c_in * kh * kw + c * kh * kw + dy * kw + dx] * x[c][y + dy][xx + dx];
                        }
                    }
                }
                *v = s;
            }
        }
    }
    out
}

fn naive_pool(x: &Map, p: &PoolSpec) -> Map {
    let (h, w) = (x[0].len(), x[0][0].len());
    let oh = (h - p.pool_h) / p.stride_h + 1;
    let ow = (w - p.pool_w) / p.stride_w + 1;
    x.iter()
        .map(|plane| {
            (0..oh)
                .map(|oy| {
                    (0..ow)
                        .map(|ox| {
                            let mut m = f64::NEG_INFINITY;
                            for dy in 0..p.pool_h {
                                for dx in 0..p.pool_w {
                                    m = m.max(plane[oy * p.stride_h + dy][ox * p.stride_w + dx]);
                                }
                            }
                            m
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn naive_softmax(s: &[f64]) -> Vec<f64> {
    let z: f64 = s.iter().map(|v| v.exp()).sum();
    s.iter().map(|v| v.exp() / z).collect()
}

/// Brute-force forward pass over a batch. With `batch_stats` the batch norm
/// uses per-channel statistics over the whole batch (biased variance);
/// otherwise the stored running statistics. Dropout is not applied.
pub fn reference_forward(model: &CnnModel, images: &[Vec<f64>], batch_stats: bool) -> Vec<Vec<f64>> {
    let a = &model.arch;
    let mut maps: Vec<Map> = images
        .iter()
        .map(|im| vec![(0..a.input_rows).map(|r| im[r * a.input_cols..(r + 1) * a.input_cols].to_vec()).collect()])
        .collect();
    for (spec, p) in a.blocks.iter().zip(&model.blocks) {
        let conv: Vec<Map> = maps
            .iter()
            .map(|m| naive_conv(m, &p.weights, &p.bias, spec.kernel_h, spec.kernel_w))
            .collect();
        let n_ch = spec.filters;
        let (mean, var): (Vec<f64>, Vec<f64>) = if batch_stats {
            (0..n_ch)
                .map(|c| {
                    let vals: Vec<f64> = conv.iter().flat_map(|m| m[c].iter().flatten().copied()).collect();
                    let mu = vals.iter().sum::<f64>() / vals.len() as f64;
                    let v = vals.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / vals.len() as f64;
                    (mu, v)
                })
                .unzip()
        } else {
            (p.running_mean.clone(), p.running_var.clone())
        };
        maps = conv
            .into_iter()
            .map(|m| {
                let act: Map = m
                    .into_iter()
                    .enumerate()
                    .map(|(c, plane)| {
                        plane
                            .into_iter()
                            .map(|row| {
                                row.into_iter()
                                    .map(|z| {
                                        let y = p.gamma[c] * (z - mean[c]) / (var[c] + a.bn_epsilon).sqrt() + p.beta[c];
                                        if y > 0.0 {
                                            y
                                        } else {
                                            0.0
                                        }
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                naive_pool(&act, &spec.pool)
            })
            .collect();
    }
    maps.iter()
        .map(|m| {
            let flat: Vec<f64> = m.iter().flatten().flatten().copied().collect();
            let scores: Vec<f64> = (0..a.n_classes)
                .map(|k| model.fc_bias[k] + (0..flat.len()).map(|i| model.fc_weights[k * flat.len() + i] * flat[i]).sum::<f64>())
                .collect();
            naive_softmax(&scores)
        })
        .collect()
}

/// Dense symmetric eigen-decomposition through nalgebra, eigenvalues sorted
/// descending.
pub fn nalgebra_eigen(cov: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = nalgebra::DMatrix::from_row_slice(n, n, cov);
    let e = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| e.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, vectors)
}

/// Scatter matrix of the centred columns, `sum (a - mean a)(b - mean b)`.
pub fn scatter(columns: &[Vec<f64>]) -> Vec<f64> {
    let d = columns.len();
    let n = columns[0].len() as f64;
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum::<f64>();
        }
    }
    cov
}

/// RMS of the middle half of a sequence, away from filter edge effects.
pub fn mid_rms(x: &[f64]) -> f64 {
    let a = x.len() / 4;
    let mid = &x[a..x.len() - a];
    (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt()
}

pub fn sinusoid(freq_hz: f64, fs: f64, seconds: f64) -> Vec<f64> {
    let n = (fs * seconds) as usize;
    (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * freq_hz * i as f64 / fs).sin())
        .collect()
}
