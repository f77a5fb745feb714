//! Numerical checks against independent oracles. Each returns a short
//! summary on success and a description of the first violation otherwise,
//! so the same code backs the unit-style tests and the acceptance report.

use csi_traffic::classify::{
    batch_gradient, batch_loss, cnn_forward, cnn_forward_batch, inference_gradient, ClassifierImage, CnnModel, Mode,
};
use csi_traffic::detect::{c_mad, detect_outliers, event_windows, scaled_mad, Centering, DetectorParams};
use csi_traffic::preprocess::{
    jacobi_eigen, lowpass_filter, pca_columns, phase_transform, sanitize_phase, FilterSpec, DEFAULT_CUTOFF_HZ,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;

pub type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

const FS: f64 = 2500.0;

/// Zero-phase response measured on sinusoids: at most 1 dB loss below
/// 0.8 x cutoff, at least 20 dB attenuation above 2.5 x cutoff.
pub fn filter_response() -> Check {
    let spec = FilterSpec::lowpass(DEFAULT_CUTOFF_HZ, FS);
    let gain_db = |f: f64| -> Result<f64, String> {
        let x = sinusoid(f, FS, 10.0);
        let y = lowpass_filter(&x, &spec).map_err(|e| e.to_string())?;
        Ok(20.0 * (mid_rms(&y) / mid_rms(&x)).log10())
    };
    let mut worst_pass = 0.0_f64;
    for f in [0.5, 2.0, 5.0, 10.0, 15.0, 20.0, 25.0, 28.0, 30.0, 0.8 * DEFAULT_CUTOFF_HZ] {
        let g = gain_db(f)?;
        ensure(g.abs() <= 1.0, || format!("passband {f} Hz gain {g:.3} dB"))?;
        worst_pass = worst_pass.max(g.abs());
    }
    let mut worst_stop = f64::NEG_INFINITY;
    for f in [2.5 * DEFAULT_CUTOFF_HZ, 100.0, 150.0, 200.0, 400.0, 800.0, 1200.0] {
        let g = gain_db(f)?;
        ensure(g <= -20.0, || format!("stopband {f} Hz gain {g:.3} dB"))?;
        worst_stop = worst_stop.max(g);
    }
    let dc = lowpass_filter(&vec![3.25; 5000], &spec).map_err(|e| e.to_string())?;
    ensure(dc.iter().all(|v| (v - 3.25).abs() <= 1e-6), || "DC gain is not 1".into())?;
    let g10 = mid_rms(&lowpass_filter(&sinusoid(10.0, FS, 10.0), &spec).unwrap()) / mid_rms(&sinusoid(10.0, FS, 10.0));
    let g200 = mid_rms(&lowpass_filter(&sinusoid(200.0, FS, 10.0), &spec).unwrap()) / mid_rms(&sinusoid(200.0, FS, 10.0));
    ensure(g10 >= 0.99, || format!("10 Hz RMS ratio {g10}"))?;
    ensure(g200 <= 0.1, || format!("200 Hz RMS ratio {g200}"))?;
    Ok(format!("worst passband {worst_pass:.3} dB, weakest stopband {worst_stop:.1} dB"))
}

fn random_columns(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Mixed scales so the spectrum is well separated.
    (0..30)
        .map(|s| {
            let scale = 1.0 + s as f64 * 0.37;
            (0..n)
                .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); scale * z + 5.0 })
                .collect::<Vec<f64>>()
        })
        .collect()
}

fn vec_close_up_to_sign(a: &[f64], b: &[f64], tol: f64) -> bool {
    let plus = a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol);
    let minus = a.iter().zip(b).all(|(x, y)| (x + y).abs() <= tol);
    plus || minus
}

/// Eigen-decomposition of the scatter matrix against nalgebra, plus the
/// hand-derived rank-1 and identical-column fixtures.
pub fn pca_eigen() -> Check {
    let cols = random_columns(400, 11);
    let s = scatter(&cols);
    let (values, vectors) = nalgebra_eigen(&s, 30);
    let mine = jacobi_eigen(&s, 30).map_err(|e| e.to_string())?;
    let scale = values[0];
    let mut worst = 0.0_f64;
    for i in 0..30 {
        let dv = (mine.values[i] - values[i]).abs() / scale;
        ensure(dv <= 1e-8, || format!("eigenvalue {i}: {} vs {}", mine.values[i], values[i]))?;
        let plus: f64 = mine.vectors[i].iter().zip(&vectors[i]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let minus: f64 = mine.vectors[i].iter().zip(&vectors[i]).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        let dvec = plus.min(minus);
        ensure(dvec <= 1e-8, || format!("eigenvector {i} differs by {dvec:e}"))?;
        worst = worst.max(dv).max(dvec);
    }
    let pca = pca_columns(cols.clone(), 30).map_err(|e| e.to_string())?;
    for (i, (a, b)) in pca.eigenvalues.iter().zip(&values).enumerate() {
        ensure((a - b).abs() / scale <= 1e-8, || format!("PCA eigenvalue {i}: {a} vs {b}"))?;
    }
    let trace: f64 = (0..30).map(|i| s[i * 30 + i]).sum();
    let sum: f64 = pca.all_eigenvalues.iter().sum();
    ensure((sum - trace).abs() <= 1e-8 * trace, || format!("eigenvalue sum {sum} vs trace {trace}"))?;
    let proj_cov = scatter(&pca.projected);
    for i in 0..30 {
        for j in 0..30 {
            if i != j {
                let off = proj_cov[i * 30 + j].abs();
                ensure(off <= 1e-6 * scale, || format!("projected streams {i},{j} correlate: {off}"))?;
            }
        }
    }

    // Rank one: centred u times w.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 300;
    let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mu = u.iter().sum::<f64>() / n as f64;
    u.iter_mut().for_each(|v| *v -= mu);
    let w: Vec<f64> = (0..30).map(|_| rng.random_range(0.2..2.0)).collect();
    let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rank1: Vec<Vec<f64>> = w.iter().map(|&ws| u.iter().map(|&ui| ui * ws).collect()).collect();
    let r = pca_columns(rank1, 2).map_err(|e| e.to_string())?;
    let unit: Vec<f64> = w.iter().map(|v| v / wn).collect();
    ensure(vec_close_up_to_sign(&r.components[0], &unit, 1e-8), || "rank-1 eigenvector is not w/|w|".into())?;
    ensure(r.eigenvalues[1] <= 1e-9, || format!("rank-1 second eigenvalue {}", r.eigenvalues[1]))?;

    // Thirty identical columns.
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let xm = x.iter().sum::<f64>() / n as f64;
    let r = pca_columns(vec![x.clone(); 30], 1).map_err(|e| e.to_string())?;
    let expect: Vec<f64> = x.iter().map(|v| 30f64.sqrt() * (v - xm)).collect();
    ensure(vec_close_up_to_sign(&r.projected[0], &expect, 1e-8), || {
        "identical columns: first stream is not sqrt(30)(x - mean)".into()
    })?;
    let top = r.all_eigenvalues[0];
    ensure(r.all_eigenvalues[1..].iter().all(|v| v.abs() <= 1e-9 * top), || {
        "identical columns: trailing eigenvalues are not 0".into()
    })?;
    Ok(format!("max deviation from nalgebra {worst:.1e}"))
}

/// Keeping all 30 components and adding back the means recovers the input.
pub fn pca_reconstruction() -> Check {
    let cols = random_columns(250, 23);
    let r = pca_columns(cols.clone(), 30).map_err(|e| e.to_string())?;
    let back = r.reconstruct();
    let mut worst = 0.0_f64;
    for p in 0..250 {
        for s in 0..30 {
            worst = worst.max((back[p * 30 + s] - cols[s][p]).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("reconstruction error {worst:e}"))?;
    Ok(format!("max error {worst:.1e}"))
}

/// Direct evaluation: `x_f - f (x_30 - x_1) / (2 pi 30) - mean(x)`, f = 1..30.
pub fn phase_formula(x: &[f64; 30]) -> [f64; 30] {
    let e1 = (x[29] - x[0]) / (2.0 * std::f64::consts::PI * 30.0);
    let e2 = x.iter().sum::<f64>() / 30.0;
    let mut out = [0.0; 30];
    for f in 0..30 {
        out[f] = x[f] - e1 * (f + 1) as f64 - e2;
    }
    out
}

/// Constant offsets vanish exactly; the transform is linear and matches the
/// formula evaluated directly.
pub fn phase_sanitisation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let zero = sanitize_phase(&[0.0; 30]).map_err(|e| e.to_string())?;
    ensure(zero.iter().all(|&v| v == 0.0), || "zero input gives nonzero output".into())?;
    let beta = sanitize_phase(&[1.234; 30]).map_err(|e| e.to_string())?;
    ensure(beta.iter().all(|&v| v == 0.0), || format!("constant input gives {beta:?}"))?;
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        // Dyadic values keep every sum exact, so invariance must be bitwise.
        let x: [f64; 30] = std::array::from_fn(|_| rng.random_range(-512i32..512) as f64 / 1024.0);
        let c = rng.random_range(-64i32..64) as f64 / 32.0;
        let shifted: [f64; 30] = std::array::from_fn(|i| x[i] + c);
        let a = sanitize_phase(&x).map_err(|e| e.to_string())?;
        let b = sanitize_phase(&shifted).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("offset {c} changes the output"))?;

        // Small values never trigger unwrapping, so the map is linear.
        let x: [f64; 30] = std::array::from_fn(|_| rng.random_range(-0.1..0.1));
        let y: [f64; 30] = std::array::from_fn(|_| rng.random_range(-0.1..0.1));
        let k = rng.random_range(-5.0..5.0);
        let tx = sanitize_phase(&x).unwrap();
        let ty = sanitize_phase(&y).unwrap();
        let sum: [f64; 30] = std::array::from_fn(|i| x[i] + y[i]);
        let scaled: [f64; 30] = std::array::from_fn(|i| k * x[i]);
        let txy = sanitize_phase(&sum).unwrap();
        let tkx = sanitize_phase(&scaled).unwrap();
        let direct = phase_formula(&x);
        for i in 0..30 {
            let e = (txy[i] - tx[i] - ty[i])
                .abs()
                .max((tkx[i] - k * tx[i]).abs())
                .max((tx[i] - direct[i]).abs());
            worst = worst.max(e);
        }
        let wide: [f64; 30] = std::array::from_fn(|_| rng.random_range(-40.0..40.0));
        let d = phase_transform(&wide);
        let w = phase_formula(&wide);
        for i in 0..30 {
            worst = worst.max((d[i] - w[i]).abs() / 40.0);
        }
    }
    ensure(worst <= 1e-12, || format!("linearity / formula error {worst:e}"))?;
    Ok(format!("offset invariance exact, linearity error {worst:.1e}"))
}

/// The MAD consistency constant against bisection on erfc, and the scaled
/// MAD and outlier-rule fixtures.
pub fn mad_rule() -> Check {
    let oracle = consistency_constant();
    let c = c_mad();
    ensure((c - oracle).abs() <= 5e-5, || format!("c_MAD {c} vs oracle {oracle}"))?;
    ensure((c - 1.4826).abs() <= 5e-5, || format!("c_MAD {c} vs 1.4826"))?;
    let m = |s: &[f64]| scaled_mad(s).map_err(|e| e.to_string());
    ensure(m(&[4.5; 17])? == 0.0, || "constant series has nonzero MAD".into())?;
    let nine: Vec<f64> = (1..=9).map(f64::from).collect();
    let v = m(&nine)?;
    ensure((v - 2.0 * oracle).abs() <= 1e-4, || format!("scaled MAD of 1..9 is {v}"))?;
    let scaled: Vec<f64> = nine.iter().map(|x| x * 3.5).collect();
    ensure(m(&scaled)? == 3.5 * v, || "scaled MAD is not homogeneous".into())?;
    let flags = detect_outliers(&[0.0, 0.0, 0.0, 0.0, 100.0], 3.0, Centering::Mean).map_err(|e| e.to_string())?;
    ensure(flags == vec![true; 5], || format!("{{0,0,0,0,100}} flags {flags:?}"))?;
    ensure(
        detect_outliers(&[2.0; 50], 3.0, Centering::Mean).unwrap().iter().all(|f| !f),
        || "constant series flags outliers".into(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut g: Vec<f64> = (0..10_000).map(|_| -> f64 { StandardNormal.sample(&mut rng) }).collect();
    g[5000] += 20.0;
    let flags = detect_outliers(&g, 3.0, Centering::Mean).unwrap();
    ensure(flags[5000], || "spike at 5000 not flagged".into())?;
    // Direct evaluation of |a - mean| > 3 * scaled MAD.
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let mut sorted = g.clone();
    sorted.sort_by(f64::total_cmp);
    let med = 0.5 * (sorted[4999] + sorted[5000]);
    let mut dev: Vec<f64> = g.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = oracle * 0.5 * (dev[4999] + dev[5000]);
    let expect: Vec<bool> = g.iter().map(|v| (v - mean).abs() > 3.0 * mad).collect();
    ensure(flags == expect, || "outlier mask differs from the direct rule".into())?;
    Ok(format!("c_MAD {c:.6}, oracle {oracle:.6}"))
}

fn mask(n: usize, runs: &[(usize, usize)]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &(s, f) in runs {
        m[s..=f].iter_mut().for_each(|v| *v = true);
    }
    m
}

/// Hand-traced windows of the run-length scan.
pub fn event_scan() -> Check {
    let p = DetectorParams::default();
    let cases: Vec<(&str, Vec<bool>, Vec<(usize, usize)>)> = vec![
        ("run 5000..=6999", mask(10_000, &[(5000, 6999)]), vec![(4500, 7499)]),
        ("run shorter than omega", mask(10_000, &[(5000, 5999)]), vec![]),
        ("run at index 100", mask(10_000, &[(100, 2099)]), vec![]),
        ("run of exactly omega", mask(10_000, &[(3000, 4249)]), vec![(2500, 4749)]),
        ("run of omega - 1", mask(10_000, &[(3000, 4248)]), vec![]),
        ("run open at the end", mask(10_000, &[(8000, 9999)]), vec![]),
        ("run too near the end", mask(10_000, &[(8000, 9600)]), vec![]),
        (
            "short blip then a vehicle",
            mask(20_000, &[(2000, 2010), (2020, 3999), (9000, 10_499)]),
            vec![(1520, 4499), (8500, 10_999)],
        ),
    ];
    for (name, m, want) in &cases {
        let got = event_windows(m, &p);
        ensure(&got == want, || format!("{name}: got {got:?}, want {want:?}"))?;
        ensure(got.iter().all(|&(_, b)| b < m.len()), || format!("{name}: window outside the trace"))?;
    }
    Ok(format!("{} fixtures", cases.len()))
}

fn random_images(n: usize, rows: usize, cols: usize, seed: u64) -> Vec<ClassifierImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ClassifierImage::from_raw(rows, cols, random_pixels(rows, cols, &mut rng)).unwrap())
        .collect()
}

/// Library forward passes against the nested-loop reference, in inference
/// mode and in training mode with dropout disabled.
pub fn cnn_forward_oracle() -> Check {
    let mut worst = 0.0_f64;
    for seed in 0..5 {
        let model = random_model(tiny_arch(0.0), seed);
        let images = random_images(6, 4, 14, 100 + seed);
        let raw: Vec<Vec<f64>> = images.iter().map(|im| im.data().to_vec()).collect();
        let want = reference_forward(&model, &raw, false);
        for (im, w) in images.iter().zip(&want) {
            let got = cnn_forward(&model, im, Mode::Inference).map_err(|e| e.to_string())?;
            for (a, b) in got.iter().zip(w) {
                worst = worst.max((a - b).abs());
            }
        }
        let refs: Vec<&ClassifierImage> = images.iter().collect();
        let got = cnn_forward_batch(&model, &refs, Mode::Training, seed).map_err(|e| e.to_string())?;
        let want = reference_forward(&model, &raw, true);
        for (g, w) in got.iter().zip(&want) {
            for (a, b) in g.iter().zip(w) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("forward pass differs by {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn fd_check(model: &CnnModel, analytic: &[Vec<f64>], loss: &dyn Fn(&CnnModel) -> f64) -> Result<(usize, f64), String> {
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (t, grad) in analytic.iter().enumerate() {
        for (j, &g) in grad.iter().enumerate() {
            let mut plus = model.clone();
            plus.trainable_mut()[t][j] += h;
            let mut minus = model.clone();
            minus.trainable_mut()[t][j] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let e = rel_err(g, numeric);
            ensure(e < 1e-4, || format!("tensor {t} entry {j}: analytic {g}, numeric {numeric}, rel {e:e}"))?;
            worst = worst.max(e);
            count += 1;
        }
    }
    Ok((count, worst))
}

/// Back-propagated gradients against central differences on every
/// trainable parameter, for a dropout-masked training batch and for a
/// single image in inference mode.
pub fn gradients() -> Check {
    let model = random_model(tiny_arch(0.5), 42);
    let images = random_images(5, 4, 14, 7);
    let refs: Vec<&ClassifierImage> = images.iter().collect();
    let labels = vec![0, 3, 1, 4, 3];
    let n_feat = model.arch.feature_len().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let masks: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..n_feat).map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { 2.0 }).collect())
        .collect();
    let g = batch_gradient(&model, &refs, &labels, &masks).map_err(|e| e.to_string())?;
    let (n1, w1) = fd_check(&model, &g.grads, &|m| batch_loss(m, &refs, &labels, &masks).unwrap())?;

    let (_, grads) = inference_gradient(&model, &images[0], 2).map_err(|e| e.to_string())?;
    let (n2, w2) = fd_check(&model, &grads, &|m| {
        -cnn_forward(m, &images[0], Mode::Inference).unwrap()[2].ln()
    })?;
    Ok(format!("{} parameters x 2 modes, worst rel {:.1e}", n1.max(n2), w1.max(w2)))
}
