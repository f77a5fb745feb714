//! Principal component analysis of a packet x subcarrier amplitude matrix.
//!
//! Columns are mean-centred, the scatter matrix `H^T H` is formed, and its
//! eigenvectors are found with cyclic Jacobi rotations. Each eigenvector is
//! flipped so its largest-magnitude entry is positive.

use crate::error::{Error, Result};
use crate::trace::{AmplitudeMatrix, N_SUBCARRIERS};

const DIM: usize = N_SUBCARRIERS;

/// Symmetric eigendecomposition result: eigenvalues in nonincreasing order,
/// `vectors[i]` the unit eigenvector for `values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi eigensolver for a dense symmetric `n x n` matrix (row-major).
///
/// Sweeps until the off-diagonal Frobenius norm falls below
/// `1e-12 * ||A||_F`.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> Result<SymmetricEigen> {
    if matrix.len() != n * n || n == 0 {
        return Err(Error::Shape(format!("expected {n}x{n} matrix, got {} entries", matrix.len())));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * frob;
    let off = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&a) > tol {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::Domain("Jacobi eigensolver failed to converge".into()));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A <- J^T A J on rows/columns p and q.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut col: Vec<f64> = (0..n).map(|k| v[k * n + i]).collect();
            canonical_sign(&mut col);
            col
        })
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// Make the largest-magnitude entry positive (first one on ties).
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Outcome of PCA on one antenna pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// `components[i]` is the i-th eigenvector (length 30).
    pub components: Vec<Vec<f64>>,
    /// Nonincreasing eigenvalues of `H^T H`, one per kept component.
    pub eigenvalues: Vec<f64>,
    /// `projected[i]` is the i-th principal component stream (length N).
    pub projected: Vec<Vec<f64>>,
    pub column_means: Vec<f64>,
    /// All 30 eigenvalues, for diagnostics.
    pub all_eigenvalues: Vec<f64>,
}

impl PcaResult {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// The single stream used downstream.
    pub fn first_stream(&self) -> &[f64] {
        &self.projected[0]
    }

    /// Rebuild the amplitude matrix from the kept components plus the means.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.projected[0].len();
        let mut out = Vec::with_capacity(n * DIM);
        for p in 0..n {
            for s in 0..DIM {
                let v: f64 = self
                    .components
                    .iter()
                    .zip(&self.projected)
                    .map(|(q, h)| h[p] * q[s])
                    .sum();
                out.push(v + self.column_means[s]);
            }
        }
        out
    }
}

/// Centre each column in place and return the means.
fn centre_columns(columns: &mut [Vec<f64>]) -> Vec<f64> {
    columns
        .iter_mut()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            c.iter_mut().for_each(|v| *v -= m);
            m
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Scatter matrix `H^T H` of already-centred columns. Works through the
/// packets in blocks so every block stays in cache for all 465 products.
fn scatter(columns: &[Vec<f64>]) -> Vec<f64> {
    const BLOCK: usize = 512;
    let n = columns[0].len();
    let mut cov = vec![0.0; DIM * DIM];
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        for i in 0..DIM {
            let a = &columns[i][start..end];
            for j in i..DIM {
                cov[i * DIM + j] += dot(a, &columns[j][start..end]);
            }
        }
    }
    for i in 0..DIM {
        for j in 0..i {
            cov[i * DIM + j] = cov[j * DIM + i];
        }
    }
    cov
}

/// PCA denoising/reduction of one antenna pair's amplitudes, keeping `k`
/// components.
pub fn pca_denoise(amplitudes: &AmplitudeMatrix, k: usize) -> Result<PcaResult> {
    pca_rows(amplitudes.entries(), amplitudes.n_packets(), k)
}

/// PCA over any row-major `n x 30` matrix.
pub(crate) fn pca_rows(entries: &[f64], n: usize, k: usize) -> Result<PcaResult> {
    debug_assert_eq!(entries.len(), n * DIM);
    let columns = (0..DIM)
        .map(|s| entries.iter().skip(s).step_by(DIM).copied().collect())
        .collect();
    pca_columns(columns, k)
}

/// PCA over 30 subcarrier columns of equal length, consuming them.
pub fn pca_columns(mut columns: Vec<Vec<f64>>, k: usize) -> Result<PcaResult> {
    if !(1..=DIM).contains(&k) {
        return Err(Error::Domain(format!("k = {k} must lie in 1..=30")));
    }
    if columns.len() != DIM {
        return Err(Error::Shape(format!("expected {DIM} columns, got {}", columns.len())));
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Shape("columns differ in length".into()));
    }
    if n < 2 {
        return Err(Error::Degenerate(format!("PCA needs at least 2 packets, got {n}")));
    }
    let means = centre_columns(&mut columns);
    let eig = jacobi_eigen(&scatter(&columns), DIM)?;

    let components: Vec<Vec<f64>> = eig.vectors[..k].to_vec();
    let projected = components
        .iter()
        .map(|q| {
            let mut h = vec![0.0; n];
            for (col, &w) in columns.iter().zip(q) {
                for (o, v) in h.iter_mut().zip(col) {
                    *o += w * v;
                }
            }
            h
        })
        .collect();
    Ok(PcaResult {
        components,
        eigenvalues: eig.values[..k].to_vec(),
        projected,
        column_means: means,
        all_eigenvalues: eig.values,
    })
}
