//! Amplitude denoising, dimension reduction, and phase sanitisation.

mod filter;
mod pca;
mod phase;

pub use filter::{
    lowpass_filter, Biquad, Butterworth, FilterMode, FilterSpec, CARRIER_HZ, DEFAULT_CUTOFF_HZ,
    DEFAULT_ORDER, SLOW_OBJECT_SPEED_MPS, WAVELENGTH_M,
};
pub use pca::{jacobi_eigen, pca_columns, pca_denoise, PcaResult, SymmetricEigen};
pub use phase::{
    phase_transform, reduce_phase, sanitize_and_reduce, sanitize_phase, sanitize_phase_matrix, unwrap,
    PhaseReduction,
    SanitizedPhase,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, StageContext};
use crate::par;
use crate::trace::{CsiTrace, N_SUBCARRIERS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub cutoff_hz: f64,
    pub mode: FilterMode,
    pub order: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            mode: FilterMode::Lowpass,
            order: DEFAULT_ORDER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaConfig {
    /// Components kept. `k = 30` keeps the full basis, i.e. PCA is a
    /// passthrough and the per-pair stream is the centred subcarrier mean.
    pub k: usize,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self { k: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PreprocessConfig {
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub pca: PcaConfig,
    #[serde(default)]
    pub phase_reduction: PhaseReduction,
}

/// Per-pair streams ready for detection: one amplitude stream and one phase
/// stream per antenna pair, all of the trace's length.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedTrace {
    pub sample_rate_hz: f64,
    pub amplitude: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
    /// Leading eigenvalues per pair (empty in passthrough mode).
    pub eigenvalues: Vec<Vec<f64>>,
}

impl PreprocessedTrace {
    pub fn n_packets(&self) -> usize {
        self.amplitude.first().map_or(0, Vec::len)
    }

    pub fn n_pairs(&self) -> usize {
        self.amplitude.len()
    }
}

fn amplitude_stream(
    trace: &CsiTrace,
    pair: usize,
    config: &PreprocessConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let columns = trace.amplitude_columns(pair)?;
    let spec = FilterSpec {
        cutoff_hz: config.filter.cutoff_hz,
        sample_rate_hz: trace.sample_rate_hz(),
        mode: config.filter.mode,
        order: config.filter.order,
    };
    let design = Butterworth::design(spec)?;
    let groups: Vec<&[Vec<f64>]> = columns.chunks(4).collect();
    let filtered: Vec<Vec<f64>> = par::try_map(&groups, |g| design.filtfilt_many(g))
        .stage("filter")?
        .into_iter()
        .flatten()
        .collect();
    drop(columns);

    if config.pca.k >= N_SUBCARRIERS {
        let n = trace.n_packets();
        let mut mean: Vec<f64> = (0..n)
            .map(|p| filtered.iter().map(|c| c[p]).sum::<f64>() / N_SUBCARRIERS as f64)
            .collect();
        let mu = mean.iter().sum::<f64>() / n as f64;
        mean.iter_mut().for_each(|v| *v -= mu);
        return Ok((mean, Vec::new()));
    }
    let pca = pca_columns(filtered, config.pca.k).stage("pca")?;
    let eig = pca.eigenvalues.clone();
    Ok((pca.projected.into_iter().next().unwrap(), eig))
}

fn phase_stream(trace: &CsiTrace, pair: usize, reduction: PhaseReduction) -> Result<Vec<f64>> {
    if reduction.is_per_packet() {
        let rows = trace.phase_rows(pair)?;
        return sanitize_and_reduce(rows, reduction).stage("sanitize");
    }
    let phase = trace.extract_phase(pair)?;
    let sanitized = sanitize_phase_matrix(&phase).stage("sanitize")?;
    reduce_phase(&sanitized, reduction).stage("sanitize")
}

/// Filter, reduce, and sanitise every antenna pair of a trace.
pub fn preprocess_trace(trace: &CsiTrace, config: &PreprocessConfig) -> Result<PreprocessedTrace> {
    let pairs: Vec<usize> = (0..trace.n_pairs()).collect();
    let per_pair = par::try_map(&pairs, |&pair| -> Result<_> {
        let (amp, eig) = amplitude_stream(trace, pair, config)?;
        let phase = phase_stream(trace, pair, config.phase_reduction)?;
        Ok((amp, phase, eig))
    })?;
    let mut out = PreprocessedTrace {
        sample_rate_hz: trace.sample_rate_hz(),
        amplitude: Vec::with_capacity(per_pair.len()),
        phase: Vec::with_capacity(per_pair.len()),
        eigenvalues: Vec::with_capacity(per_pair.len()),
    };
    for (a, p, e) in per_pair {
        out.amplitude.push(a);
        out.phase.push(p);
        out.eigenvalues.push(e);
    }
    Ok(out)
}
