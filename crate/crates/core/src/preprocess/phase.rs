//! Phase sanitisation.
//!
//! The measured phase of subcarrier `c` carries a receiver timing offset
//! (linear in the subcarrier index) and a constant phase offset. With
//! `F = 30`, the transform computes
//!
//! ```text
//! e1 = (phi_F - phi_1) / (2 pi F)      e2 = mean(phi_1 .. phi_F)
//! out_f = phi_f - e1 * f - e2          for f = 1..F
//! ```
//!
//! after unwrapping the row along the subcarrier axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pca::pca_rows;
use crate::error::{Error, Result};
use crate::trace::{PhaseMatrix, N_SUBCARRIERS};

const F: usize = N_SUBCARRIERS;

/// Unwrap along the subcarrier axis: whenever successive entries differ by
/// more than pi, shift the rest of the row by the multiple of 2 pi that
/// brings the step back into range.
pub fn unwrap(row: &mut [f64]) {
    let mut shift = 0.0;
    for i in 1..row.len() {
        let raw = row[i];
        let prev_raw = row[i - 1] - shift;
        let d = raw - prev_raw;
        if d > PI || d < -PI {
            shift -= (2.0 * PI) * (d / (2.0 * PI)).round();
        }
        row[i] = raw + shift;
    }
}

/// The linear offset-removal transform, without unwrapping.
///
/// Everything is computed relative to the first entry, which is the same
/// expression algebraically and makes the output exactly independent of a
/// constant offset whenever that offset is added exactly.
pub fn phase_transform(row: &[f64; F]) -> [f64; F] {
    let base = row[0];
    let mut d = [0.0; F];
    for (o, v) in d.iter_mut().zip(row) {
        *o = v - base;
    }
    let e1 = d[F - 1] / (2.0 * PI * F as f64);
    let mean_d = d.iter().sum::<f64>() / F as f64;
    let mut out = [0.0; F];
    for (f, (o, v)) in out.iter_mut().zip(&d).enumerate() {
        *o = v - e1 * (f + 1) as f64 - mean_d;
    }
    out
}

/// Unwrap then transform one packet's 30 subcarrier phases.
pub fn sanitize_phase(measured: &[f64]) -> Result<[f64; F]> {
    if measured.len() != F {
        return Err(Error::Shape(format!("expected {F} phases, got {}", measured.len())));
    }
    if let Some(v) = measured.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite phase {v}")));
    }
    let mut row = [0.0; F];
    row.copy_from_slice(measured);
    unwrap(&mut row);
    Ok(phase_transform(&row))
}

/// Per-packet sanitised phases of one antenna pair, `[packet][subcarrier]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SanitizedPhase {
    n_packets: usize,
    entries: Vec<f64>,
}

impl SanitizedPhase {
    pub fn n_packets(&self) -> usize {
        self.n_packets
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, packet: usize) -> &[f64] {
        &self.entries[packet * F..(packet + 1) * F]
    }
}

/// Sanitise every packet (row) independently.
pub fn sanitize_phase_matrix(phases: &PhaseMatrix) -> Result<SanitizedPhase> {
    let mut entries = Vec::with_capacity(phases.entries().len());
    for p in 0..phases.n_packets() {
        entries.extend_from_slice(&sanitize_phase(phases.row(p))?);
    }
    Ok(SanitizedPhase {
        n_packets: phases.n_packets(),
        entries,
    })
}

/// How 30 sanitised subcarrier phases collapse into one per-packet value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "subcarrier")]
pub enum PhaseReduction {
    #[default]
    Mean,
    Subcarrier(usize),
    FirstPca,
}

impl PhaseReduction {
    fn check(self) -> Result<()> {
        match self {
            PhaseReduction::Subcarrier(i) if i >= F => Err(Error::Index { index: i, len: F }),
            _ => Ok(()),
        }
    }

    /// Per-packet reductions only; `FirstPca` needs the whole matrix.
    fn reduce_row(self, row: &[f64]) -> f64 {
        match self {
            PhaseReduction::Subcarrier(i) => row[i],
            _ => row.iter().sum::<f64>() / F as f64,
        }
    }

    /// Whether the reduction can run one packet at a time.
    pub fn is_per_packet(self) -> bool {
        !matches!(self, PhaseReduction::FirstPca)
    }
}

/// Sanitise and reduce packets one at a time, skipping the full matrix.
/// Gives exactly the values of `sanitize_phase_matrix` + `reduce_phase`.
pub fn sanitize_and_reduce<I>(rows: I, reduction: PhaseReduction) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = [f64; F]>,
{
    if !reduction.is_per_packet() {
        return Err(Error::Domain("first-pca reduction needs the whole phase matrix".into()));
    }
    reduction.check()?;
    rows.into_iter()
        .map(|row| sanitize_phase(&row).map(|out| reduction.reduce_row(&out)))
        .collect()
}

impl std::str::FromStr for PhaseReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PhaseReduction::Mean),
            "first-pca" | "first_pca" => Ok(PhaseReduction::FirstPca),
            other => match other.strip_prefix("subcarrier:") {
                Some(i) => i
                    .parse()
                    .map(PhaseReduction::Subcarrier)
                    .map_err(|_| Error::Domain(format!("bad subcarrier index in {other:?}"))),
                None => Err(Error::Domain(format!("unknown phase reduction {other:?}"))),
            },
        }
    }
}

/// Reduce sanitised phases to one value per packet.
pub fn reduce_phase(phase: &SanitizedPhase, reduction: PhaseReduction) -> Result<Vec<f64>> {
    match reduction {
        PhaseReduction::Mean | PhaseReduction::Subcarrier(_) => {
            reduction.check()?;
            Ok(phase.entries.chunks_exact(F).map(|r| reduction.reduce_row(r)).collect())
        }
        PhaseReduction::FirstPca => {
            let r = pca_rows(&phase.entries, phase.n_packets, 1)?;
            Ok(r.projected.into_iter().next().unwrap())
        }
    }
}
