//! Hand-made features for the kNN baseline.

use serde::{Deserialize, Serialize};

use crate::detect::{scaled_mad, DetectionEvent};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub normalized_std: f64,
    pub signal_strength_offset: f64,
    pub motion_period: f64,
    pub mad: f64,
    pub iqr: f64,
}

impl FeatureVector {
    pub const LEN: usize = 5;

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.normalized_std,
            self.signal_strength_offset,
            self.motion_period,
            self.mad,
            self.iqr,
        ]
    }
}

/// Quantile with linear interpolation between order statistics
/// (position `q * (n - 1)` in the sorted data).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let t = pos - i as f64;
    sorted[i] + t * (sorted[i + 1] - sorted[i])
}

pub fn iqr(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Features of the pair-0 amplitude row.
///
/// The reduced amplitude stream is centred over the whole trace, so the
/// normalising "mean magnitude" is the mean absolute value of the row.
pub fn extract_baseline_features(event: &DetectionEvent) -> Result<FeatureVector> {
    let row = event
        .amplitude_rows
        .first()
        .ok_or_else(|| Error::Shape("event has no amplitude rows".into()))?;
    if row.len() < 4 {
        return Err(Error::Degenerate(format!("event row of {} samples, need 4", row.len())));
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("event row must be finite".into()));
    }
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let magnitude = row.iter().map(|v| v.abs()).sum::<f64>() / n;
    if magnitude == 0.0 {
        return Err(Error::Degenerate("event row has zero mean magnitude".into()));
    }
    let std = (row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    Ok(FeatureVector {
        normalized_std: std / magnitude,
        signal_strength_offset: mean - event.baseline_mean,
        motion_period: n / event.sample_rate_hz,
        mad: scaled_mad(row)?,
        iqr: iqr(row),
    })
}
