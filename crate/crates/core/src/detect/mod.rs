//! Vehicle detection: scaled-MAD outlier flagging on a reduced amplitude
//! stream, then extraction of a padded window around every long outlier run.

mod io;
mod mad;

pub use io::{
    load_event_dir, load_events, read_events, save_events, sidecar_path, write_events, EventRecord,
};
pub use mad::{c_mad, detect_outliers, median, scaled_mad, Centering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PreprocessedTrace;
use crate::trace::{Lane, VehicleClass};

/// Detection thresholds and window padding, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub mad_multiplier: f64,
    /// Minimum outlier run length (0.5 s at 2500 Hz).
    pub omega: usize,
    /// Samples kept before the run.
    pub delta1: usize,
    /// Samples kept after the run.
    pub delta2: usize,
    /// Antenna pair whose stream is scanned.
    #[serde(default)]
    pub detection_pair: usize,
    #[serde(default)]
    pub centering: Centering,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            mad_multiplier: 3.0,
            omega: 1250,
            delta1: 500,
            delta2: 500,
            detection_pair: 0,
            centering: Centering::Mean,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mad_multiplier.is_finite() && self.mad_multiplier > 0.0) {
            return Err(Error::Domain(format!("MAD multiplier {} must be positive", self.mad_multiplier)));
        }
        if self.omega == 0 || self.delta1 == 0 || self.delta2 == 0 {
            return Err(Error::Domain("omega, delta1 and delta2 must be positive".into()));
        }
        Ok(())
    }
}

/// One extracted vehicle passage.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    /// First packet of the window, `s - delta1`.
    pub start_index: usize,
    /// Last packet of the window (inclusive), `f + delta2`.
    pub end_index: usize,
    /// Per-pair reduced amplitude segments.
    pub amplitude_rows: Vec<Vec<f64>>,
    /// Per-pair reduced phase segments.
    pub phase_rows: Vec<Vec<f64>>,
    pub sample_rate_hz: f64,
    /// Mean of the whole detection-pair stream the window was cut from.
    pub baseline_mean: f64,
    pub event_id: Option<i64>,
    pub lane: Option<Lane>,
    pub class: Option<VehicleClass>,
}

impl DetectionEvent {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_pairs(&self) -> usize {
        self.amplitude_rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.end_index < self.start_index {
            return Err(Error::Invariant("event ends before it starts".into()));
        }
        let len = self.len();
        if self.amplitude_rows.len() != self.phase_rows.len() {
            return Err(Error::Invariant("amplitude and phase row counts differ".into()));
        }
        if self
            .amplitude_rows
            .iter()
            .chain(&self.phase_rows)
            .any(|r| r.len() != len)
        {
            return Err(Error::Invariant(format!("all rows must have length {len}")));
        }
        Ok(())
    }
}

/// Maximal runs of `true` that are closed by a `false`, as inclusive `(s, f)`.
/// A run still open at the end of the mask is never closed and is not
/// reported.
pub fn closed_runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &flag) in mask.iter().enumerate() {
        match (flag, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    runs
}

/// Windows `[s - delta1, f + delta2]` for every closed run of length at
/// least `omega` that clears both boundary guards.
pub fn event_windows(mask: &[bool], params: &DetectorParams) -> Vec<(usize, usize)> {
    let n = mask.len();
    closed_runs(mask)
        .into_iter()
        .filter(|&(s, f)| f - s + 1 >= params.omega)
        .filter(|&(s, f)| s > params.delta1 && f + params.delta2 < n)
        .map(|(s, f)| (s - params.delta1, f + params.delta2))
        .collect()
}

/// Scan the detection pair's stream and cut amplitude and phase rows for
/// every detected vehicle.
pub fn extract_events(streams: &PreprocessedTrace, params: &DetectorParams) -> Result<Vec<DetectionEvent>> {
    params.validate()?;
    let n_pairs = streams.amplitude.len();
    if n_pairs == 0 || streams.phase.len() != n_pairs {
        return Err(Error::Shape(format!(
            "{} amplitude streams vs {} phase streams",
            n_pairs,
            streams.phase.len()
        )));
    }
    let n = streams.amplitude[0].len();
    if streams.amplitude.iter().chain(&streams.phase).any(|s| s.len() != n) {
        return Err(Error::Shape("streams differ in length".into()));
    }
    if params.detection_pair >= n_pairs {
        return Err(Error::Index {
            index: params.detection_pair,
            len: n_pairs,
        });
    }
    if n <= params.delta1 + params.delta2 + params.omega {
        return Err(Error::Length(format!(
            "{n} packets cannot hold delta1 + delta2 + omega = {}",
            params.delta1 + params.delta2 + params.omega
        )));
    }
    let detection = &streams.amplitude[params.detection_pair];
    let mask = detect_outliers(detection, params.mad_multiplier, params.centering)?;
    let baseline_mean = detection.iter().sum::<f64>() / n as f64;

    Ok(event_windows(&mask, params)
        .into_iter()
        .map(|(a, b)| DetectionEvent {
            start_index: a,
            end_index: b,
            amplitude_rows: streams.amplitude.iter().map(|s| s[a..=b].to_vec()).collect(),
            phase_rows: streams.phase.iter().map(|s| s[a..=b].to_vec()).collect(),
            sample_rate_hz: streams.sample_rate_hz,
            baseline_mean,
            event_id: None,
            lane: None,
            class: None,
        })
        .collect())
}
