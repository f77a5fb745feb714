//! Synthetic benchmarks: many seeded traces run through detection, and a
//! balanced set of labelled detection events for classifier training.

use serde::{Deserialize, Serialize};

use super::matching::match_events;
use super::pipeline::{attach_labels, detect_stage, PipelineConfig};
use crate::detect::DetectionEvent;
use crate::error::Result;
use crate::synth::{generate_trace, TrafficPlan};
use crate::trace::VehicleClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionScore {
    pub n_passing: usize,
    pub n_detected: usize,
    pub n_false_positive: usize,
}

impl DetectionScore {
    pub fn recall(&self) -> f64 {
        self.n_detected as f64 / self.n_passing as f64
    }
}

/// Generate `n_traces` traces of `events_per_trace` random vehicles (seeds
/// `seed, seed + 1, ...`) and count matched and spurious detections.
pub fn detection_benchmark(
    n_traces: usize,
    events_per_trace: usize,
    seed: u64,
    config: &PipelineConfig,
) -> Result<DetectionScore> {
    let mut score = DetectionScore::default();
    for i in 0..n_traces as u64 {
        let scenario = TrafficPlan::new(events_per_trace, seed + i).scenario()?;
        let (trace, labels) = generate_trace(&scenario)?;
        let events = detect_stage(&trace, config)?;
        let det: Vec<_> = events.iter().map(|e| (e.start_index, e.end_index)).collect();
        let lab: Vec<_> = labels.iter().map(|l| (l.start_index, l.end_index)).collect();
        let m = match_events(&det, &lab);
        score.n_passing += labels.len();
        score.n_detected += m.pairs.len();
        score.n_false_positive += m.false_positives.len();
    }
    Ok(score)
}

/// Detected events with their true class attached: `per_class` vehicles of
/// every class, spread over traces of `events_per_trace` vehicles each.
/// Vehicles the detector misses, and detections matching no vehicle, are
/// left out.
pub fn classification_dataset(
    per_class: usize,
    events_per_trace: usize,
    seed: u64,
    config: &PipelineConfig,
) -> Result<Vec<DetectionEvent>> {
    let mut classes: Vec<VehicleClass> = VehicleClass::ALL.iter().flat_map(|&c| vec![c; per_class]).collect();
    // Deterministic interleave so every trace mixes classes; the plan
    // shuffles within a trace.
    classes.sort_by_key(|c| c.ordinal());
    let n = classes.len();
    let mixed: Vec<VehicleClass> = (0..n).map(|i| classes[(i % 5) * per_class + i / 5]).collect();
    let mut out = Vec::with_capacity(n);
    for (i, chunk) in mixed.chunks(events_per_trace.max(1)).enumerate() {
        let scenario = TrafficPlan::with_classes(chunk.to_vec(), seed + i as u64).scenario()?;
        let (trace, labels) = generate_trace(&scenario)?;
        let mut events = detect_stage(&trace, config)?;
        attach_labels(&mut events, &labels);
        out.extend(events.into_iter().filter(|e| e.class.is_some()));
    }
    Ok(out)
}
