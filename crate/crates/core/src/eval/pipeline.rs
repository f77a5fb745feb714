//! Trace in, classified detections out.

use serde::{Deserialize, Serialize};

use super::matching::match_events;
use super::predictions::ClassedEvent;
use crate::classify::{form_image, fuse_max_probability, CnnModel};
use crate::detect::{extract_events, DetectionEvent, DetectorParams};
use crate::error::{Error, Result, StageContext};
use crate::par;
use crate::preprocess::{preprocess_trace, PreprocessConfig, PreprocessedTrace};
use crate::trace::{CsiTrace, GroundTruthLabel};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub detector: DetectorParams,
}

/// Preprocess a trace. Failures outside the filter, PCA, and sanitise stages
/// are attributed to extraction.
pub fn preprocess_stage(trace: &CsiTrace, config: &PreprocessConfig) -> Result<PreprocessedTrace> {
    preprocess_trace(trace, config).map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: "extract",
            source: Box::new(other),
        },
    })
}

/// Preprocess and detect.
pub fn detect_stage(trace: &CsiTrace, config: &PipelineConfig) -> Result<Vec<DetectionEvent>> {
    let streams = preprocess_stage(trace, &config.preprocess)?;
    extract_events(&streams, &config.detector).stage("detect")
}

/// Copy class, lane, and id of the matched label onto each event.
pub fn attach_labels(events: &mut [DetectionEvent], labels: &[GroundTruthLabel]) {
    let det: Vec<(usize, usize)> = events.iter().map(|e| (e.start_index, e.end_index)).collect();
    let lab: Vec<(usize, usize)> = labels.iter().map(|l| (l.start_index, l.end_index)).collect();
    for (d, l) in match_events(&det, &lab).pairs {
        events[d].class = Some(labels[l].vehicle_class);
        events[d].lane = Some(labels[l].lane);
        events[d].event_id = Some(labels[l].event_id);
    }
}

/// Classify events with one model, or several fused by maximum probability.
pub fn classify_events(events: &[DetectionEvent], models: &[&CnnModel], source: &str) -> Result<Vec<ClassedEvent>> {
    if models.is_empty() {
        return Err(Error::Domain("no classifier model given".into()));
    }
    par::try_map(events, |e| {
        let image = form_image(e).stage("form_image")?;
        let (class, probabilities) = fuse_max_probability(models, &image).stage("classify")?;
        Ok(ClassedEvent {
            source: source.to_string(),
            start_index: e.start_index,
            end_index: e.end_index,
            class,
            probabilities,
        })
    })
}

/// Extract, filter, reduce, sanitise, detect, form images, classify.
pub fn run_pipeline(trace: &CsiTrace, models: &[&CnnModel], config: &PipelineConfig) -> Result<Vec<ClassedEvent>> {
    let events = detect_stage(trace, config)?;
    classify_events(&events, models, "")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Architecture;
    use crate::synth::{generate_trace, Scenario, TrafficPlan};

    #[test]
    fn quiet_trace_gives_nothing() {
        let (trace, _) = generate_trace(&Scenario::quiet(2.0, 1)).unwrap();
        let model = CnnModel::new(Architecture::default(), 0).unwrap();
        assert!(run_pipeline(&trace, &[&model], &PipelineConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn five_events_are_found_and_stable() {
        let scenario = TrafficPlan::new(5, 21).scenario().unwrap();
        let (trace, labels) = generate_trace(&scenario).unwrap();
        let model = CnnModel::new(Architecture::default(), 0).unwrap();
        let out = run_pipeline(&trace, &[&model], &PipelineConfig::default()).unwrap();
        assert_eq!(out.len(), 5);
        let det: Vec<_> = out.iter().map(|e| (e.start_index, e.end_index)).collect();
        let lab: Vec<_> = labels.iter().map(|l| (l.start_index, l.end_index)).collect();
        let m = match_events(&det, &lab);
        assert_eq!(m.pairs.len(), 5);
        assert_eq!(out, run_pipeline(&trace, &[&model], &PipelineConfig::default()).unwrap());
    }

    #[test]
    fn errors_name_their_stage() {
        let (trace, _) = generate_trace(&Scenario::quiet(0.8, 1)).unwrap();
        let model = CnnModel::new(Architecture::default(), 0).unwrap();
        match run_pipeline(&trace, &[&model], &PipelineConfig::default()) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "detect"),
            other => panic!("{other:?}"),
        }
    }
}
