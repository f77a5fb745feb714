//! Detection and classification scores.

use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matching::match_events;
use super::predictions::ClassedEvent;
use crate::classify::GroupScheme;
use crate::error::{Error, Result};
use crate::trace::{GroundTruthLabel, Lane, VehicleClass};

/// Rows are true classes, columns predicted classes, both in ordinal order.
pub type Confusion = [[usize; 5]; 5];

/// Classification accuracy under every grouping; `None` when nothing was
/// detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeAccuracy {
    pub five: Option<f64>,
    pub sml: Option<f64>,
    pub car_truck: Option<f64>,
}

impl SchemeAccuracy {
    pub fn get(&self, scheme: GroupScheme) -> Option<f64> {
        match scheme {
            GroupScheme::Five => self.five,
            GroupScheme::Sml => self.sml,
            GroupScheme::CarTruck => self.car_truck,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneReport {
    pub lane: Lane,
    pub n_passing: usize,
    pub n_detected: usize,
    pub detection_accuracy: Option<f64>,
    pub accuracy: SchemeAccuracy,
    pub confusion: Confusion,
}

/// Spread of accuracy over random validation subsets of the detected
/// vehicles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeats: usize,
    pub fraction: f64,
    pub seed: u64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: GroupScheme,
    pub n_passing: usize,
    /// Passing vehicles matched by a detection.
    pub n_detected: usize,
    pub n_false_positive: usize,
    pub detection_accuracy: f64,
    /// Accuracy under `scheme` over detected vehicles.
    pub classification_accuracy: Option<f64>,
    pub accuracy: SchemeAccuracy,
    pub confusion: Confusion,
    pub per_lane: Vec<LaneReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat: Option<RepeatSummary>,
}

/// One detected vehicle: true class, predicted class, lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchedPrediction {
    pub truth: VehicleClass,
    pub predicted: VehicleClass,
    pub lane: Lane,
}

/// Raw counts. Tallies from separate traces merge by concatenation, so
/// evaluation can be split across traces in any grouping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalTally {
    pub passing: [usize; 2],
    pub false_positives: usize,
    pub matched: Vec<MatchedPrediction>,
}

fn lane_slot(lane: Lane) -> usize {
    usize::from(lane.number() - 1)
}

impl EvalTally {
    /// Match one trace's predictions to its labels and count.
    pub fn add(&mut self, predictions: &[ClassedEvent], truth: &[GroundTruthLabel]) {
        let det: Vec<(usize, usize)> = predictions.iter().map(|p| (p.start_index, p.end_index)).collect();
        let lab: Vec<(usize, usize)> = truth.iter().map(|l| (l.start_index, l.end_index)).collect();
        let m = match_events(&det, &lab);
        for l in truth {
            self.passing[lane_slot(l.lane)] += 1;
        }
        self.false_positives += m.false_positives.len();
        for (d, l) in m.pairs {
            self.matched.push(MatchedPrediction {
                truth: truth[l].vehicle_class,
                predicted: predictions[d].class,
                lane: truth[l].lane,
            });
        }
    }

    pub fn merge(&mut self, other: EvalTally) {
        self.passing[0] += other.passing[0];
        self.passing[1] += other.passing[1];
        self.false_positives += other.false_positives;
        self.matched.extend(other.matched);
    }

    pub fn report(&self, scheme: GroupScheme) -> Result<EvalReport> {
        let n_passing = self.passing[0] + self.passing[1];
        if n_passing == 0 {
            return Err(Error::UndefinedMetric("no passing vehicles to score".into()));
        }
        let all: Vec<&MatchedPrediction> = self.matched.iter().collect();
        let accuracy = scheme_accuracy(&all);
        let per_lane = Lane::ALL
            .into_iter()
            .map(|lane| {
                let sub: Vec<&MatchedPrediction> = self.matched.iter().filter(|m| m.lane == lane).collect();
                let passing = self.passing[lane_slot(lane)];
                LaneReport {
                    lane,
                    n_passing: passing,
                    n_detected: sub.len(),
                    detection_accuracy: (passing > 0).then(|| sub.len() as f64 / passing as f64),
                    accuracy: scheme_accuracy(&sub),
                    confusion: confusion(&sub),
                }
            })
            .collect();
        Ok(EvalReport {
            scheme,
            n_passing,
            n_detected: self.matched.len(),
            n_false_positive: self.false_positives,
            detection_accuracy: self.matched.len() as f64 / n_passing as f64,
            classification_accuracy: accuracy.get(scheme),
            accuracy,
            confusion: confusion(&all),
            per_lane,
            repeat: None,
        })
    }

    /// Accuracy under `scheme` on `repeats` random subsets, each a
    /// `fraction` of the detected vehicles drawn without replacement.
    pub fn repeat(&self, scheme: GroupScheme, repeats: usize, fraction: f64, seed: u64) -> Result<RepeatSummary> {
        if repeats == 0 || !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Domain(format!("bad resampling: {repeats} repeats of fraction {fraction}")));
        }
        let n = self.matched.len();
        if n == 0 {
            return Err(Error::UndefinedMetric("no detected vehicles to resample".into()));
        }
        let size = ((fraction * n as f64).round() as usize).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let accs: Vec<f64> = (0..repeats)
            .map(|_| {
                let idx = sample(&mut rng, n, size);
                let correct = idx.iter().filter(|&i| is_correct(&self.matched[i], scheme)).count();
                correct as f64 / size as f64
            })
            .collect();
        let r = repeats as f64;
        let mean = accs.iter().sum::<f64>() / r;
        let std = (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / r).sqrt();
        Ok(RepeatSummary {
            repeats,
            fraction,
            seed,
            mean,
            std,
            min: accs.iter().copied().fold(f64::INFINITY, f64::min),
            max: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

fn is_correct(m: &MatchedPrediction, scheme: GroupScheme) -> bool {
    scheme.group_index(m.truth) == scheme.group_index(m.predicted)
}

fn scheme_accuracy(matched: &[&MatchedPrediction]) -> SchemeAccuracy {
    let acc = |s| {
        (!matched.is_empty())
            .then(|| matched.iter().filter(|m| is_correct(m, s)).count() as f64 / matched.len() as f64)
    };
    SchemeAccuracy {
        five: acc(GroupScheme::Five),
        sml: acc(GroupScheme::Sml),
        car_truck: acc(GroupScheme::CarTruck),
    }
}

fn confusion(matched: &[&MatchedPrediction]) -> Confusion {
    let mut c = [[0; 5]; 5];
    for m in matched {
        c[m.truth.ordinal()][m.predicted.ordinal()] += 1;
    }
    c
}

/// Score one trace's predictions against its labels.
pub fn evaluate(predictions: &[ClassedEvent], truth: &[GroundTruthLabel], scheme: GroupScheme) -> Result<EvalReport> {
    let mut t = EvalTally::default();
    t.add(predictions, truth);
    t.report(scheme)
}

pub fn write_report(report: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn read_report(text: &str) -> Result<EvalReport> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))
}

pub fn save_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_report(report)?).map_err(|e| Error::io(path, e))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    read_report(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
