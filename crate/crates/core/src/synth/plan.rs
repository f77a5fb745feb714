//! Randomised traffic: draw classes, lanes, speeds, and gaps from a seed and
//! lay the passages out back to back.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    default_fast_amplitude, default_noise_sigma, default_slow_amplitude, Scenario, ScenarioEvent, TemplateTable,
    MIN_EVENT_GAP_S,
};
use crate::error::{Error, Result};
use crate::trace::{Lane, VehicleClass, DEFAULT_SAMPLE_RATE_HZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficPlan {
    pub n_events: usize,
    /// Exact class multiset, shuffled into a random order. When absent every
    /// class is drawn uniformly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<VehicleClass>>,
    #[serde(default = "half")]
    pub lane_two_fraction: f64,
    #[serde(default = "default_speeds")]
    pub speed_range_mps: [f64; 2],
    /// Quiet time between one burst's end and the next one's start.
    #[serde(default = "default_gaps")]
    pub gap_range_s: [f64; 2],
    #[serde(default = "default_margin")]
    pub lead_in_s: f64,
    #[serde(default = "default_margin")]
    pub tail_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_slow_amplitude")]
    pub slow_object_amplitude: f64,
    #[serde(default = "default_fast_amplitude")]
    pub fast_interference_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<TemplateTable>,
}

fn half() -> f64 {
    0.5
}

fn default_speeds() -> [f64; 2] {
    [11.0, 14.0]
}

fn default_gaps() -> [f64; 2] {
    [3.0, 5.0]
}

fn default_margin() -> f64 {
    2.0
}

fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

impl TrafficPlan {
    pub fn new(n_events: usize, seed: u64) -> Self {
        Self {
            n_events,
            classes: None,
            lane_two_fraction: half(),
            speed_range_mps: default_speeds(),
            gap_range_s: default_gaps(),
            lead_in_s: default_margin(),
            tail_s: default_margin(),
            sample_rate_hz: default_sample_rate(),
            noise_sigma: default_noise_sigma(),
            slow_object_amplitude: default_slow_amplitude(),
            fast_interference_amplitude: default_fast_amplitude(),
            seed,
            templates: None,
        }
    }

    /// A plan whose events are exactly `classes`, in shuffled order.
    pub fn with_classes(classes: Vec<VehicleClass>, seed: u64) -> Self {
        Self {
            classes: Some(classes.clone()),
            ..Self::new(classes.len(), seed)
        }
    }

    /// Draw a concrete scenario. Uses its own RNG stream, so the trace noise
    /// drawn later from the same seed is independent of the layout.
    pub fn scenario(&self) -> Result<Scenario> {
        let [s_lo, s_hi] = self.speed_range_mps;
        let [g_lo, g_hi] = self.gap_range_s;
        if !(s_lo > 2.0 && s_hi >= s_lo && s_hi.is_finite()) {
            return Err(Error::Scenario(format!("speed range {s_lo}..{s_hi} must lie above 2 m/s")));
        }
        if !(g_lo >= MIN_EVENT_GAP_S && g_hi >= g_lo && g_hi.is_finite()) {
            return Err(Error::Scenario(format!("gap range {g_lo}..{g_hi} must start at {MIN_EVENT_GAP_S} s or more")));
        }
        if !(0.0..=1.0).contains(&self.lane_two_fraction) {
            return Err(Error::Scenario("lane-two fraction must be in [0, 1]".into()));
        }
        if !(self.lead_in_s >= 0.0 && self.tail_s >= 0.0) {
            return Err(Error::Scenario("lead-in and tail must be non-negative".into()));
        }
        let table = self.templates.as_ref().unwrap_or_else(|| TemplateTable::builtin());

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut classes = match &self.classes {
            Some(c) if c.len() != self.n_events => {
                return Err(Error::Scenario(format!(
                    "plan lists {} classes for {} events",
                    c.len(),
                    self.n_events
                )))
            }
            Some(c) => c.clone(),
            None => (0..self.n_events)
                .map(|_| VehicleClass::ALL[rng.random_range(0..VehicleClass::ALL.len())])
                .collect(),
        };
        classes.shuffle(&mut rng);

        let mut t = self.lead_in_s;
        let mut events = Vec::with_capacity(classes.len());
        for (i, class) in classes.into_iter().enumerate() {
            let lane = if rng.random_bool(self.lane_two_fraction) { Lane::Two } else { Lane::One };
            let speed_mps = if s_hi > s_lo { rng.random_range(s_lo..s_hi) } else { s_lo };
            let (lo, hi) = table.signature(class, speed_mps, lane)?.extent();
            if i > 0 {
                t += if g_hi > g_lo { rng.random_range(g_lo..g_hi) } else { g_lo };
            }
            // One sample of slack on either side keeps rounding off the gap.
            let time_s = t - lo + 1.0 / self.sample_rate_hz;
            events.push(ScenarioEvent {
                time_s,
                class,
                lane,
                speed_mps,
            });
            t = time_s + hi + 1.0 / self.sample_rate_hz;
        }
        Ok(Scenario {
            duration_s: t + self.tail_s,
            sample_rate_hz: self.sample_rate_hz,
            events,
            noise_sigma: self.noise_sigma,
            slow_object_amplitude: self.slow_object_amplitude,
            fast_interference_amplitude: self.fast_interference_amplitude,
            seed: self.seed,
            templates: self.templates.clone(),
        })
    }
}

/// What a scenario file may hold: an explicit scenario or a traffic plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Scenario(Scenario),
    Plan(TrafficPlan),
}

impl ScenarioSource {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ScenarioSource::Scenario(s) => s.seed = seed,
            ScenarioSource::Plan(p) => p.seed = seed,
        }
        self
    }

    pub fn into_scenario(self) -> Result<Scenario> {
        match self {
            ScenarioSource::Scenario(s) => Ok(s),
            ScenarioSource::Plan(p) => p.scenario(),
        }
    }
}
