//! Seeded synthetic CSI traces with labelled vehicle passages.
//!
//! Each antenna pair sees a static frequency-selective channel. A vehicle
//! multiplies it by a smooth dip with a class-specific ripple and tilts the
//! phase across the band. On top of that come a slow (< 2 Hz) amplitude
//! drift, fast (> 38 Hz) amplitude interference, a per-packet timing and
//! phase offset, and additive complex Gaussian noise.
//!
//! Every pair draws from its own ChaCha stream, so pairs can be generated in
//! parallel and the result is still a pure function of the scenario.

mod plan;
mod template;

use std::f64::consts::PI;
use std::path::Path;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::trace::{CsiTrace, GroundTruthLabel, Lane, VehicleClass, DEFAULT_PAIRS, DEFAULT_SAMPLE_RATE_HZ, N_SUBCARRIERS};

pub use plan::{ScenarioSource, TrafficPlan};
pub use template::{
    vehicle_signature, ClassTemplate, PairScale, PairSignature, SignatureTemplate, TemplateTable,
};

/// Minimum quiet time between the end of one burst and the start of the next.
pub const MIN_EVENT_GAP_S: f64 = 1.0;

/// Mean receiver timing offset and its per-packet jitter, in samples.
const TIMING_OFFSET: f64 = 0.3;
const TIMING_JITTER: f64 = 0.05;

/// One vehicle passage. `time_s` is the centre of the burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub time_s: f64,
    pub class: VehicleClass,
    pub lane: Lane,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    pub events: Vec<ScenarioEvent>,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_slow_amplitude")]
    pub slow_object_amplitude: f64,
    /// Amplitude of the interference tones above the filter cutoff.
    #[serde(default = "default_fast_amplitude")]
    pub fast_interference_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the built-in class templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<TemplateTable>,
}

fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

pub(crate) fn default_noise_sigma() -> f64 {
    0.22
}

pub(crate) fn default_slow_amplitude() -> f64 {
    0.004
}

pub(crate) fn default_fast_amplitude() -> f64 {
    0.02
}

impl Scenario {
    /// An empty scenario with default noise settings.
    pub fn quiet(duration_s: f64, seed: u64) -> Self {
        Self {
            duration_s,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            events: Vec::new(),
            noise_sigma: default_noise_sigma(),
            slow_object_amplitude: default_slow_amplitude(),
            fast_interference_amplitude: default_fast_amplitude(),
            seed,
            templates: None,
        }
    }

    pub fn templates(&self) -> &TemplateTable {
        self.templates.as_ref().unwrap_or_else(|| TemplateTable::builtin())
    }

    pub fn n_packets(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Check the scenario and lay out the bursts, sorted by time.
    fn plan_bursts(&self) -> Result<Vec<Burst>> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.duration_s) || !positive(self.sample_rate_hz) {
            return Err(Error::Scenario("duration and sample rate must be positive".into()));
        }
        if !nonneg(self.noise_sigma) || !nonneg(self.slow_object_amplitude) || !nonneg(self.fast_interference_amplitude) {
            return Err(Error::Scenario("noise and interference amplitudes must be non-negative".into()));
        }
        if self.slow_object_amplitude >= 0.5 || self.fast_interference_amplitude >= 0.5 {
            return Err(Error::Scenario("interference amplitudes must stay below 0.5".into()));
        }
        if self.n_packets() == 0 {
            return Err(Error::Scenario("scenario holds no packets".into()));
        }
        let table = self.templates();
        table.validate()?;

        let mut events = self.events.clone();
        events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        let fs = self.sample_rate_hz;
        let n = self.n_packets();
        let mut bursts = Vec::with_capacity(events.len());
        for (i, ev) in events.iter().enumerate() {
            if !(ev.time_s >= 0.0 && ev.time_s < self.duration_s) {
                return Err(Error::Scenario(format!(
                    "event at {} s lies outside [0, {})",
                    ev.time_s, self.duration_s
                )));
            }
            if !(ev.speed_mps > 2.0) {
                return Err(Error::Scenario(format!("event speed {} m/s must exceed 2 m/s", ev.speed_mps)));
            }
            let signature = table.signature(ev.class, ev.speed_mps, ev.lane)?;
            let (lo, hi) = signature.extent();
            let start = ((ev.time_s + lo) * fs).ceil();
            let end = ((ev.time_s + hi) * fs).floor();
            if start < 0.0 || end >= n as f64 {
                return Err(Error::Scenario(format!(
                    "burst of event {i} at {} s does not fit in a {} s trace",
                    ev.time_s, self.duration_s
                )));
            }
            bursts.push(Burst {
                event: *ev,
                signature,
                start: start as usize,
                end: end as usize,
            });
        }
        for w in bursts.windows(2) {
            let gap = (w[1].start as f64 - w[0].end as f64) / fs;
            if gap < MIN_EVENT_GAP_S {
                return Err(Error::Scenario(format!(
                    "events at {} s and {} s overlap (gap {gap:.3} s < {MIN_EVENT_GAP_S} s)",
                    w[0].event.time_s, w[1].event.time_s
                )));
            }
        }
        Ok(bursts)
    }
}

#[derive(Debug, Clone)]
struct Burst {
    event: ScenarioEvent,
    signature: SignatureTemplate,
    start: usize,
    end: usize,
}

/// Generate a trace and its labels. Pure in the scenario, seed included.
pub fn generate_trace(scenario: &Scenario) -> Result<(CsiTrace, Vec<GroundTruthLabel>)> {
    let bursts = scenario.plan_bursts()?;
    let n = scenario.n_packets();
    let pairs = par::map_range(DEFAULT_PAIRS, |pair| generate_pair(scenario, &bursts, pair, n));

    let mut values = Vec::with_capacity(n * DEFAULT_PAIRS * N_SUBCARRIERS);
    for p in 0..n {
        for pair in &pairs {
            values.extend_from_slice(&pair[p * N_SUBCARRIERS..(p + 1) * N_SUBCARRIERS]);
        }
    }
    drop(pairs);
    let trace = CsiTrace::new(n, DEFAULT_PAIRS, scenario.sample_rate_hz, values)?;
    let labels = bursts
        .iter()
        .enumerate()
        .map(|(i, b)| GroundTruthLabel {
            event_id: i as i64,
            start_index: b.start,
            end_index: b.end,
            vehicle_class: b.event.class,
            lane: b.event.lane,
        })
        .collect();
    Ok((trace, labels))
}

fn pair_rng(seed: u64, pair: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair as u64 + 1);
    rng
}

/// Subcarrier index used for the timing-offset slope, symmetric about zero.
fn subcarrier_offset(s: usize) -> f64 {
    2.0 * s as f64 - (N_SUBCARRIERS as f64 - 1.0)
}

/// Static channel of one pair: smooth magnitude ripple, gentle phase slope.
fn static_channel(rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let cycles = rng.random_range(0.5..1.5);
    let offset = rng.random_range(0.0..2.0 * PI);
    let theta0 = rng.random_range(-PI..PI);
    let slope = rng.random_range(-0.3..0.3);
    (0..N_SUBCARRIERS)
        .map(|s| {
            let x = s as f64 / N_SUBCARRIERS as f64;
            let mag = 1.0 + 0.2 * (2.0 * PI * cycles * x + offset).sin();
            let wiggle = 0.1 * (2.0 * PI * 1.7 * x + offset).sin();
            Complex64::from_polar(mag, theta0 + slope * s as f64 + wiggle)
        })
        .collect()
}

/// Vehicle dip and phase tilt of one pair, per packet.
fn vehicle_effect(bursts: &[Burst], pair: usize, n: usize, fs: f64) -> (Vec<f64>, Vec<f64>) {
    let mut dip = vec![0.0; n];
    let mut tilt = vec![0.0; n];
    for b in bursts {
        let sig = &b.signature.pairs[pair.min(b.signature.pairs.len() - 1)];
        let t0 = b.event.time_s + sig.delay_s - sig.duration_s / 2.0;
        let first = ((t0 * fs).ceil().max(0.0)) as usize;
        let last = (((t0 + sig.duration_s) * fs).floor() as usize).min(n - 1);
        for p in first..=last {
            let tau = p as f64 / fs - t0;
            let env = template::tukey(tau / sig.duration_s, b.signature.taper);
            let ripple = 1.0 - sig.ripple_depth * 0.5 * (1.0 - (2.0 * PI * sig.ripple_hz * tau).cos());
            dip[p] += sig.depth * env * ripple;
            tilt[p] += sig.phase_gain * env * (2.0 * PI * sig.phase_hz * tau).sin();
        }
    }
    (dip, tilt)
}

fn generate_pair(scenario: &Scenario, bursts: &[Burst], pair: usize, n: usize) -> Vec<Complex32> {
    let fs = scenario.sample_rate_hz;
    let mut rng = pair_rng(scenario.seed, pair);
    let channel = static_channel(&mut rng);
    let (dip, tilt) = vehicle_effect(bursts, pair, n, fs);

    let slow_hz = rng.random_range(0.2..1.8);
    let slow_phase = rng.random_range(0.0..2.0 * PI);
    let fast: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(80.0..400.0), rng.random_range(0.0..2.0 * PI)))
        .collect();

    let noise_scale = scenario.noise_sigma / 2f64.sqrt();
    let half_span = (N_SUBCARRIERS as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(n * N_SUBCARRIERS);
    for p in 0..n {
        let t = p as f64 / fs;
        let drift = 1.0 + scenario.slow_object_amplitude * (2.0 * PI * slow_hz * t + slow_phase).sin();
        let hf = 1.0
            + scenario.fast_interference_amplitude
                * fast.iter().map(|&(f, ph)| (2.0 * PI * f * t + ph).sin()).sum::<f64>()
                / fast.len() as f64;
        let gain = (1.0 - dip[p]) * drift * hf;

        let alpha = TIMING_OFFSET + TIMING_JITTER * rng.sample::<f64, _>(StandardNormal);
        let beta = rng.random_range(-PI..PI);
        // Phase of subcarrier s is beta + k_s * slope with k_s symmetric.
        let slope = tilt[p] / half_span / 2.0 - 2.0 * PI * alpha / 64.0;
        let mut rot = Complex64::from_polar(gain, beta + subcarrier_offset(0) * slope);
        let step = Complex64::from_polar(1.0, 2.0 * slope);
        for h in &channel {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let v = h * rot + Complex64::new(re, im) * noise_scale;
            out.push(Complex32::new(v.re as f32, v.im as f32));
            rot *= step;
        }
    }
    out
}
