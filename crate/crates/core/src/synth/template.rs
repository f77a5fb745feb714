//! Per-class vehicle signature templates.
//!
//! A passing vehicle dims the line-of-sight path for as long as its body plus
//! the sensing zone takes to cross, so the burst length is
//! `(body_length + zone_length) / speed`. Depth, ripple, and phase tilt are
//! per-class constants scaled per antenna pair and per lane.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Lane, VehicleClass};

const DEFAULT_TABLE: &str = include_str!("../../data/templates.json");

/// Per-pair scaling of a class template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScale {
    pub depth_scale: f64,
    pub duration_scale: f64,
    /// Burst centre offset as a fraction of the burst duration.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub class: VehicleClass,
    pub body_length_m: f64,
    /// Fractional amplitude drop at the bottom of the dip.
    pub depth: f64,
    /// Ripple periods across one burst.
    pub ripple_cycles: f64,
    /// Fraction of the dip the ripple gives back at its crest.
    pub ripple_depth: f64,
    /// Peak phase tilt across the band, radians.
    pub phase_gain: f64,
    pub phase_cycles: f64,
    pub pairs: Vec<PairScale>,
}

/// The full configuration table for all five classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateTable {
    pub zone_length_m: f64,
    /// Fraction of the burst spent in each raised-cosine edge.
    pub taper: f64,
    pub lane_two_depth_factor: f64,
    pub lane_two_phase_factor: f64,
    pub classes: Vec<ClassTemplate>,
}

/// Envelope parameters of one antenna pair for one vehicle passage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSignature {
    pub depth: f64,
    pub duration_s: f64,
    /// Centre offset relative to the event time.
    pub delay_s: f64,
    pub ripple_hz: f64,
    pub ripple_depth: f64,
    pub phase_gain: f64,
    pub phase_hz: f64,
}

/// A concrete signature: one class at one speed in one lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureTemplate {
    pub class: VehicleClass,
    pub lane: Lane,
    pub speed_mps: f64,
    /// Nominal burst duration (pair scale 1).
    pub duration_s: f64,
    pub taper: f64,
    pub pairs: Vec<PairSignature>,
}

impl SignatureTemplate {
    /// Deepest dip over all pairs.
    pub fn depth(&self) -> f64 {
        self.pairs.iter().map(|p| p.depth).fold(0.0, f64::max)
    }

    /// Support of the whole burst relative to the event time, in seconds.
    pub fn extent(&self) -> (f64, f64) {
        self.pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.delay_s - p.duration_s / 2.0), hi.max(p.delay_s + p.duration_s / 2.0))
        })
    }
}

impl TemplateTable {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static TemplateTable {
        static TABLE: OnceLock<TemplateTable> = OnceLock::new();
        TABLE.get_or_init(|| serde_json::from_str(DEFAULT_TABLE).expect("built-in template table parses"))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.zone_length_m) {
            return Err(Error::Scenario("zone length must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.taper) {
            return Err(Error::Scenario(format!("taper {} not in [0, 0.5)", self.taper)));
        }
        if !(positive(self.lane_two_depth_factor) && self.lane_two_depth_factor <= 1.0) {
            return Err(Error::Scenario("lane-two depth factor must be in (0, 1]".into()));
        }
        for c in &self.classes {
            if c.pairs.is_empty() {
                return Err(Error::Scenario(format!("{} template has no pairs", c.class)));
            }
            if !(positive(c.body_length_m) && positive(c.depth) && c.depth < 1.0) {
                return Err(Error::Scenario(format!("{} template has bad length or depth", c.class)));
            }
            for p in &c.pairs {
                if !(positive(p.depth_scale) && positive(p.duration_scale) && p.delay.is_finite()) {
                    return Err(Error::Scenario(format!("{} template has a bad pair scale", c.class)));
                }
            }
        }
        Ok(())
    }

    pub fn class(&self, class: VehicleClass) -> Result<&ClassTemplate> {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .ok_or_else(|| Error::Domain(format!("no template for class {class}")))
    }

    /// Concrete signature of `class` crossing at `speed_mps` in `lane`.
    pub fn signature(&self, class: VehicleClass, speed_mps: f64, lane: Lane) -> Result<SignatureTemplate> {
        if !(speed_mps.is_finite() && speed_mps > 2.0) {
            return Err(Error::Domain(format!("speed {speed_mps} m/s must exceed 2 m/s")));
        }
        let t = self.class(class)?;
        let duration_s = (t.body_length_m + self.zone_length_m) / speed_mps;
        let (depth_factor, phase_factor) = match lane {
            Lane::One => (1.0, 1.0),
            Lane::Two => (self.lane_two_depth_factor, self.lane_two_phase_factor),
        };
        let pairs = t
            .pairs
            .iter()
            .map(|p| {
                let d = duration_s * p.duration_scale;
                PairSignature {
                    depth: t.depth * p.depth_scale * depth_factor,
                    duration_s: d,
                    delay_s: p.delay * duration_s,
                    ripple_hz: t.ripple_cycles / d,
                    ripple_depth: t.ripple_depth,
                    phase_gain: t.phase_gain * phase_factor,
                    phase_hz: t.phase_cycles / d,
                }
            })
            .collect();
        Ok(SignatureTemplate {
            class,
            lane,
            speed_mps,
            duration_s,
            taper: self.taper,
            pairs,
        })
    }
}

/// Signature from the built-in table.
pub fn vehicle_signature(class: VehicleClass, speed_mps: f64, lane: Lane) -> Result<SignatureTemplate> {
    TemplateTable::builtin().signature(class, speed_mps, lane)
}

/// Raised-cosine edges around a flat top; `u` is the position in the burst.
pub(crate) fn tukey(u: f64, taper: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    if taper <= 0.0 {
        return 1.0;
    }
    let edge = u.min(1.0 - u);
    if edge >= taper {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * edge / taper).cos())
    }
}
