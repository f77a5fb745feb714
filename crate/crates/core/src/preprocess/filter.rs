//! Zero-phase Butterworth filtering.
//!
//! The filter is a cascade of second-order sections obtained from the analog
//! Butterworth prototype by the bilinear transform (with cutoff prewarping).
//! It is run forward and then backward over an odd-reflected extension of the
//! input. The cutoff names the -3 dB point of that combined zero-phase
//! response, so each pass is designed slightly wider, with each pass starting from the step-response steady state scaled
//! by the first sample, so a constant input comes out unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carrier frequency of the deployment (5.32 GHz), for reference.
pub const CARRIER_HZ: f64 = 5.32e9;
/// Carrier wavelength in metres (5.64 cm).
pub const WAVELENGTH_M: f64 = 0.0564;
/// Speed below which moving objects count as background (m/s).
pub const SLOW_OBJECT_SPEED_MPS: f64 = 2.0;
/// Default cutoff: the Doppler-scale frequency of a 2 m/s object at 5.64 cm,
/// rounded to the operating value of 38 Hz.
pub const DEFAULT_CUTOFF_HZ: f64 = 38.0;
pub const DEFAULT_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    #[default]
    Lowpass,
    Highpass,
}

impl std::str::FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowpass" => Ok(FilterMode::Lowpass),
            "highpass" => Ok(FilterMode::Highpass),
            other => Err(Error::Domain(format!("unknown filter mode {other:?}"))),
        }
    }
}

/// Filter design parameters.
///
/// Contract for the default low-pass: at most 1 dB of attenuation below
/// 0.8 x cutoff and at least 20 dB above 2.5 x cutoff (zero-phase response).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub mode: FilterMode,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

impl FilterSpec {
    pub fn lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        Self {
            cutoff_hz,
            sample_rate_hz,
            mode: FilterMode::Lowpass,
            order: DEFAULT_ORDER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Domain(format!("sample rate {} must be positive", self.sample_rate_hz)));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::Domain(format!(
                "cutoff {} Hz must lie in (0, {}) Hz",
                self.cutoff_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        if self.order == 0 || self.order % 2 != 0 {
            return Err(Error::Domain(format!("filter order {} must be even and positive", self.order)));
        }
        Ok(())
    }
}

/// One biquad, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form-II state after a unit step has settled.
    fn step_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        [y - self.b[0], self.b[2] - self.a[1] * y]
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let z1 = num_complex::Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z1 * self.a[0] + z2 * self.a[1];
        (num / den).norm()
    }
}

/// A designed Butterworth cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    spec: FilterSpec,
    sections: Vec<Biquad>,
}

impl Butterworth {
    pub fn design(spec: FilterSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.order;
        // Two passes square the magnitude; move each pass's -3 dB point so
        // the product is -3 dB at the requested cutoff.
        let widen = (2f64.sqrt() - 1.0).powf(1.0 / (2 * n) as f64);
        let warped = (std::f64::consts::PI * spec.cutoff_hz / spec.sample_rate_hz).tan();
        let k = match spec.mode {
            FilterMode::Lowpass => warped / widen,
            FilterMode::Highpass => warped * widen,
        };
        let k2 = k * k;
        let sections = (1..=n / 2)
            .map(|i| {
                let theta = (2 * i - 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
                let inv_q = 2.0 * theta.sin();
                let norm = 1.0 / (1.0 + k * inv_q + k2);
                let a = [2.0 * (k2 - 1.0) * norm, (1.0 - k * inv_q + k2) * norm];
                let b = match spec.mode {
                    FilterMode::Lowpass => {
                        let b0 = k2 * norm;
                        [b0, 2.0 * b0, b0]
                    }
                    FilterMode::Highpass => [norm, -2.0 * norm, norm],
                };
                Biquad { b, a }
            })
            .collect();
        Ok(Self { spec, sections })
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Samples of odd reflection added at each end before filtering.
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Shortest series the filter accepts.
    pub fn min_len(&self) -> usize {
        self.pad_len() + 1
    }

    /// Single-pass magnitude response at `freq_hz`; the zero-phase response
    /// is its square.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.magnitude(freq_hz, self.spec.sample_rate_hz))
            .product()
    }

    fn steady_states(&self) -> Vec<[f64; 2]> {
        // Each section sees the DC gain of everything in front of it.
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let st = s.step_state();
                let out = [st[0] * scale, st[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// One pass of the cascade over several equally long series at once.
    /// The lanes are independent recurrences, so interleaving them keeps
    /// the pipeline busy; each lane computes exactly what a lone pass would.
    fn run_lanes<const L: usize>(&self, data: &mut [Vec<f64>; L], init: &[[f64; 2]]) {
        let n = data[0].len();
        for (sec, st) in self.sections.iter().zip(init) {
            let [b0, b1, b2] = sec.b;
            let [a1, a2] = sec.a;
            let mut z1: [f64; L] = std::array::from_fn(|l| st[0] * data[l][0]);
            let mut z2: [f64; L] = std::array::from_fn(|l| st[1] * data[l][0]);
            for i in 0..n {
                for l in 0..L {
                    let x = data[l][i];
                    let y = b0 * x + z1[l];
                    z1[l] = b1 * x - a1 * y + z2[l];
                    z2[l] = b2 * x - a2 * y;
                    data[l][i] = y;
                }
            }
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len <= self.pad_len() {
            return Err(Error::Length(format!(
                "series of {len} samples is shorter than the filter minimum of {}",
                self.min_len()
            )));
        }
        Ok(())
    }

    /// Odd reflection of `pad` samples at each end.
    fn extend(series: &[f64], pad: usize) -> Vec<f64> {
        let n = series.len();
        let (first, last) = (series[0], series[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - series[i]));
        ext.extend_from_slice(series);
        ext.extend((1..=pad).map(|i| 2.0 * last - series[n - 1 - i]));
        ext
    }

    fn filtfilt_lanes<const L: usize>(&self, series: [&[f64]; L]) -> [Vec<f64>; L] {
        let pad = self.pad_len();
        let n = series[0].len();
        let mut ext: [Vec<f64>; L] = series.map(|s| Self::extend(s, pad));
        let zi = self.steady_states();
        self.run_lanes(&mut ext, &zi);
        ext.iter_mut().for_each(|e| e.reverse());
        self.run_lanes(&mut ext, &zi);
        ext.map(|mut e| {
            e.reverse();
            e.truncate(pad + n);
            e.drain(..pad);
            e
        })
    }

    /// Zero-phase (forward-backward) filtering; output length equals input length.
    pub fn filtfilt(&self, series: &[f64]) -> Result<Vec<f64>> {
        self.check_len(series.len())?;
        let [out] = self.filtfilt_lanes([series]);
        Ok(out)
    }

    /// [`Butterworth::filtfilt`] over many series of equal length. Results
    /// are identical to filtering each series on its own.
    pub fn filtfilt_many(&self, series: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let Some(first) = series.first() else {
            return Ok(Vec::new());
        };
        self.check_len(first.len())?;
        if series.iter().any(|s| s.len() != first.len()) {
            return Err(Error::Length("series differ in length".into()));
        }
        let mut out = Vec::with_capacity(series.len());
        let mut chunks = series.chunks_exact(4);
        for c in &mut chunks {
            out.extend(self.filtfilt_lanes([&c[0][..], &c[1][..], &c[2][..], &c[3][..]]));
        }
        for s in chunks.remainder() {
            out.extend(self.filtfilt_lanes([&s[..]]));
        }
        Ok(out)
    }
}

/// Design the filter for `spec` and apply it forward-backward to `series`.
pub fn lowpass_filter(series: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    Butterworth::design(*spec)?.filtfilt(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn sine(freq: f64, fs: f64, secs: f64) -> Vec<f64> {
        let n = (fs * secs) as usize;
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin())
            .collect()
    }

    /// Empirical gain: RMS ratio over the middle of a long sinusoid.
    fn measured_gain(freq: f64) -> f64 {
        let spec = FilterSpec::lowpass(38.0, 2500.0);
        let x = sine(freq, 2500.0, 10.0);
        let y = lowpass_filter(&x, &spec).unwrap();
        let (a, b) = (2500, x.len() - 2500);
        rms(&y[a..b]) / rms(&x[a..b])
    }

    #[test]
    fn dc_passes_unchanged() {
        let spec = FilterSpec::lowpass(38.0, 2500.0);
        let y = lowpass_filter(&vec![3.25; 1000], &spec).unwrap();
        assert!(y.iter().all(|v| (v - 3.25).abs() < 1e-6));
    }

    #[test]
    fn highpass_blocks_dc() {
        let spec = FilterSpec {
            mode: FilterMode::Highpass,
            ..FilterSpec::lowpass(38.0, 2500.0)
        };
        let y = lowpass_filter(&vec![3.25; 1000], &spec).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-9));
        let g = {
            let x = sine(200.0, 2500.0, 4.0);
            let y = lowpass_filter(&x, &spec).unwrap();
            rms(&y[2500..7500]) / rms(&x[2500..7500])
        };
        assert!(g > 0.99, "{g}");
    }

    #[test]
    fn sinusoid_response() {
        let pass = measured_gain(10.0);
        assert!(pass >= 0.99, "10 Hz gain {pass}");
        let stop = measured_gain(200.0);
        assert!(stop <= 0.1, "200 Hz gain {stop}");
    }

    #[test]
    fn attenuation_contract() {
        // Measured on pure sinusoids across both bands.
        for f in [1.0, 5.0, 15.0, 25.0, 30.4] {
            let db = 20.0 * measured_gain(f).log10();
            assert!(db >= -1.0, "{f} Hz: {db} dB");
        }
        for f in [95.0, 120.0, 300.0, 600.0] {
            let db = 20.0 * measured_gain(f).log10();
            assert!(db <= -20.0, "{f} Hz: {db} dB");
        }
    }

    #[test]
    fn analytic_magnitude_matches_butterworth() {
        let f = Butterworth::design(FilterSpec::lowpass(38.0, 2500.0)).unwrap();
        assert!((f.magnitude(0.0) - 1.0).abs() < 1e-12);
        // The zero-phase (squared) response is -3 dB at the cutoff.
        let zero_phase = f.magnitude(38.0).powi(2);
        assert!((zero_phase - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        let hp = Butterworth::design(FilterSpec {
            mode: FilterMode::Highpass,
            ..FilterSpec::lowpass(38.0, 2500.0)
        })
        .unwrap();
        assert!((hp.magnitude(38.0).powi(2) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(hp.magnitude(1249.0) > 0.999);
    }

    #[test]
    fn too_short_and_bad_spec() {
        let spec = FilterSpec::lowpass(38.0, 2500.0);
        assert!(matches!(lowpass_filter(&[1.0; 15], &spec), Err(Error::Length(_))));
        assert!(lowpass_filter(&[1.0; 16], &spec).is_ok());
        let bad = FilterSpec::lowpass(1300.0, 2500.0);
        assert!(matches!(lowpass_filter(&[1.0; 100], &bad), Err(Error::Domain(_))));
        let bad = FilterSpec { order: 3, ..spec };
        assert!(matches!(lowpass_filter(&[1.0; 100], &bad), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn linear(
            x in proptest::collection::vec(-10.0f64..10.0, 64),
            y in proptest::collection::vec(-10.0f64..10.0, 64),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let spec = FilterSpec::lowpass(38.0, 2500.0);
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = lowpass_filter(&combo, &spec).unwrap();
            let fx = lowpass_filter(&x, &spec).unwrap();
            let fy = lowpass_filter(&y, &spec).unwrap();
            for i in 0..64 {
                prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
            }
        }
    }
}
