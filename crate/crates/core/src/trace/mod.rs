//! CSI trace model: the packet-indexed complex tensor, amplitude and phase
//! views of one antenna pair, and ground-truth labels.

mod io;
mod labels;

pub use io::{load_trace, read_trace, save_trace, write_trace, HEADER_LEN, TRACE_MAGIC, TRACE_VERSION};
pub use labels::{load_labels, read_labels, save_labels, write_labels, GroundTruthLabel, Lane, VehicleClass};

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};

/// Subcarriers reported per antenna pair by the receiver NIC.
pub const N_SUBCARRIERS: usize = 30;

/// Default CSI sampling rate (packets per second).
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 2500.0;

/// Default TX-RX antenna pair count (1 TX, 3 RX).
pub const DEFAULT_PAIRS: usize = 3;

/// Packet-indexed CSI tensor, laid out `[packet][pair][subcarrier]`.
///
/// Values are held at the on-disk 32-bit precision; every accessor promotes to
/// 64-bit before any arithmetic happens.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTrace {
    n_packets: usize,
    n_pairs: usize,
    sample_rate_hz: f64,
    values: Vec<Complex32>,
}

impl CsiTrace {
    pub fn new(
        n_packets: usize,
        n_pairs: usize,
        sample_rate_hz: f64,
        values: Vec<Complex32>,
    ) -> Result<Self> {
        if n_packets == 0 {
            return Err(Error::Invariant("trace must contain at least one packet".into()));
        }
        if n_pairs == 0 || n_pairs > u8::MAX as usize {
            return Err(Error::Invariant(format!("antenna pair count {n_pairs} not in 1..=255")));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Invariant(format!("sample rate {sample_rate_hz} must be positive")));
        }
        let expected = n_packets * n_pairs * N_SUBCARRIERS;
        if values.len() != expected {
            return Err(Error::Invariant(format!(
                "tensor has {} values, expected {n_packets} x {n_pairs} x {N_SUBCARRIERS} = {expected}",
                values.len()
            )));
        }
        Ok(Self {
            n_packets,
            n_pairs,
            sample_rate_hz,
            values,
        })
    }

    pub fn n_packets(&self) -> usize {
        self.n_packets
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_subcarriers(&self) -> usize {
        N_SUBCARRIERS
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Raw stored values in packet-major order.
    pub fn raw_values(&self) -> &[Complex32] {
        &self.values
    }

    #[inline]
    fn offset(&self, packet: usize, pair: usize, sub: usize) -> usize {
        (packet * self.n_pairs + pair) * N_SUBCARRIERS + sub
    }

    /// CSI value promoted to 64-bit.
    #[inline]
    pub fn value(&self, packet: usize, pair: usize, sub: usize) -> Complex64 {
        let v = self.values[self.offset(packet, pair, sub)];
        Complex64::new(v.re as f64, v.im as f64)
    }

    /// The 30 subcarrier values of one packet and pair.
    #[inline]
    pub fn subcarriers(&self, packet: usize, pair: usize) -> &[Complex32] {
        let start = self.offset(packet, pair, 0);
        &self.values[start..start + N_SUBCARRIERS]
    }

    fn check_pair(&self, pair: usize) -> Result<()> {
        if pair >= self.n_pairs {
            Err(Error::Index {
                index: pair,
                len: self.n_pairs,
            })
        } else {
            Ok(())
        }
    }

    /// Modulus of every value of one antenna pair.
    pub fn extract_amplitude(&self, pair: usize) -> Result<AmplitudeMatrix> {
        self.check_pair(pair)?;
        let mut entries = Vec::with_capacity(self.n_packets * N_SUBCARRIERS);
        for p in 0..self.n_packets {
            entries.extend(self.subcarriers(p, pair).iter().map(modulus));
        }
        Ok(AmplitudeMatrix {
            n_packets: self.n_packets,
            entries,
        })
    }

    /// Amplitudes of one antenna pair as 30 per-subcarrier series.
    pub fn amplitude_columns(&self, pair: usize) -> Result<Vec<Vec<f64>>> {
        self.check_pair(pair)?;
        let mut columns = vec![vec![0.0; self.n_packets]; N_SUBCARRIERS];
        for p in 0..self.n_packets {
            for (col, v) in columns.iter_mut().zip(self.subcarriers(p, pair)) {
                col[p] = modulus(v);
            }
        }
        Ok(columns)
    }

    /// Per-packet principal-value phases of one antenna pair, lazily.
    pub fn phase_rows(&self, pair: usize) -> Result<impl Iterator<Item = [f64; N_SUBCARRIERS]> + '_> {
        self.check_pair(pair)?;
        Ok((0..self.n_packets).map(move |p| {
            let mut row = [0.0; N_SUBCARRIERS];
            for (o, v) in row.iter_mut().zip(self.subcarriers(p, pair)) {
                *o = principal_phase(v.re as f64, v.im as f64);
            }
            row
        }))
    }

    /// Principal-value argument of every value of one antenna pair.
    /// A zero value has phase 0.
    pub fn extract_phase(&self, pair: usize) -> Result<PhaseMatrix> {
        self.check_pair(pair)?;
        let mut entries = Vec::with_capacity(self.n_packets * N_SUBCARRIERS);
        for p in 0..self.n_packets {
            entries.extend(
                self.subcarriers(p, pair)
                    .iter()
                    .map(|v| principal_phase(v.re as f64, v.im as f64)),
            );
        }
        Ok(PhaseMatrix {
            n_packets: self.n_packets,
            entries,
        })
    }
}

/// Modulus in 64-bit. The parts come from 32-bit floats, so the squares
/// cannot overflow and `hypot`'s scaling is unnecessary.
#[inline]
fn modulus(v: &Complex32) -> f64 {
    let (re, im) = (v.re as f64, v.im as f64);
    (re * re + im * im).sqrt()
}

/// Argument in (-pi, pi]; atan2 already maps the negative real axis to +pi
/// except for a signed negative zero imaginary part, which is folded here.
#[inline]
pub(crate) fn principal_phase(re: f64, im: f64) -> f64 {
    if re == 0.0 && im == 0.0 {
        return 0.0;
    }
    let phi = im.atan2(re);
    if phi <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        phi
    }
}

macro_rules! packet_matrix {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            n_packets: usize,
            entries: Vec<f64>,
        }

        impl $name {
            /// Build from row-major `[packet][subcarrier]` entries.
            pub fn from_rows(n_packets: usize, entries: Vec<f64>) -> Result<Self> {
                if entries.len() != n_packets * N_SUBCARRIERS {
                    return Err(Error::Shape(format!(
                        "expected {} entries for {n_packets} packets, got {}",
                        n_packets * N_SUBCARRIERS,
                        entries.len()
                    )));
                }
                let m = Self { n_packets, entries };
                m.validate()?;
                Ok(m)
            }

            pub fn n_packets(&self) -> usize {
                self.n_packets
            }

            pub fn n_subcarriers(&self) -> usize {
                N_SUBCARRIERS
            }

            pub fn entries(&self) -> &[f64] {
                &self.entries
            }

            pub fn row(&self, packet: usize) -> &[f64] {
                &self.entries[packet * N_SUBCARRIERS..(packet + 1) * N_SUBCARRIERS]
            }

            pub fn get(&self, packet: usize, sub: usize) -> f64 {
                self.entries[packet * N_SUBCARRIERS + sub]
            }

            /// One subcarrier's stream across all packets.
            pub fn column(&self, sub: usize) -> Vec<f64> {
                self.entries
                    .iter()
                    .skip(sub)
                    .step_by(N_SUBCARRIERS)
                    .copied()
                    .collect()
            }

            /// Reassemble from per-subcarrier columns of equal length.
            pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
                if columns.len() != N_SUBCARRIERS {
                    return Err(Error::Shape(format!(
                        "expected {N_SUBCARRIERS} columns, got {}",
                        columns.len()
                    )));
                }
                let n = columns[0].len();
                if columns.iter().any(|c| c.len() != n) {
                    return Err(Error::Shape("columns differ in length".into()));
                }
                let mut entries = vec![0.0; n * N_SUBCARRIERS];
                for (s, col) in columns.iter().enumerate() {
                    for (p, &v) in col.iter().enumerate() {
                        entries[p * N_SUBCARRIERS + s] = v;
                    }
                }
                Self::from_rows(n, entries)
            }
        }
    };
}

packet_matrix!(
    AmplitudeMatrix,
    "Linear CSI amplitudes of one antenna pair, `[packet][subcarrier]`."
);
packet_matrix!(
    PhaseMatrix,
    "Principal-value CSI phases (radians) of one antenna pair, `[packet][subcarrier]`."
);

impl AmplitudeMatrix {
    fn validate(&self) -> Result<()> {
        // Filtered amplitudes may legitimately ring slightly below zero, so
        // only raw constructors enforce non-negativity.
        if self.entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("amplitude entries must be finite".into()));
        }
        Ok(())
    }

    /// True when every entry is a valid raw modulus (non-negative).
    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|&v| v >= 0.0)
    }
}

impl PhaseMatrix {
    fn validate(&self) -> Result<()> {
        use std::f64::consts::PI;
        if let Some(v) = self.entries.iter().find(|v| !(**v > -PI && **v <= PI)) {
            return Err(Error::Invariant(format!("phase {v} outside (-pi, pi]")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn single(v: Complex32) -> CsiTrace {
        let mut values = vec![Complex32::new(1.0, 0.0); N_SUBCARRIERS];
        values[0] = v;
        CsiTrace::new(1, 1, DEFAULT_SAMPLE_RATE_HZ, values).unwrap()
    }

    #[test]
    fn pythagorean_amplitude() {
        let t = single(Complex32::new(3.0, 4.0));
        assert_eq!(t.extract_amplitude(0).unwrap().get(0, 0), 5.0);
        let t = single(Complex32::new(0.0, 0.0));
        assert_eq!(t.extract_amplitude(0).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn phase_conventions() {
        assert_eq!(single(Complex32::new(0.0, 1.0)).extract_phase(0).unwrap().get(0, 0), PI / 2.0);
        assert_eq!(single(Complex32::new(-1.0, 0.0)).extract_phase(0).unwrap().get(0, 0), PI);
        assert_eq!(single(Complex32::new(-1.0, -0.0)).extract_phase(0).unwrap().get(0, 0), PI);
        assert_eq!(single(Complex32::new(0.0, 0.0)).extract_phase(0).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn pair_out_of_range() {
        let t = single(Complex32::new(1.0, 1.0));
        assert!(matches!(t.extract_amplitude(1), Err(Error::Index { index: 1, len: 1 })));
        assert!(matches!(t.extract_phase(3), Err(Error::Index { .. })));
    }

    #[test]
    fn zero_packets_rejected() {
        assert!(matches!(
            CsiTrace::new(0, 3, 2500.0, vec![]),
            Err(Error::Invariant(_))
        ));
        assert!(CsiTrace::new(1, 1, 0.0, vec![Complex32::default(); 30]).is_err());
        assert!(CsiTrace::new(1, 1, 2500.0, vec![Complex32::default(); 29]).is_err());
    }

    #[test]
    fn columns_round_trip() {
        let entries: Vec<f64> = (0..90).map(|i| i as f64).collect();
        let m = AmplitudeMatrix::from_rows(3, entries.clone()).unwrap();
        let cols: Vec<Vec<f64>> = (0..30).map(|s| m.column(s)).collect();
        assert_eq!(cols[1], vec![1.0, 31.0, 61.0]);
        assert_eq!(AmplitudeMatrix::from_columns(&cols).unwrap().entries(), &entries[..]);
    }
}
