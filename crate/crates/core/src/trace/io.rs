//! Binary trace file format (little-endian):
//!
//! ```text
//! magic "CSI1" | version u16 = 1 | n_packets u32 | n_pairs u8 | n_sub u8 = 30
//! | sample_rate_hz f64 | n_packets * n_pairs * n_sub records of (re f32, im f32)
//! ```
//!
//! Records are packet-major, then pair, then subcarrier.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex32;

use super::{CsiTrace, N_SUBCARRIERS};
use crate::error::{Error, Result};

pub const TRACE_MAGIC: &[u8; 4] = b"CSI1";
pub const TRACE_VERSION: u16 = 1;
/// Header size in bytes: 4 + 2 + 4 + 1 + 1 + 8.
pub const HEADER_LEN: usize = 20;

/// Serialize a trace into `out`.
pub fn write_trace(trace: &CsiTrace, out: &mut Vec<u8>) -> Result<()> {
    let n_packets = u32::try_from(trace.n_packets())
        .map_err(|_| Error::Invariant("packet count exceeds u32".into()))?;
    out.reserve(HEADER_LEN + trace.raw_values().len() * 8);
    out.extend_from_slice(TRACE_MAGIC);
    out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
    out.extend_from_slice(&n_packets.to_le_bytes());
    out.push(trace.n_pairs() as u8);
    out.push(N_SUBCARRIERS as u8);
    out.extend_from_slice(&trace.sample_rate_hz().to_le_bytes());
    for v in trace.raw_values() {
        out.extend_from_slice(&v.re.to_bits().to_le_bytes());
        out.extend_from_slice(&v.im.to_bits().to_le_bytes());
    }
    Ok(())
}

/// Parse a trace from a complete file image.
pub fn read_trace(bytes: &[u8]) -> Result<CsiTrace> {
    if bytes.len() < 4 || &bytes[..4] != TRACE_MAGIC {
        return Err(Error::Format("missing CSI1 magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Length(format!(
            "header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TRACE_VERSION {
        return Err(Error::Format(format!("unsupported trace version {version}")));
    }
    let n_packets = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let n_pairs = bytes[10] as usize;
    let n_sub = bytes[11] as usize;
    let sample_rate_hz = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if n_sub != N_SUBCARRIERS {
        return Err(Error::UnsupportedShape(format!(
            "{n_sub} subcarriers per pair, only {N_SUBCARRIERS} supported"
        )));
    }
    let n_values = n_packets * n_pairs * n_sub;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n_values * 8 {
        return Err(Error::Length(format!(
            "header declares {n_packets} packets x {n_pairs} pairs ({} payload bytes), found {}",
            n_values * 8,
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|rec| {
            let re = f32::from_bits(u32::from_le_bytes(rec[..4].try_into().unwrap()));
            let im = f32::from_bits(u32::from_le_bytes(rec[4..].try_into().unwrap()));
            Complex32::new(re, im)
        })
        .collect();
    CsiTrace::new(n_packets, n_pairs, sample_rate_hz, values)
}

pub fn save_trace(trace: &CsiTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_trace(trace, &mut buf)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<CsiTrace> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_trace(&bytes)
}
