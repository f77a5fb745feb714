//! Event files: newline-delimited JSON metadata plus a binary sidecar of row
//! data.
//!
//! The sidecar (same path, `.bin` extension) has no header. For each event in
//! file order it holds `len * n_pairs` little-endian records of
//! `(amplitude f32, phase f32)`, sample-major then pair, where `len` and
//! `n_pairs` come from the JSON line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DetectionEvent;
use crate::error::{Error, Result};
use crate::trace::{Lane, VehicleClass};

/// JSON metadata line for one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub start_index: usize,
    pub end_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<Lane>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<VehicleClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<i64>,
    pub n_pairs: usize,
    pub sample_rate_hz: f64,
    pub baseline_mean: f64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("bin")
}

/// Serialize events to `(jsonl, sidecar)` byte buffers.
pub fn write_events(events: &[DetectionEvent]) -> Result<(String, Vec<u8>)> {
    let mut json = String::new();
    let mut bin = Vec::new();
    for e in events {
        e.validate()?;
        let rec = EventRecord {
            start_index: e.start_index,
            end_index: e.end_index,
            lane: e.lane,
            class: e.class,
            event_id: e.event_id,
            n_pairs: e.n_pairs(),
            sample_rate_hz: e.sample_rate_hz,
            baseline_mean: e.baseline_mean,
        };
        json.push_str(&serde_json::to_string(&rec)?);
        json.push('\n');
        for i in 0..e.len() {
            for (a, p) in e.amplitude_rows.iter().zip(&e.phase_rows) {
                bin.extend_from_slice(&(a[i] as f32).to_le_bytes());
                bin.extend_from_slice(&(p[i] as f32).to_le_bytes());
            }
        }
    }
    Ok((json, bin))
}

pub fn read_events(json: &str, bin: &[u8]) -> Result<Vec<DetectionEvent>> {
    let mut events = Vec::new();
    let mut offset = 0usize;
    for (lineno, line) in json.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("event line {}: {e}", lineno + 1)))?;
        if rec.end_index < rec.start_index || rec.n_pairs == 0 {
            return Err(Error::Format(format!("event line {}: bad dimensions", lineno + 1)));
        }
        let len = rec.end_index - rec.start_index + 1;
        let bytes = len * rec.n_pairs * 8;
        let chunk = bin.get(offset..offset + bytes).ok_or_else(|| {
            Error::Length(format!(
                "sidecar ends at byte {} but event line {} needs bytes {offset}..{}",
                bin.len(),
                lineno + 1,
                offset + bytes
            ))
        })?;
        offset += bytes;
        let mut amplitude_rows = vec![Vec::with_capacity(len); rec.n_pairs];
        let mut phase_rows = vec![Vec::with_capacity(len); rec.n_pairs];
        for (k, r) in chunk.chunks_exact(8).enumerate() {
            let pair = k % rec.n_pairs;
            amplitude_rows[pair].push(f32::from_le_bytes(r[..4].try_into().unwrap()) as f64);
            phase_rows[pair].push(f32::from_le_bytes(r[4..].try_into().unwrap()) as f64);
        }
        events.push(DetectionEvent {
            start_index: rec.start_index,
            end_index: rec.end_index,
            amplitude_rows,
            phase_rows,
            sample_rate_hz: rec.sample_rate_hz,
            baseline_mean: rec.baseline_mean,
            event_id: rec.event_id,
            lane: rec.lane,
            class: rec.class,
        });
    }
    if offset != bin.len() {
        return Err(Error::Length(format!(
            "sidecar has {} trailing bytes",
            bin.len() - offset
        )));
    }
    Ok(events)
}

/// Write `path` (JSON lines) and its `.bin` sidecar.
pub fn save_events(events: &[DetectionEvent], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (json, bin) = write_events(events)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    fs::write(&side, bin).map_err(|e| Error::io(side, e))
}

pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<DetectionEvent>> {
    let path = path.as_ref();
    let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let bin = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    read_events(&json, &bin)
}

/// Load every `*.jsonl` event file in `dir`, sorted by file name. Each entry
/// is tagged with the file stem.
pub fn load_event_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, Vec<DetectionEvent>)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((stem, load_events(&p)?))
        })
        .collect()
}
