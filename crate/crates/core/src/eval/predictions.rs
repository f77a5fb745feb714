//! Prediction files: one JSON object per line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::VehicleClass;

/// A detection window with its predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassedEvent {
    /// Name of the event file the window came from; empty for a single trace.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
    pub start_index: usize,
    pub end_index: usize,
    pub class: VehicleClass,
    pub probabilities: Vec<f64>,
}

pub fn write_predictions(preds: &[ClassedEvent]) -> Result<String> {
    let mut out = String::new();
    for p in preds {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_predictions(text: &str) -> Result<Vec<ClassedEvent>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let p: ClassedEvent =
                serde_json::from_str(l).map_err(|e| Error::Format(format!("prediction line {}: {e}", i + 1)))?;
            if p.start_index > p.end_index {
                return Err(Error::Format(format!("prediction line {}: start after end", i + 1)));
            }
            Ok(p)
        })
        .collect()
}

pub fn save_predictions(preds: &[ClassedEvent], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_predictions(preds)?).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<ClassedEvent>> {
    let path = path.as_ref();
    read_predictions(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
