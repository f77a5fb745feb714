use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five vehicle types, in ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VehicleClass {
    #[serde(rename = "bike")]
    Bike,
    #[serde(rename = "car")]
    PassengerCar,
    #[serde(rename = "suv")]
    Suv,
    #[serde(rename = "pickup")]
    PickupTruck,
    #[serde(rename = "truck")]
    LargeTruck,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 5] = [
        VehicleClass::Bike,
        VehicleClass::PassengerCar,
        VehicleClass::Suv,
        VehicleClass::PickupTruck,
        VehicleClass::LargeTruck,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Label-file spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Bike => "bike",
            VehicleClass::PassengerCar => "car",
            VehicleClass::Suv => "suv",
            VehicleClass::PickupTruck => "pickup",
            VehicleClass::LargeTruck => "truck",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown vehicle class {s:?}")))
    }
}

/// Road lane; lane 1 is nearer the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Lane {
    One,
    Two,
}

impl Lane {
    pub const ALL: [Lane; 2] = [Lane::One, Lane::Two];

    pub fn number(self) -> u8 {
        match self {
            Lane::One => 1,
            Lane::Two => 2,
        }
    }
}

impl TryFrom<u8> for Lane {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Lane::One),
            2 => Ok(Lane::Two),
            other => Err(format!("lane must be 1 or 2, got {other}")),
        }
    }
}

impl From<Lane> for u8 {
    fn from(l: Lane) -> u8 {
        l.number()
    }
}

impl fmt::Display for Lane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// One labelled vehicle passage, as packet indices into its trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub event_id: i64,
    pub start_index: usize,
    pub end_index: usize,
    #[serde(rename = "class")]
    pub vehicle_class: VehicleClass,
    pub lane: Lane,
}

impl GroundTruthLabel {
    pub fn validate(&self, n_packets: Option<usize>) -> Result<()> {
        if self.start_index >= self.end_index {
            return Err(Error::Invariant(format!(
                "label {}: start {} not before end {}",
                self.event_id, self.start_index, self.end_index
            )));
        }
        if let Some(n) = n_packets {
            if self.end_index >= n {
                return Err(Error::Invariant(format!(
                    "label {}: end {} beyond trace of {n} packets",
                    self.event_id, self.end_index
                )));
            }
        }
        Ok(())
    }
}

/// Serialize labels as newline-delimited JSON.
pub fn write_labels(labels: &[GroundTruthLabel]) -> Result<String> {
    let mut out = String::new();
    for l in labels {
        l.validate(None)?;
        out.push_str(&serde_json::to_string(l)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_labels(text: &str) -> Result<Vec<GroundTruthLabel>> {
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let label: GroundTruthLabel = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("label line {}: {e}", lineno + 1)))?;
        label.validate(None)?;
        labels.push(label);
    }
    Ok(labels)
}

pub fn save_labels(labels: &[GroundTruthLabel], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_labels(labels)?).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<GroundTruthLabel>> {
    let path = path.as_ref();
    read_labels(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
