//! Coarser label groupings of the five vehicle classes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::VehicleClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupScheme {
    /// Every class is its own group.
    Five,
    /// Small, medium, large.
    Sml,
    /// Car-like against truck-like.
    CarTruck,
}

impl GroupScheme {
    pub const ALL: [GroupScheme; 3] = [GroupScheme::Five, GroupScheme::Sml, GroupScheme::CarTruck];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupScheme::Five => "five",
            GroupScheme::Sml => "sml",
            GroupScheme::CarTruck => "car_truck",
        }
    }

    pub fn group_names(self) -> &'static [&'static str] {
        match self {
            GroupScheme::Five => &["bike", "car", "suv", "pickup", "truck"],
            GroupScheme::Sml => &["Small", "Medium", "Large"],
            GroupScheme::CarTruck => &["Car-like", "Truck-like"],
        }
    }

    /// Index of `class`'s group in [`group_names`](Self::group_names).
    pub fn group_index(self, class: VehicleClass) -> usize {
        use VehicleClass::*;
        match (self, class) {
            (GroupScheme::Five, c) => c.ordinal(),
            (GroupScheme::Sml, Bike | PassengerCar) => 0,
            (GroupScheme::Sml, Suv | PickupTruck) => 1,
            (GroupScheme::Sml, LargeTruck) => 2,
            (GroupScheme::CarTruck, LargeTruck) => 1,
            (GroupScheme::CarTruck, _) => 0,
        }
    }
}

impl fmt::Display for GroupScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown grouping scheme {s:?}")))
    }
}

/// Group label of `class` under `scheme`.
pub fn group_prediction(class: VehicleClass, scheme: GroupScheme) -> &'static str {
    scheme.group_names()[scheme.group_index(class)]
}
