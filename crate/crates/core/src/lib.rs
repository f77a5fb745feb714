//! Roadside vehicle detection and classification from WiFi channel state
//! information.
//!
//! The pipeline runs in fixed stage order:
//!
//! 1. [`trace`]: load a CSI trace and split it into amplitude and phase.
//! 2. [`preprocess`]: low-pass filter amplitudes, reduce the 30 subcarrier
//!    streams of each antenna pair to one principal component, and remove the
//!    receiver's timing and phase offsets from the phase.
//! 3. [`detect`]: flag scaled-MAD outliers on the reduced amplitude stream and
//!    cut a window around every sufficiently long outlier run.
//! 4. [`classify`]: turn each window into a 6 x 2500 image and classify it
//!    with a two-block CNN (or a kNN baseline over hand-made features).
//! 5. [`eval`]: match detections to ground truth and score them.
//!
//! [`synth`] produces labelled synthetic traces to drive all of the above.

pub mod classify;
pub mod cli;
pub mod detect;
pub mod error;
pub mod eval;
pub mod par;
pub mod preprocess;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{CsiTrace, GroundTruthLabel, Lane, VehicleClass};
