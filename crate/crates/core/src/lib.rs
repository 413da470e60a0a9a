//! Dephasing-enhanced quantum metrology at desk scale.
//!
//! Closed and dephasing dynamics of small sensor networks, quantum Fisher
//! information (numeric via the symmetric logarithmic derivative and analytic
//! for cat states), measurement-based estimators, and advantage-region scans.

pub mod error;
pub mod linalg;
pub mod hilbert;
pub mod schedule;
pub mod dynamics;
pub mod fisher;
pub mod estimators;
pub mod protocols;
pub mod plot;
pub mod cli;

pub use error::{Error, Result};
