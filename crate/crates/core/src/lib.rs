//! Simulation of two-way driver interactions in which every driver keeps a
//! deterministic plan, a Gaussian belief about the other vehicle, and
//! re-plans only when the perceived collision risk crosses a threshold.

pub mod analysis;
pub mod belief;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod exec;
pub mod optimize;
pub mod output;
pub mod planner;
pub mod risk;
pub mod scenario;
pub mod track;
pub mod verify;

pub use error::{CeiError, Result};
