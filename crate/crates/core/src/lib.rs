//! Feedback laws that steer differentially flat systems to the minimizer of
//! time-varying convex programs, plus the tooling to simulate and check them.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod flat;
pub mod numerics;
pub mod problem;
pub mod scenarios;
pub mod sim;
pub mod target;

pub use error::{Error, Result};
