//! Robust received-signal-strength source localization with inaccurate
//! anchor positions.
//!
//! The crate contains the measurement model ([`model`]), trial generation
//! ([`scenario`]), a conic-program layer ([`conic`]), the robust min-max SDP
//! estimator with five baselines ([`estimators`]), rounding of relaxed
//! solutions ([`rounding`]) and a seeded Monte Carlo harness ([`bench`]).

pub mod bench;
pub mod conic;
pub mod error;
pub mod estimators;
pub mod model;
pub mod rounding;
pub mod scenario;

pub use error::{Error, Result};
pub use model::{PathLossModel, Point2};
