//! Instance generators, calibration, and the invariant and acceptance suites.

pub mod calibrate;
pub mod generate;
pub mod suite;
pub mod criteria;
