//! Behavioral toolkit for reconfigurable FeFET frequency multipliers.
//!
//! Models programmable-threshold ferroelectric transistors, composes them
//! into eight two- and four-transistor multiplier structures, and verifies
//! 1x-4x frequency multiplication end to end: netlist parsing, DC
//! transfer-curve synthesis, write sequencing, operating-point tuning,
//! transient simulation, harmonic-spectrum analysis, and an FSK case study.
//!
//! The numeric core is generic over the scalar type (`f32`/`f64`) through
//! [`Real`]; the `*64` aliases below pin the usual double-precision case.

pub mod circuit;
pub mod device;
pub mod netlist;
pub mod programming;
pub mod scalar;
pub mod spectrum;
pub mod tuner;

pub use scalar::Real;

/// Double-precision aliases for the core types.
pub type FeFetParams64 = device::FeFetParams<f64>;
pub type FeFetState64 = device::FeFetState<f64>;
pub type ProgramPulse64 = device::ProgramPulse<f64>;
pub type CircuitSpec64 = netlist::CircuitSpec<f64>;
pub type Circuit64 = circuit::Circuit<f64>;
pub type TransferCurve64 = circuit::TransferCurve<f64>;
