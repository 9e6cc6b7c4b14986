//! Deterministic simulator and experiment harness for a free-swimming,
//! single-joint robotic tuna with a morphing dorsal fin.
//!
//! The crate is organised bottom-up:
//!
//! * [`hydro`]: rigid-body surge/sway/yaw/heave dynamics under quasi-steady
//!   hydrodynamic forces, advanced by fixed-step RK4.
//! * [`linkage`]: four-bar kinematics of the dorsal-fin erection mechanism.
//! * [`control`]: caudal gait law, PID depth hold and the syringe buoyancy actuator.
//! * [`metrics`]: power, cost of transport, peak-to-peak yaw and curve fits.
//! * [`experiments`]: speed sweeps, yaw studies, depth steps and calibration.
//! * [`telemetry`], [`plot`], [`config`]: file formats used by the CLI.

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod hydro;
pub mod linkage;
pub mod metrics;
pub mod plot;
pub mod telemetry;

pub use error::{Error, Result};
