//! Native solvers and predictors for four power-system case studies:
//! steady-state fault datasets on a 400 kV line, Monte Carlo lightning
//! performance of a shielded 230 kV line, time-series and Monte Carlo
//! analysis of a small radial feeder, and single-machine transient
//! stability sweeps.
//!
//! Each study lives in its own module and shares the numerical building
//! blocks in [`phasor`], [`emt`] and [`ml`]. The [`studies`] module wires
//! configuration, seeding and report emission together and is what the
//! `gridstudies` binary drives.

pub mod config;
pub mod dist;
pub mod emt;
pub mod fault_lab;
pub mod lightning;
pub mod ml;
pub mod phasor;
pub mod report;
pub mod stability;
pub mod studies;

pub use num_complex::Complex64;
