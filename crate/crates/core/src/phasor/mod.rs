//! Complex steady-state nodal analysis.
//!
//! Nodes are numbered `1..=node_count`; node `0` is ground and never appears
//! in the admittance matrix. Three-phase equipment is represented by giving
//! every phase its own node and using [`CoupledBranch`] where the phases are
//! magnetically coupled.

mod doc;
mod fault;
mod line;
mod network;

pub use doc::{parse_network, write_solution_csv, NetworkDoc};
pub use fault::{apply_fault, apply_fault_at, FaultSpec, FaultType, MIN_FAULT_RESISTANCE};
pub use line::LineSectionModel;
pub use network::{
    assemble_admittance, rms_report, solve_steady_state, Branch, CoupledBranch, NodeLabel, Phase,
    PhasorNetwork, PhasorSolution, PhasorSolver, Source,
};

use thiserror::Error;

/// Complex RMS quantity: volts, amperes, ohms or siemens depending on context.
pub type Phasor = num_complex::Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhasorError {
    #[error("singular network: node {0} is floating")]
    FloatingNode(usize),
    #[error("singular network")]
    Singular,
    #[error("network has no sources")]
    NoSource,
    #[error("node {node} out of range (network has {node_count} nodes)")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("invalid fault type code {0} (expected 1..=11)")]
    InvalidFaultType(u32),
    #[error("fault distance {distance_km} km outside (0, {length_km}) km")]
    FaultDistance { distance_km: f64, length_km: f64 },
    #[error("fault resistance must be finite and non-negative, got {0}")]
    FaultResistance(f64),
    #[error("branch {0} has zero series impedance")]
    ZeroImpedance(usize),
    #[error("network description: {0}")]
    Parse(String),
}
