//! Fixed-step electromagnetic transients solver.
//!
//! Lumped R, L and C elements are replaced by trapezoidal companion models
//! (a conductance in parallel with a history current), lossless lines by
//! Bergeron characteristics, and the resulting resistive network is solved
//! once per time step. Node `0` is ground.

mod bergeron;
mod companion;
mod network;
mod source;
mod switch;

pub use bergeron::BergeronLine;
pub use companion::{discretize, CompanionBranch, ElementKind};
pub use network::{write_waveform_csv, EmtNetwork, EmtSolver, SwitchId, Trace};
pub use source::{DoubleRampSource, Waveform};
pub use switch::{flashover_eval, FlashoverSwitch, SwitchControl, CLOSED_SWITCH_CONDUCTANCE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmtError {
    #[error("{kind:?} value must be positive, got {value}")]
    NonPositiveValue { kind: ElementKind, value: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("line travel time {tau} s is shorter than the time step {dt} s")]
    LineTooShort { tau: f64, dt: f64 },
    #[error("surge impedance matrix is not invertible")]
    BadSurgeImpedance,
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("node {node} out of range (network has {node_count} nodes)")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("{0}")]
    Dimension(String),
    #[error("singular conductance matrix at t = {0} s")]
    Singular(f64),
}

/// Fixed simulation time step and end time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub t_end: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self, EmtError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EmtError::InvalidStep(dt));
        }
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(EmtError::InvalidStep(t_end));
        }
        Ok(Self { dt, t_end })
    }

    /// Number of steps after t = 0, `ceil(t_end / dt)`.
    pub fn step_count(&self) -> usize {
        // guard against 30e-6 / 10e-9 landing a hair above an integer
        let q = self.t_end / self.dt;
        let r = q.round();
        if (q - r).abs() < 1e-9 * r.max(1.0) {
            r as usize
        } else {
            q.ceil() as usize
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_rounds_up() {
        assert_eq!(TimeGrid::new(10e-9, 30e-6).unwrap().step_count(), 3000);
        assert_eq!(TimeGrid::new(0.3, 1.0).unwrap().step_count(), 4);
        assert_eq!(TimeGrid::new(1e-3, 0.0).unwrap().step_count(), 0);
        assert!(TimeGrid::new(0.0, 1.0).is_err());
    }
}
