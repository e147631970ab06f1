use serde::{Deserialize, Serialize};

use super::EmtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    R,
    L,
    C,
}

/// Trapezoidal companion of a lumped element: `i(t) = G·v(t) + history`,
/// with `i` and `v` taken in the element's own from→to direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionBranch {
    pub kind: ElementKind,
    pub value: f64,
    pub conductance: f64,
    pub history_current: f64,
}

/// Builds the companion model of an element for step `dt`.
pub fn discretize(kind: ElementKind, value: f64, dt: f64) -> Result<CompanionBranch, EmtError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(EmtError::InvalidStep(dt));
    }
    if !(value.is_finite() && value > 0.0) {
        return Err(EmtError::NonPositiveValue { kind, value });
    }
    let conductance = match kind {
        ElementKind::R => 1.0 / value,
        ElementKind::L => dt / (2.0 * value),
        ElementKind::C => 2.0 * value / dt,
    };
    Ok(CompanionBranch {
        kind,
        value,
        conductance,
        history_current: 0.0,
    })
}

impl CompanionBranch {
    /// Branch current for the voltage just solved.
    pub fn current(&self, v: f64) -> f64 {
        self.conductance * v + self.history_current
    }

    /// Sets the history term for the next step from this step's `v` and `i`.
    pub fn advance(&mut self, v: f64, i: f64) {
        self.history_current = match self.kind {
            ElementKind::R => 0.0,
            ElementKind::L => i + self.conductance * v,
            ElementKind::C => -i - self.conductance * v,
        };
    }
}
