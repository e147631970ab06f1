use serde::{Deserialize, Serialize};

/// Conductance used for a closed switch.
pub const CLOSED_SWITCH_CONDUCTANCE: f64 = 1e6;

/// Voltage-controlled switch across an insulator. Latches once closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlashoverSwitch {
    pub across_nodes: (usize, usize),
    /// Flashover voltage, volts.
    pub strength: f64,
    pub closed: bool,
    pub close_time: Option<f64>,
}

impl FlashoverSwitch {
    pub fn new(a: usize, b: usize, strength: f64) -> Self {
        Self {
            across_nodes: (a, b),
            strength,
            closed: false,
            close_time: None,
        }
    }
}

/// Closes the switch iff `|v_across| >= strength`; a closed switch stays closed.
pub fn flashover_eval(sw: &FlashoverSwitch, v_across: f64, t: f64) -> FlashoverSwitch {
    let mut out = sw.clone();
    if !out.closed && v_across.abs() >= out.strength {
        out.closed = true;
        out.close_time = Some(t);
    }
    out
}

/// How a switch decides its state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SwitchControl {
    Flashover(FlashoverSwitch),
    /// Closed on `[close_at, open_at)`; `None` means never.
    Timed {
        nodes: (usize, usize),
        close_at: Option<f64>,
        open_at: Option<f64>,
    },
}

impl SwitchControl {
    pub fn nodes(&self) -> (usize, usize) {
        match self {
            SwitchControl::Flashover(s) => s.across_nodes,
            SwitchControl::Timed { nodes, .. } => *nodes,
        }
    }

    pub(crate) fn closed_at(&self, t: f64) -> bool {
        match self {
            SwitchControl::Flashover(s) => s.closed,
            SwitchControl::Timed {
                close_at, open_at, ..
            } => close_at.is_some_and(|c| t >= c) && !open_at.is_some_and(|o| t >= o),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_inclusive() {
        let sw = FlashoverSwitch::new(1, 2, 1000.0);
        assert!(!flashover_eval(&sw, 990.0, 0.0).closed);
        let closed = flashover_eval(&sw, -1000.0, 2e-6);
        assert!(closed.closed);
        assert_eq!(closed.close_time, Some(2e-6));
    }

    #[test]
    fn latches() {
        let sw = flashover_eval(&FlashoverSwitch::new(1, 2, 10.0), 10.0, 1.0);
        let again = flashover_eval(&sw, 0.0, 5.0);
        assert!(again.closed);
        assert_eq!(again.close_time, Some(1.0));
    }

    #[test]
    fn timed_window() {
        let s = SwitchControl::Timed {
            nodes: (1, 0),
            close_at: Some(0.0),
            open_at: Some(1.0),
        };
        assert!(s.closed_at(0.5));
        assert!(!s.closed_at(1.0));
    }
}
