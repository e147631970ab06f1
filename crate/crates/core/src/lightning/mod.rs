//! Monte Carlo lightning performance of a shielded overhead line.
//!
//! Strokes are sampled over a strip centred on the line, the
//! electrogeometric model decides what each vertical channel hits, and every
//! hit on the line is simulated on a travelling-wave model of the nearby
//! spans and towers to see whether an insulator string flashes over.

mod egm;
mod sample;
mod strike;
mod study;

pub use egm::{
    classify_impact, critical_currents, exposure, shielding_failure_width, span_critical_current,
    striking_distances, CriticalCurrents, Exposure, Target,
};
pub use sample::{sample_stroke, sample_strokes, StrokeDistributions, StrokeSample};
pub use strike::{
    build_strike_network, simulate_strike, tower_surge_impedance, Insulator, StrikeFlashover,
    StrikeModel, StrikeNetwork, StrikeOutcome,
};
pub use study::{
    flashover_rate, read_events, run_study, summary_text, write_events, EventRecord, EventRow,
    RateResult, StudyResult,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emt::EmtError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LightningError {
    #[error("invalid line geometry: {0}")]
    Geometry(String),
    #[error("invalid study parameter: {0}")]
    Parameter(String),
    #[error("{0} is a stroke to ground; there is nothing to simulate")]
    NotALineImpact(String),
    #[error("no strokes sampled; the flashover rate is undefined")]
    NoStrokes,
    #[error("flashover rate needs positive {0}")]
    RateInput(&'static str),
    #[error(transparent)]
    Emt(#[from] EmtError),
    #[error("events file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for LightningError {
    fn from(e: csv::Error) -> Self {
        LightningError::Csv(e.to_string())
    }
}

/// Phase letter of a conductor. Only the outer phases can be struck.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OuterPhase {
    A,
    C,
}

impl OuterPhase {
    /// Index into the phase conductor list (A = 0, C = 2).
    pub fn index(self) -> usize {
        match self {
            OuterPhase::A => 0,
            OuterPhase::C => 2,
        }
    }
}

/// Where a stroke ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImpactClass {
    ToGround,
    ShieldWireAtTower,
    ShieldWireAtSpan,
    PhaseConductorAtTower(OuterPhase),
    PhaseConductorAtSpan(OuterPhase),
}

impl ImpactClass {
    pub fn is_line(self) -> bool {
        self != ImpactClass::ToGround
    }

    pub fn at_tower(self) -> bool {
        matches!(
            self,
            ImpactClass::ShieldWireAtTower | ImpactClass::PhaseConductorAtTower(_)
        )
    }

    /// The `Wire` label used in event tables.
    pub fn wire_label(self) -> &'static str {
        match self {
            ImpactClass::ToGround => "Ground",
            ImpactClass::ShieldWireAtTower | ImpactClass::ShieldWireAtSpan => "Shield wire",
            ImpactClass::PhaseConductorAtTower(OuterPhase::A)
            | ImpactClass::PhaseConductorAtSpan(OuterPhase::A) => "Phase A",
            ImpactClass::PhaseConductorAtTower(OuterPhase::C)
            | ImpactClass::PhaseConductorAtSpan(OuterPhase::C) => "Phase C",
        }
    }

    /// The `Tower` label used in event tables.
    pub fn place_label(self) -> &'static str {
        match self {
            ImpactClass::ToGround => "None",
            c if c.at_tower() => "Tower",
            _ => "Span",
        }
    }

    pub fn from_labels(wire: &str, place: &str) -> Option<Self> {
        let tower = match place {
            "Tower" => true,
            "Span" => false,
            "None" => return (wire == "Ground").then_some(ImpactClass::ToGround),
            _ => return None,
        };
        let phase = match wire {
            "Shield wire" => None,
            "Phase A" => Some(OuterPhase::A),
            "Phase C" => Some(OuterPhase::C),
            _ => return None,
        };
        Some(match (phase, tower) {
            (None, true) => ImpactClass::ShieldWireAtTower,
            (None, false) => ImpactClass::ShieldWireAtSpan,
            (Some(p), true) => ImpactClass::PhaseConductorAtTower(p),
            (Some(p), false) => ImpactClass::PhaseConductorAtSpan(p),
        })
    }

    /// All classes in table order.
    pub fn all() -> [ImpactClass; 7] {
        use ImpactClass::*;
        [
            ToGround,
            ShieldWireAtTower,
            ShieldWireAtSpan,
            PhaseConductorAtTower(OuterPhase::A),
            PhaseConductorAtTower(OuterPhase::C),
            PhaseConductorAtSpan(OuterPhase::A),
            PhaseConductorAtSpan(OuterPhase::C),
        ]
    }
}

/// Cross-section at a tower plus the modelled stretch of line.
///
/// Positions are `[lateral y, height h]` in metres. Phases are listed A, B, C
/// with B the middle phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineGeometry {
    pub phase_conductors: [[f64; 2]; 3],
    pub ground_wires: [[f64; 2]; 2],
    pub phase_radius_m: f64,
    pub ground_wire_radius_m: f64,
    pub span_length_m: f64,
    pub spans_modeled: usize,
    pub strip_half_width_m: f64,
}

impl Default for LineGeometry {
    fn default() -> Self {
        Self {
            phase_conductors: [[-7.0, 7.5], [0.0, 7.5], [7.0, 7.5]],
            ground_wires: [[-3.025, 11.0], [3.025, 11.0]],
            phase_radius_m: 0.0147,
            ground_wire_radius_m: 0.0049,
            span_length_m: 321.8688,
            spans_modeled: 4,
            strip_half_width_m: 500.0,
        }
    }
}

impl LineGeometry {
    pub fn validate(&self) -> Result<(), LightningError> {
        let bad = |m: String| Err(LightningError::Geometry(m));
        let all = self.phase_conductors.iter().chain(&self.ground_wires);
        for p in all {
            if !(p[0].is_finite() && p[1].is_finite() && p[1] > 0.0) {
                return bad(format!("conductor at {p:?} must have a positive height"));
            }
        }
        let top_phase = self
            .phase_conductors
            .iter()
            .map(|p| p[1])
            .fold(f64::MIN, f64::max);
        if self.ground_wires.iter().any(|g| g[1] <= top_phase) {
            return bad("ground wires must be above every phase conductor".into());
        }
        for (name, v) in [
            ("phase radius", self.phase_radius_m),
            ("ground wire radius", self.ground_wire_radius_m),
            ("span length", self.span_length_m),
            ("strip half width", self.strip_half_width_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.spans_modeled == 0 {
            return bad("at least one span must be modelled".into());
        }
        Ok(())
    }

    /// Exposed length `l2` in metres.
    pub fn exposed_length_m(&self) -> f64 {
        self.span_length_m * self.spans_modeled as f64
    }

    /// Tower-top height, taken as the highest ground wire.
    pub fn tower_height(&self) -> f64 {
        self.ground_wires[0][1].max(self.ground_wires[1][1])
    }

    /// Crossarm height, the mean phase height.
    pub fn crossarm_height(&self) -> f64 {
        self.phase_conductors.iter().map(|p| p[1]).sum::<f64>() / 3.0
    }
}

/// Everything a lightning study needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightningConfig {
    pub n: usize,
    pub geometry: LineGeometry,
    pub strokes: StrokeDistributions,
    pub strike: StrikeModel,
    /// Ground flash density, flashes per km² and year.
    pub ground_flash_density: f64,
    /// Draw an independent insulator strength for every tower.
    pub per_tower_strength: bool,
}

impl Default for LightningConfig {
    fn default() -> Self {
        Self {
            n: 50_000,
            geometry: LineGeometry::default(),
            strokes: StrokeDistributions::default(),
            strike: StrikeModel::default(),
            ground_flash_density: 2.2,
            per_tower_strength: false,
        }
    }
}

impl LightningConfig {
    pub fn validate(&self) -> Result<(), LightningError> {
        self.geometry.validate()?;
        self.strokes.validate()?;
        self.strike.validate()?;
        if !(self.ground_flash_density.is_finite() && self.ground_flash_density > 0.0) {
            return Err(LightningError::Parameter(format!(
                "ground flash density must be positive, got {}",
                self.ground_flash_density
            )));
        }
        Ok(())
    }
}
