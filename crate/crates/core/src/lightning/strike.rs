use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ImpactClass, LightningError, LineGeometry, StrokeSample};
use crate::emt::{
    BergeronLine, DoubleRampSource, EmtNetwork, EmtSolver, FlashoverSwitch, SwitchControl,
    SwitchId, TimeGrid, Waveform,
};

const LIGHT_SPEED: f64 = 299_792_458.0;

/// Settings of the travelling-wave model used for strokes to the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrikeModel {
    pub dt_s: f64,
    pub t_end_s: f64,
    /// Line-to-line rms voltage, kV.
    pub system_kv: f64,
    pub spans_each_side: usize,
    pub tower_base_radius_m: f64,
    /// Propagation speed on the tower as a fraction of the speed of light.
    pub tower_velocity_factor: f64,
}

impl Default for StrikeModel {
    fn default() -> Self {
        Self {
            dt_s: 10e-9,
            t_end_s: 30e-6,
            system_kv: 230.0,
            spans_each_side: 4,
            tower_base_radius_m: 1.5,
            tower_velocity_factor: 1.0,
        }
    }
}

impl StrikeModel {
    pub fn validate(&self) -> Result<(), LightningError> {
        let checks = [
            ("time step", self.dt_s),
            ("end time", self.t_end_s),
            ("system voltage", self.system_kv),
            ("tower base radius", self.tower_base_radius_m),
            ("tower velocity factor", self.tower_velocity_factor),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(LightningError::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.spans_each_side == 0 {
            return Err(LightningError::Parameter(
                "at least one span on each side is needed".into(),
            ));
        }
        Ok(())
    }

    /// Phase-to-ground peak voltage, volts.
    pub fn phase_peak_v(&self) -> f64 {
        self.system_kv * 1e3 * SQRT_2 / 3f64.sqrt()
    }
}

/// Surge impedance of a conical tower of height `h` and base radius `r`.
pub fn tower_surge_impedance(h: f64, r: f64) -> f64 {
    60.0 * ((SQRT_2 * 2.0 * h / r).ln() - 1.0)
}

/// Surge impedance matrix of the span conductors, ordered as the two ground
/// wires followed by phases A, B, C.
fn span_surge_matrix(geom: &LineGeometry) -> DMatrix<f64> {
    let mut pos = Vec::with_capacity(5);
    for g in &geom.ground_wires {
        pos.push((g[0], g[1], geom.ground_wire_radius_m));
    }
    for p in &geom.phase_conductors {
        pos.push((p[0], p[1], geom.phase_radius_m));
    }
    DMatrix::from_fn(5, 5, |i, j| {
        let (yi, hi, ri) = pos[i];
        let (yj, hj, _) = pos[j];
        if i == j {
            60.0 * (2.0 * hi / ri).ln()
        } else {
            let d = (yi - yj).hypot(hi - hj);
            let image = (yi - yj).hypot(hi + hj);
            60.0 * (image / d).ln()
        }
    })
}

/// One insulator string of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insulator {
    /// Tower position relative to the struck point, in towers; negative on
    /// the left. For a span stroke the towers either side are −1 and 1.
    pub tower: i64,
    pub phase: usize,
    pub switch: SwitchId,
    pub crossarm: usize,
    pub conductor: usize,
}

/// A strike network ready to be solved, with the bookkeeping needed to read
/// it back.
#[derive(Debug, Clone)]
pub struct StrikeNetwork {
    pub net: EmtNetwork,
    pub source_node: usize,
    pub towers: usize,
    /// Tower-top nodes, left to right.
    pub tops: Vec<usize>,
    /// Midspan nodes of the struck span for a span stroke, ordered as the
    /// two ground wires and phases A, B, C.
    pub midspan: Option<[usize; 5]>,
    pub insulators: Vec<Insulator>,
}

struct TowerNodes {
    phases: [usize; 3],
    top: usize,
    crossarm: usize,
    base: usize,
}

/// Builds the network for a stroke to the line: spans either side of the
/// impact point, towers as two line sections with a footing resistance,
/// flashover switches across every insulator string, and matched
/// terminations standing in for the rest of the line.
///
/// `strengths_kv` gives one flashover strength per tower, left to right.
pub fn build_strike_network(
    sample: &StrokeSample,
    class: ImpactClass,
    geom: &LineGeometry,
    model: &StrikeModel,
    strengths_kv: &[f64],
) -> Result<StrikeNetwork, LightningError> {
    if !class.is_line() {
        return Err(LightningError::NotALineImpact(format!("{class:?}")));
    }
    let source = DoubleRampSource::new(sample.ip_ka, sample.tf_us, sample.th_us, 0)?;
    let side = model.spans_each_side;
    let at_tower = class.at_tower();
    let towers = if at_tower { 2 * side + 1 } else { 2 * side };
    if strengths_kv.len() != towers {
        return Err(LightningError::Parameter(format!(
            "{towers} towers need {towers} strengths, got {}",
            strengths_kv.len()
        )));
    }
    let dt = model.dt_s;
    let mut net = EmtNetwork::new(0, dt)?;
    let mut tn = Vec::with_capacity(towers);
    for _ in 0..towers {
        let phases = [net.add_node(), net.add_node(), net.add_node()];
        tn.push(TowerNodes {
            phases,
            top: net.add_node(),
            crossarm: net.add_node(),
            base: net.add_node(),
        });
    }

    let vpk = model.phase_peak_v();
    let theta = sample.phase_angle_deg.to_radians();
    let v0: [f64; 3] = std::array::from_fn(|p| vpk * (theta - p as f64 * 2.0 * PI / 3.0).cos());
    for t in &tn {
        for p in 0..3 {
            net.set_initial_voltage(t.phases[p], v0[p])?;
        }
    }

    let c_tower = LIGHT_SPEED * model.tower_velocity_factor;
    let h_top = geom.tower_height();
    let h_arm = geom.crossarm_height();
    let zt = tower_surge_impedance(h_top, model.tower_base_radius_m);
    let mut insulators = Vec::with_capacity(3 * towers);
    let offset = |k: usize| -> i64 {
        if at_tower || k < side {
            k as i64 - side as i64
        } else {
            k as i64 - side as i64 + 1
        }
    };
    for (k, t) in tn.iter().enumerate() {
        net.add_line(
            &[t.top],
            &[t.crossarm],
            BergeronLine::single(zt, (h_top - h_arm) / c_tower, dt)?,
        )?;
        net.add_line(
            &[t.crossarm],
            &[t.base],
            BergeronLine::single(zt, h_arm / c_tower, dt)?,
        )?;
        net.add_resistor(t.base, 0, sample.r_footing_ohm)?;
        for p in 0..3 {
            let sw = FlashoverSwitch::new(t.crossarm, t.phases[p], strengths_kv[k] * 1e3);
            let id = net.add_switch(SwitchControl::Flashover(sw))?;
            insulators.push(Insulator {
                tower: offset(k),
                phase: p,
                switch: id,
                crossarm: t.crossarm,
                conductor: t.phases[p],
            });
        }
    }

    let zc = span_surge_matrix(geom);
    let ends = |t: &TowerNodes| [t.top, t.top, t.phases[0], t.phases[1], t.phases[2]];
    let span_tau = geom.span_length_m / LIGHT_SPEED;
    let mut source_node = 0;
    let mut midspan = None;
    for k in 0..towers - 1 {
        let (a, b) = (ends(&tn[k]), ends(&tn[k + 1]));
        if !at_tower && k + 1 == side {
            let mid: [usize; 5] = std::array::from_fn(|_| net.add_node());
            midspan = Some(mid);
            for (node, v) in mid[2..].iter().zip(v0) {
                net.set_initial_voltage(*node, v)?;
            }
            let half = BergeronLine::new(zc.clone(), span_tau / 2.0, dt)?;
            net.add_line(&a, &mid, half.clone())?;
            net.add_line(&mid, &b, half)?;
            source_node = match class {
                ImpactClass::PhaseConductorAtSpan(p) => mid[2 + p.index()],
                _ => {
                    // the ground wire nearer the channel
                    let g = &geom.ground_wires;
                    let near =
                        (sample.y_lateral_m - g[0][0]).abs() > (sample.y_lateral_m - g[1][0]).abs();
                    mid[near as usize]
                }
            };
        } else {
            net.add_line(&a, &b, BergeronLine::new(zc.clone(), span_tau, dt)?)?;
        }
    }
    if at_tower {
        let t = &tn[side];
        source_node = match class {
            ImpactClass::PhaseConductorAtTower(p) => t.phases[p.index()],
            _ => t.top,
        };
    }

    let yc = zc.clone().try_inverse().ok_or(LightningError::Geometry(
        "span surge impedance matrix is singular".into(),
    ))?;
    let vterm = DVector::from_column_slice(&[0.0, 0.0, v0[0], v0[1], v0[2]]);
    let injection = &yc * vterm;
    for t in [&tn[0], &tn[towers - 1]] {
        net.add_shunt_matrix(&ends(t), yc.clone(), injection.clone())?;
    }

    let wf = Waveform::from(source);
    let negative = match wf {
        Waveform::DoubleRamp { peak, tf, th } => Waveform::DoubleRamp {
            peak: -peak,
            tf,
            th,
        },
        other => other,
    };
    net.add_current_source(source_node, negative)?;
    Ok(StrikeNetwork {
        net,
        source_node,
        towers,
        tops: tn.iter().map(|t| t.top).collect(),
        midspan,
        insulators,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrikeFlashover {
    pub tower: i64,
    pub phase: usize,
    pub time_s: f64,
    pub voltage_v: f64,
    pub strength_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrikeOutcome {
    pub flashover: Option<StrikeFlashover>,
    /// Largest insulator voltage seen before the run stopped, volts.
    pub max_insulator_v: f64,
    pub steps: usize,
}

/// Runs a strike network until the first flashover or the end time.
pub fn simulate_strike(
    sample: &StrokeSample,
    class: ImpactClass,
    geom: &LineGeometry,
    model: &StrikeModel,
    strengths_kv: &[f64],
) -> Result<StrikeOutcome, LightningError> {
    let sn = build_strike_network(sample, class, geom, model, strengths_kv)?;
    let steps = TimeGrid::new(model.dt_s, model.t_end_s)?.step_count();
    let mut solver = EmtSolver::new(sn.net)?;
    let mut max_v: f64 = 0.0;
    for step in 1..=steps {
        let v = solver.step()?;
        for ins in &sn.insulators {
            max_v = max_v.max((v[ins.crossarm] - v[ins.conductor]).abs());
        }
        if let Some(&(id, time_s, voltage_v)) = solver.flashovers().first() {
            let ins = sn.insulators.iter().find(|i| i.switch == id).unwrap();
            let strength_v = match solver.switch(id) {
                SwitchControl::Flashover(f) => f.strength,
                SwitchControl::Timed { .. } => f64::NAN,
            };
            return Ok(StrikeOutcome {
                flashover: Some(StrikeFlashover {
                    tower: ins.tower,
                    phase: ins.phase,
                    time_s,
                    voltage_v,
                    strength_v,
                }),
                max_insulator_v: max_v,
                steps: step,
            });
        }
    }
    Ok(StrikeOutcome {
        flashover: None,
        max_insulator_v: max_v,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conical_tower_impedance() {
        let z = tower_surge_impedance(30.0, 3.0);
        assert!((z - 60.0 * ((60.0 * SQRT_2 / 3.0f64).ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn surge_matrix_is_symmetric_and_dominant() {
        let z = span_surge_matrix(&LineGeometry::default());
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(z[(i, j)], z[(j, i)]);
                if i != j {
                    assert!(z[(i, i)] > z[(i, j)] && z[(i, j)] > 0.0);
                }
            }
        }
    }
}
