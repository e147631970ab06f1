//! Classical single-machine infinite-bus transient stability.
//!
//! The plant is one equivalent machine behind its transient reactance,
//! connected through a step-up transformer and two parallel circuits to an
//! infinite bus. A three-phase bolted fault on circuit 2 is cleared by
//! opening that circuit.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ml::{Dataset, MlError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("operating point P={p} Q={q} cannot be delivered to the infinite bus")]
    Infeasible { p: f64, q: f64 },
    #[error("no stable post-fault equilibrium (Pm {pm:.4} >= Pmax {pmax:.4})")]
    NoPostFaultEquilibrium { pm: f64, pmax: f64 },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid fault: {0}")]
    Fault(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Per-unit parameters on the plant rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmibModel {
    pub s_base_mva: f64,
    pub v_base_kv: f64,
    pub xd_prime: f64,
    pub h: f64,
    pub d: f64,
    pub xt: f64,
    pub x_line1: f64,
    pub x_line2: f64,
    pub e_bus: f64,
    pub f0: f64,
}

impl Default for SmibModel {
    fn default() -> Self {
        Self {
            s_base_mva: 2220.0,
            v_base_kv: 24.0,
            xd_prime: 0.3,
            h: 3.5,
            d: 0.0,
            xt: 0.15,
            x_line1: 0.5,
            x_line2: 0.93,
            e_bus: 0.92,
            f0: 60.0,
        }
    }
}

impl SmibModel {
    pub fn validate(&self) -> Result<(), StabilityError> {
        let positive = [
            ("s_base_mva", self.s_base_mva),
            ("xd_prime", self.xd_prime),
            ("h", self.h),
            ("xt", self.xt),
            ("x_line1", self.x_line1),
            ("x_line2", self.x_line2),
            ("e_bus", self.e_bus),
            ("f0", self.f0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(StabilityError::Model(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.d.is_finite() && self.d >= 0.0) {
            return Err(StabilityError::Model(format!(
                "d must be >= 0, got {}",
                self.d
            )));
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.f0
    }

    /// Terminal-to-infinite-bus reactance with both circuits in service.
    pub fn network_prefault(&self) -> f64 {
        self.xt + self.x_line1 * self.x_line2 / (self.x_line1 + self.x_line2)
    }

    pub fn x_prefault(&self) -> f64 {
        self.xd_prime + self.network_prefault()
    }

    pub fn x_postfault(&self) -> f64 {
        self.xd_prime + self.xt + self.x_line1
    }

    /// Transfer reactance with circuit 2 grounded at `location` (fraction of
    /// its length from the transformer end). Infinite at location 0.
    pub fn x_fault(&self, location: f64) -> f64 {
        let xa = self.xd_prime + self.xt;
        let shunt = location * self.x_line2;
        if shunt <= 0.0 {
            return f64::INFINITY;
        }
        xa + self.x_line1 + xa * self.x_line1 / shunt
    }

    pub fn pu_from_mw(&self, mw: f64) -> f64 {
        mw / self.s_base_mva
    }
}

/// Terminal power in per unit, generator convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub p: f64,
    pub q: f64,
}

impl OperatingPoint {
    /// Full apparent power at the given power factor, delivering reactive
    /// power.
    pub fn from_power_factor(pf: f64) -> Self {
        Self {
            p: pf,
            q: (1.0 - pf * pf).max(0.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub t_on: f64,
    pub duration: f64,
    pub location: f64,
}

impl FaultEvent {
    pub fn at_transformer(t_on: f64, duration: f64) -> Self {
        Self {
            t_on,
            duration,
            location: 0.0,
        }
    }

    fn validate(&self) -> Result<(), StabilityError> {
        if !(self.t_on.is_finite() && self.t_on >= 0.0) {
            return Err(StabilityError::Fault(format!("t_on {}", self.t_on)));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(StabilityError::Fault(format!("duration {}", self.duration)));
        }
        if !(0.0..=1.0).contains(&self.location) {
            return Err(StabilityError::Fault(format!("location {}", self.location)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub e_prime: f64,
    pub delta0: f64,
    pub terminal_voltage: f64,
}

/// Internal EMF and rotor angle that deliver `op` at the terminals.
pub fn init_conditions(
    model: &SmibModel,
    op: &OperatingPoint,
) -> Result<InitialState, StabilityError> {
    let x = model.network_prefault();
    let eb = model.e_bus;
    // |Vt|² from P = V·Eb·sinθ/X and Q = (V² − V·Eb·cosθ)/X
    let b = 2.0 * op.q * x + eb * eb;
    let c = (op.p * op.p + op.q * op.q) * x * x;
    let disc = b * b - 4.0 * c;
    if op.p < 0.0 || disc < 0.0 {
        return Err(StabilityError::Infeasible { p: op.p, q: op.q });
    }
    let v2 = 0.5 * (b + disc.sqrt());
    let v = v2.sqrt();
    let theta = (op.p * x).atan2(v2 - op.q * x);
    // I = conj(S / Vt), E' = Vt + j·Xd'·I
    let (vr, vi) = (v * theta.cos(), v * theta.sin());
    let (ir, ii) = ((op.p * vr + op.q * vi) / v2, (op.p * vi - op.q * vr) / v2);
    let er = vr - model.xd_prime * ii;
    let ei = vi + model.xd_prime * ir;
    Ok(InitialState {
        e_prime: er.hypot(ei),
        delta0: ei.atan2(er),
        terminal_voltage: v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingState {
    pub delta: f64,
    pub speed_dev: f64,
}

fn derivative(s: &SwingState, model: &SmibModel, pmax: f64, pm: f64) -> (f64, f64) {
    let pe = pmax * s.delta.sin();
    (
        model.omega0() * s.speed_dev,
        (pm - pe - model.d * s.speed_dev) / (2.0 * model.h),
    )
}

/// One classical fourth-order Runge-Kutta step; `pmax = E'·Eb/X`.
pub fn swing_step(
    state: &SwingState,
    model: &SmibModel,
    pmax: f64,
    pm: f64,
    dt: f64,
) -> SwingState {
    let at = |s: &SwingState, k: (f64, f64), h: f64| SwingState {
        delta: s.delta + h * k.0,
        speed_dev: s.speed_dev + h * k.1,
    };
    let k1 = derivative(state, model, pmax, pm);
    let k2 = derivative(&at(state, k1, dt / 2.0), model, pmax, pm);
    let k3 = derivative(&at(state, k2, dt / 2.0), model, pmax, pm);
    let k4 = derivative(&at(state, k3, dt), model, pmax, pm);
    SwingState {
        delta: state.delta + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        speed_dev: state.speed_dev + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwingTrace {
    pub t: Vec<f64>,
    pub delta: Vec<f64>,
    pub speed_dev: Vec<f64>,
    pub pe: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Stable,
    Unstable,
}

impl Verdict {
    /// 1 for instability, 0 for stability.
    pub fn code(self) -> u32 {
        match self {
            Verdict::Stable => 0,
            Verdict::Unstable => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    /// Observation window after the fault is cleared.
    pub after_clear: f64,
    /// How long a pole slip must persist before it is declared.
    pub slip_confirm: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 0.5e-3,
            after_clear: 3.0,
            slip_confirm: 0.5,
        }
    }
}

/// Time-domain run. Steps that straddle the fault or clearing instant are
/// split there, so the trace stays on a uniform grid while events happen at
/// their exact times.
pub fn simulate(
    model: &SmibModel,
    op: &OperatingPoint,
    fault: &FaultEvent,
    opts: &SimOptions,
) -> Result<(SwingTrace, Verdict), StabilityError> {
    model.validate()?;
    fault.validate()?;
    let init = init_conditions(model, op)?;
    let pm = op.p;
    let eeb = init.e_prime * model.e_bus;
    let p_pre = eeb / model.x_prefault();
    let p_fault = eeb / model.x_fault(fault.location);
    let p_post = eeb / model.x_postfault();
    let t_clear = fault.t_on + fault.duration;
    let faulted = fault.duration > 0.0;
    // unstable equilibrium of the post-fault curve; absent when Pm > Pmax
    let delta_u = if faulted && pm < p_post {
        Some(PI - (pm / p_post).asin())
    } else if !faulted && pm < p_pre {
        Some(PI - (pm / p_pre).asin())
    } else {
        None
    };
    let pmax_at = |t: f64| {
        if faulted && t >= fault.t_on && t < t_clear {
            p_fault
        } else if faulted && t >= t_clear {
            p_post
        } else {
            p_pre
        }
    };

    let t_end = t_clear + opts.after_clear;
    let steps = (t_end / opts.dt).ceil() as usize;
    let events = [fault.t_on, t_clear];
    let mut s = SwingState {
        delta: init.delta0,
        speed_dev: 0.0,
    };
    let mut trace = SwingTrace::default();
    let record = |t: f64, s: &SwingState, trace: &mut SwingTrace| {
        trace.t.push(t);
        trace.delta.push(s.delta);
        trace.speed_dev.push(s.speed_dev);
        trace.pe.push(pmax_at(t) * s.delta.sin());
    };
    record(0.0, &s, &mut trace);
    let mut verdict = Verdict::Stable;
    let mut slip_since: Option<f64> = None;
    for n in 0..steps {
        let (t0, t1) = (n as f64 * opts.dt, (n + 1) as f64 * opts.dt);
        let mut t = t0;
        for &e in &events {
            if faulted && e > t && e < t1 {
                s = swing_step(&s, model, pmax_at(t), pm, e - t);
                t = e;
            }
        }
        s = swing_step(&s, model, pmax_at(t), pm, t1 - t);
        record(t1, &s, &mut trace);
        if !(s.delta.is_finite() && s.speed_dev.is_finite()) {
            return Err(StabilityError::Model("trajectory is not finite".into()));
        }
        if s.delta - init.delta0 > PI {
            verdict = Verdict::Unstable;
            break;
        }
        let slipping = t1 >= t_clear && s.speed_dev > 0.0 && delta_u.is_none_or(|du| s.delta > du);
        if slipping {
            let since = *slip_since.get_or_insert(t1);
            if t1 - since >= opts.slip_confirm {
                verdict = Verdict::Unstable;
                break;
            }
        } else {
            slip_since = None;
        }
    }
    Ok((trace, verdict))
}

/// Equal-area critical clearing angle and time for a fault with zero
/// transfer during the fault.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalClearing {
    pub delta_crit: f64,
    /// `f64::INFINITY` when there is no accelerating power.
    pub t_crit: f64,
}

pub fn cct_equal_area(
    model: &SmibModel,
    op: &OperatingPoint,
) -> Result<CriticalClearing, StabilityError> {
    model.validate()?;
    let init = init_conditions(model, op)?;
    let pm = op.p;
    let pmax = init.e_prime * model.e_bus / model.x_postfault();
    if pm >= pmax {
        return Err(StabilityError::NoPostFaultEquilibrium { pm, pmax });
    }
    let delta_max = PI - (pm / pmax).asin();
    if pm <= 0.0 {
        return Ok(CriticalClearing {
            delta_crit: delta_max,
            t_crit: f64::INFINITY,
        });
    }
    let cos_c = (pm * (delta_max - init.delta0) + pmax * delta_max.cos()) / pmax;
    let delta_crit = cos_c.clamp(-1.0, 1.0).acos();
    let t_crit = (4.0 * model.h * (delta_crit - init.delta0) / (model.omega0() * pm)).sqrt();
    Ok(CriticalClearing { delta_crit, t_crit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub power_mw: f64,
    pub duration_ms: f64,
    pub power_factor: f64,
    pub stability: u32,
}

/// Inclusive arithmetic grid from `start` to `stop`.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

pub fn default_durations_ms() -> Vec<f64> {
    grid(70.0, 250.0, 5.0)
}

pub fn default_power_factors() -> Vec<f64> {
    grid(0.6, 1.0, 0.05)
}

/// Verdict for one (power factor, duration) pair at full apparent power.
/// A point with no steady state counts as unstable.
pub fn classify(
    model: &SmibModel,
    pf: f64,
    duration_ms: f64,
    opts: &SimOptions,
) -> Result<SweepRow, StabilityError> {
    let op = OperatingPoint::from_power_factor(pf);
    let fault = FaultEvent::at_transformer(0.1, duration_ms * 1e-3);
    let v = match simulate(model, &op, &fault, opts) {
        Ok((_, v)) => v,
        Err(StabilityError::Infeasible { .. }) => Verdict::Unstable,
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        power_mw: pf * model.s_base_mva,
        duration_ms,
        power_factor: pf,
        stability: v.code(),
    })
}

/// Power-factor-major table, one row per grid pair.
pub fn sweep(
    model: &SmibModel,
    durations_ms: &[f64],
    power_factors: &[f64],
    opts: &SimOptions,
) -> Result<Vec<SweepRow>, StabilityError> {
    if durations_ms.is_empty() || power_factors.is_empty() {
        return Err(StabilityError::Fault("empty sweep grid".into()));
    }
    let pairs: Vec<(f64, f64)> = power_factors
        .iter()
        .flat_map(|&pf| durations_ms.iter().map(move |&d| (pf, d)))
        .collect();
    pairs
        .par_iter()
        .map(|&(pf, d)| classify(model, pf, d, opts))
        .collect()
}

pub fn write_trace_csv<W: Write>(trace: &SwingTrace, out: W) -> Result<(), StabilityError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| StabilityError::Csv(e.to_string());
    w.write_record(["t", "delta_deg", "speed_dev", "Pe_pu"])
        .map_err(err)?;
    for k in 0..trace.t.len() {
        w.write_record([
            format!("{:.6}", trace.t[k]),
            format!("{:e}", trace.delta[k].to_degrees()),
            format!("{:e}", trace.speed_dev[k]),
            format!("{:e}", trace.pe[k]),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| StabilityError::Csv(e.to_string()))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), StabilityError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| StabilityError::Csv(e.to_string());
    w.write_record(["Power", "Duration", "Stability"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            format!("{:.1}", r.power_mw),
            format!("{:.2}", r.duration_ms),
            r.stability.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| StabilityError::Csv(e.to_string()))
}

/// Features (Power MW, Duration ms) labelled by the stability code.
pub fn to_ml_dataset(rows: &[SweepRow]) -> Result<Dataset, MlError> {
    Dataset::new(
        rows.iter()
            .map(|r| vec![r.power_mw, r.duration_ms])
            .collect(),
        rows.iter().map(|r| r.stability).collect(),
        vec!["Power".into(), "Duration".into()],
        "Stability",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_have_expected_sizes() {
        assert_eq!(default_durations_ms().len(), 37);
        assert_eq!(default_power_factors().len(), 9);
        assert!((default_power_factors()[8] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_load_aligns_with_bus() {
        let s = init_conditions(&SmibModel::default(), &OperatingPoint { p: 0.0, q: 0.0 }).unwrap();
        assert!(s.delta0.abs() < 1e-12);
        assert!((s.e_prime - 0.92).abs() < 1e-12);
    }

    #[test]
    fn infeasible_point_is_rejected() {
        let r = init_conditions(&SmibModel::default(), &OperatingPoint { p: 5.0, q: 0.0 });
        assert!(matches!(r, Err(StabilityError::Infeasible { .. })));
    }

    #[test]
    fn bad_model_is_rejected() {
        let m = SmibModel {
            h: 0.0,
            ..Default::default()
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn fault_reactance_limits() {
        let m = SmibModel::default();
        assert!(m.x_fault(0.0).is_infinite());
        assert!(m.x_fault(1.0) > m.x_postfault());
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = [SweepRow {
            power_mw: 1354.2000000001,
            duration_ms: 58.56,
            power_factor: 0.61,
            stability: 0,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "Power,Duration,Stability\n1354.2,58.56,0\n"
        );
    }
}
