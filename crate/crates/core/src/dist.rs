//! Radial distribution feeder: snapshot power flow, hourly time series with
//! PV and storage, and Monte Carlo random-load runs.
//!
//! The feeder is balanced, so one positive-sequence phase is solved and
//! per-phase quantities are three-phase totals divided by three. Delta PQ
//! loads become the equivalent wye PQ loads.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("power flow did not converge in {iterations} iterations (last |dV| {last:.3e} pu)")]
    NotConverged {
        iterations: usize,
        trace: Vec<f64>,
        last: f64,
    },
    #[error("{name} shape has {len} hours, {needed} needed")]
    ShapeTooShort {
        name: String,
        len: usize,
        needed: usize,
    },
    #[error("random-load table has {available} runs, {needed} needed")]
    ShortTable { available: usize, needed: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("input is empty")]
    Empty,
    #[error("invalid feeder: {0}")]
    Feeder(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for DistError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        DistError::Parse {
            line,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kv_ll: f64,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub name: String,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

impl LineSpec {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.r_ohm, self.x_ohm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub name: String,
    pub kv: f64,
    pub kw: f64,
    pub pf: f64,
}

impl LoadSpec {
    /// Reactive power that keeps the rated power factor at `kw`.
    pub fn kvar_at(&self, kw: f64) -> f64 {
        kw * (1.0 - self.pf * self.pf).sqrt() / self.pf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageSpec {
    pub rated_kw: f64,
    pub rated_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    /// Round trip; each direction loses `sqrt(efficiency)`.
    pub efficiency: f64,
}

impl Default for StorageSpec {
    fn default() -> Self {
        Self {
            rated_kw: 100.0,
            rated_kwh: 400.0,
            soc_min: 0.1,
            soc_max: 1.0,
            soc_init: 0.5,
            efficiency: 0.9,
        }
    }
}

/// Source, then a chain of lines; load `k` sits at the receiving end of
/// line `k`, and PV/storage sit at the last node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feeder {
    pub source: SourceSpec,
    pub lines: Vec<LineSpec>,
    pub loads: Vec<LoadSpec>,
    pub pv_kw: Option<f64>,
    pub storage: Option<StorageSpec>,
}

impl Default for Feeder {
    fn default() -> Self {
        let line = |n: usize| LineSpec {
            name: format!("Line{n}"),
            r_ohm: 0.5,
            x_ohm: 1.3,
        };
        let load = |n: usize, kw: f64, pf: f64| LoadSpec {
            name: format!("Load{n}"),
            kv: 4.8,
            kw,
            pf,
        };
        Self {
            source: SourceSpec {
                kv_ll: 4.8,
                r_ohm: 0.01,
                x_ohm: 0.1,
            },
            lines: vec![line(1), line(2), line(3)],
            loads: vec![
                load(1, 285.0, 0.90),
                load(2, 240.0, 0.89),
                load(3, 192.0, 0.90),
            ],
            pv_kw: None,
            storage: None,
        }
    }
}

impl Feeder {
    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |m: String| Err(DistError::Feeder(m));
        if !(self.source.kv_ll > 0.0) {
            return bad("source kV must be > 0".into());
        }
        if self.lines.is_empty() || self.lines.len() != self.loads.len() {
            return bad("one load per line is required".into());
        }
        for l in &self.lines {
            if !(l.r_ohm >= 0.0 && l.x_ohm.is_finite() && l.r_ohm.is_finite()) {
                return bad(format!("{} impedance", l.name));
            }
            if l.z().norm() == 0.0 {
                return bad(format!("{} has zero impedance", l.name));
            }
        }
        for l in &self.loads {
            if !(l.pf > 0.0 && l.pf <= 1.0) || !(l.kw >= 0.0) {
                return bad(format!("{}: need 0 < pf <= 1 and kW >= 0", l.name));
            }
        }
        if let Some(s) = &self.storage {
            let ok = s.rated_kw >= 0.0
                && s.rated_kwh > 0.0
                && 0.0 <= s.soc_min
                && s.soc_min <= s.soc_init
                && s.soc_init <= s.soc_max
                && s.soc_max <= 1.0
                && s.efficiency > 0.0
                && s.efficiency <= 1.0;
            if !ok {
                return bad("storage limits".into());
            }
        }
        Ok(())
    }

    pub fn v_phase(&self) -> f64 {
        self.source.kv_ll * 1e3 / 3f64.sqrt()
    }
}

/// Three-phase powers for one solve. Positive PV and storage inject.
#[derive(Debug, Clone, PartialEq)]
pub struct HourInputs {
    pub load_kw: Vec<f64>,
    pub load_kvar: Vec<f64>,
    pub pv_kw: f64,
    pub storage_kw: f64,
}

impl HourInputs {
    pub fn rated(feeder: &Feeder) -> Self {
        Self::scaled(feeder, &vec![1.0; feeder.loads.len()])
    }

    pub fn scaled(feeder: &Feeder, multipliers: &[f64]) -> Self {
        let load_kw: Vec<f64> = feeder
            .loads
            .iter()
            .zip(multipliers)
            .map(|(l, m)| l.kw * m)
            .collect();
        let load_kvar = feeder
            .loads
            .iter()
            .zip(&load_kw)
            .map(|(l, kw)| l.kvar_at(*kw))
            .collect();
        Self {
            load_kw,
            load_kvar,
            pv_kw: 0.0,
            storage_kw: 0.0,
        }
    }
}

/// Three-phase results in kW/kvar; voltages per phase in volts.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Index 0 is the source bus, `k` the receiving end of line `k`.
    pub node_voltages: Vec<Complex64>,
    pub line_sending: Vec<Complex64>,
    pub line_losses: Vec<Complex64>,
    pub source: Complex64,
    pub loads: Vec<Complex64>,
    pub iterations: usize,
}

impl Snapshot {
    pub fn losses(&self) -> Complex64 {
        self.line_losses.iter().sum()
    }
}

/// Backward/forward sweep: constant-PQ injections are re-evaluated at the
/// latest voltages until they stop moving.
pub fn solve_snapshot(feeder: &Feeder, input: &HourInputs) -> Result<Snapshot, DistError> {
    feeder.validate()?;
    let n = feeder.lines.len();
    let vbase = feeder.v_phase();
    let e = Complex64::new(vbase, 0.0);
    let zs = Complex64::new(feeder.source.r_ohm, feeder.source.x_ohm);
    // per-phase VA demanded at each node (1..=n)
    let mut demand = vec![Complex64::new(0.0, 0.0); n + 1];
    for k in 0..n {
        demand[k + 1] = Complex64::new(input.load_kw[k], input.load_kvar[k]) * 1e3 / 3.0;
    }
    demand[n] -= Complex64::new(input.pv_kw + input.storage_kw, 0.0) * 1e3 / 3.0;

    let mut v = vec![e; n + 1];
    let mut trace = Vec::new();
    let mut branch = vec![Complex64::new(0.0, 0.0); n];
    for it in 1..=100 {
        let inj: Vec<Complex64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    (demand[k] / v[k]).conj()
                }
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (0..n).rev() {
            acc += inj[k + 1];
            branch[k] = acc;
        }
        let mut next = vec![e; n + 1];
        next[0] = e - zs * branch[0];
        for k in 0..n {
            next[k + 1] = next[k] - feeder.lines[k].z() * branch[k];
        }
        let dv = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).norm() / vbase)
            .fold(0.0, f64::max);
        v = next;
        trace.push(dv);
        // iterate well past the 1e-8 pu contract when it is cheap so that
        // the power balance closes to rounding
        if dv < 1e-13 || (it == 100 && dv < 1e-8) {
            // final currents consistent with the converged voltages
            let mut acc = Complex64::new(0.0, 0.0);
            for k in (0..n).rev() {
                acc += (demand[k + 1] / v[k + 1]).conj();
                branch[k] = acc;
            }
            let line_sending: Vec<Complex64> =
                (0..n).map(|k| v[k] * branch[k].conj() * 3e-3).collect();
            let line_losses = (0..n)
                .map(|k| feeder.lines[k].z() * branch[k].norm_sqr() * 3e-3)
                .collect();
            let loads = (0..n)
                .map(|k| Complex64::new(input.load_kw[k], input.load_kvar[k]))
                .collect();
            return Ok(Snapshot {
                source: line_sending[0],
                node_voltages: v,
                line_sending,
                line_losses,
                loads,
                iterations: it,
            });
        }
    }
    Err(DistError::NotConverged {
        iterations: 100,
        last: *trace.last().unwrap_or(&f64::NAN),
        trace,
    })
}

/// Signed storage output for one hour (positive discharges), clipped so the
/// state of charge stays inside its band.
pub fn dispatch_storage(spec: &StorageSpec, signal: f64, soc: f64) -> f64 {
    let leg = spec.efficiency.sqrt();
    let want = spec.rated_kw * signal.clamp(-1.0, 1.0);
    if want > 0.0 {
        let room = ((soc - spec.soc_min) * spec.rated_kwh * leg).max(0.0);
        want.min(room)
    } else if want < 0.0 {
        let room = ((spec.soc_max - soc) * spec.rated_kwh / leg).max(0.0);
        want.max(-room)
    } else {
        0.0
    }
}

/// State of charge after one hour at `kw`.
pub fn next_soc(spec: &StorageSpec, kw: f64, soc: f64) -> f64 {
    let leg = spec.efficiency.sqrt();
    let de = if kw > 0.0 { -kw / leg } else { -kw * leg };
    (soc + de / spec.rated_kwh).clamp(spec.soc_min, spec.soc_max)
}

/// Hourly multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadShape {
    pub name: String,
    pub values: Vec<f64>,
}

impl LoadShape {
    /// Scales so the largest value is 1.
    pub fn normalized(mut self) -> Self {
        let m = self.values.iter().copied().fold(0.0, f64::max);
        if m > 0.0 {
            for v in &mut self.values {
                *v /= m;
            }
        }
        self
    }

    fn check(&self, hours: usize) -> Result<(), DistError> {
        if self.values.len() < hours {
            return Err(DistError::ShapeTooShort {
                name: self.name.clone(),
                len: self.values.len(),
                needed: hours,
            });
        }
        Ok(())
    }
}

pub fn read_shape<R: Read>(name: &str, input: R) -> Result<LoadShape, DistError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut records = rdr.records();
    let header = records.next().ok_or(DistError::Empty)??;
    if header.iter().map(str::trim).ne(["hour", "multiplier"]) {
        return Err(DistError::Parse {
            line: 1,
            message: "header must be hour,multiplier".into(),
        });
    }
    let mut values = Vec::new();
    for (k, rec) in records.enumerate() {
        let rec = rec?;
        let line = k + 2;
        let field = |i: usize| -> Result<&str, DistError> {
            rec.get(i).map(str::trim).ok_or(DistError::Parse {
                line,
                message: "expected 2 fields".into(),
            })
        };
        let hour: usize = field(0)?.parse().map_err(|e| DistError::Parse {
            line,
            message: format!("hour: {e}"),
        })?;
        if hour != k {
            return Err(DistError::Parse {
                line,
                message: format!("hour {hour} out of sequence, expected {k}"),
            });
        }
        let m: f64 = field(1)?.parse().map_err(|e| DistError::Parse {
            line,
            message: format!("multiplier: {e}"),
        })?;
        if !m.is_finite() {
            return Err(DistError::Parse {
                line,
                message: "multiplier is not finite".into(),
            });
        }
        values.push(m);
    }
    Ok(LoadShape {
        name: name.to_string(),
        values,
    })
}

pub fn write_shape<W: Write>(shape: &LoadShape, out: W) -> Result<(), DistError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["hour", "multiplier"])?;
    for (h, v) in shape.values.iter().enumerate() {
        w.write_record([h.to_string(), format!("{v:e}")])?;
    }
    w.flush().map_err(|e| DistError::Csv(e.to_string()))
}

/// Diurnal load curve with seeded hour-to-hour noise, peak-normalized.
/// `lag_h` shifts the daily peak between loads.
pub fn synthetic_load_shape(name: &str, hours: usize, lag_h: f64, seed: u64) -> LoadShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Uniform::new(-1.0, 1.0).expect("valid range");
    let values = (0..hours)
        .map(|h| {
            let x = 2.0 * std::f64::consts::PI * (h as f64 - 13.0 - lag_h) / 24.0;
            0.62 + 0.28 * x.cos() + 0.06 * noise.sample(&mut rng)
        })
        .collect();
    LoadShape {
        name: name.into(),
        values,
    }
    .normalized()
}

/// Half-sine between 06:00 and 18:00 scaled by a seeded daily cloud factor;
/// zero at night.
pub fn synthetic_pv_shape(hours: usize, seed: u64) -> LoadShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = Uniform::new(0.55, 1.0).expect("valid range");
    let days = hours.div_ceil(24);
    let factors: Vec<f64> = (0..days).map(|_| cloud.sample(&mut rng)).collect();
    let values = (0..hours)
        .map(|h| {
            let hod = (h % 24) as f64;
            if (6.0..=18.0).contains(&hod) {
                factors[h / 24] * (std::f64::consts::PI * (hod - 6.0) / 12.0).sin().max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    LoadShape {
        name: "pv".into(),
        values,
    }
    .normalized()
}

/// Storage control signal. Strategy 1 charges 10:00–14:00 and discharges
/// 18:00–22:00 at full rate; strategy 2 charges over a wider midday window
/// at a lower rate and discharges 17:00–22:00.
pub fn synthetic_storage_shape(strategy: u8, hours: usize) -> LoadShape {
    let values = (0..hours)
        .map(|h| {
            let hod = h % 24;
            match strategy {
                1 => match hod {
                    10..=13 => -1.0,
                    18..=21 => 1.0,
                    _ => 0.0,
                },
                _ => match hod {
                    9..=15 => -0.6,
                    17..=21 => 0.8,
                    _ => 0.0,
                },
            }
        })
        .collect();
    LoadShape {
        name: format!("storage{strategy}"),
        values,
    }
}

/// Energy and peak registers. Energy fields are sums over hours, so meters
/// over adjacent windows add up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Meter {
    pub kwh: f64,
    pub kvarh: f64,
    pub peak_kw: f64,
    pub peak_kva: f64,
    pub losses_kwh: f64,
    pub losses_kvarh: f64,
    pub peak_losses_kw: f64,
}

impl Meter {
    pub fn record(&mut self, s: Complex64, losses: Complex64) {
        self.kwh += s.re;
        self.kvarh += s.im;
        self.peak_kw = self.peak_kw.max(s.re);
        self.peak_kva = self.peak_kva.max(s.norm());
        self.losses_kwh += losses.re;
        self.losses_kvarh += losses.im;
        self.peak_losses_kw = self.peak_losses_kw.max(losses.re);
    }

    pub fn merge(&self, other: &Meter) -> Meter {
        Meter {
            kwh: self.kwh + other.kwh,
            kvarh: self.kvarh + other.kvarh,
            peak_kw: self.peak_kw.max(other.peak_kw),
            peak_kva: self.peak_kva.max(other.peak_kva),
            losses_kwh: self.losses_kwh + other.losses_kwh,
            losses_kvarh: self.losses_kvarh + other.losses_kvarh,
            peak_losses_kw: self.peak_losses_kw.max(other.peak_losses_kw),
        }
    }
}

pub const METER_COLUMNS: [&str; 7] = [
    "kWh",
    "kvarh",
    "Peak.kW",
    "Peak.kVA",
    "Losses.kWh",
    "Losses.kvarh",
    "Peak.Losses.kW",
];

#[derive(Debug, Clone)]
pub struct TimeSeriesInputs {
    pub load_shapes: Vec<LoadShape>,
    pub pv_shape: Option<LoadShape>,
    pub storage_shape: Option<LoadShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourRecord {
    pub hour: usize,
    pub source_kw: f64,
    pub source_kvar: f64,
    pub losses_kw: f64,
    pub losses_kvar: f64,
    pub load3_v_pu: f64,
    pub load_kw: Vec<f64>,
    pub pv_kw: f64,
    pub storage_kw: f64,
    pub soc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesResult {
    pub hours: Vec<HourRecord>,
    /// Substation entrance meter.
    pub source_meter: Meter,
    /// Sending-end meter per line, with that line's losses.
    pub line_meters: Vec<Meter>,
    /// Hour of the largest source kW.
    pub peak: Complex64,
}

/// Hourly snapshots from `start` to `start + hours`. The storage state
/// carries from hour to hour starting at `soc_start`.
pub fn run_time_series(
    feeder: &Feeder,
    inputs: &TimeSeriesInputs,
    start: usize,
    hours: usize,
    soc_start: Option<f64>,
) -> Result<TimeSeriesResult, DistError> {
    feeder.validate()?;
    let end = start + hours;
    if inputs.load_shapes.len() != feeder.loads.len() {
        return Err(DistError::Feeder("one shape per load is required".into()));
    }
    for s in &inputs.load_shapes {
        s.check(end)?;
    }
    if feeder.pv_kw.is_some() {
        match &inputs.pv_shape {
            Some(s) => s.check(end)?,
            None => return Err(DistError::Feeder("PV needs a shape".into())),
        }
    }
    if feeder.storage.is_some() {
        match &inputs.storage_shape {
            Some(s) => s.check(end)?,
            None => return Err(DistError::Feeder("storage needs a dispatch shape".into())),
        }
    }
    let mut soc = soc_start
        .or(feeder.storage.as_ref().map(|s| s.soc_init))
        .unwrap_or(0.0);
    let mut out = TimeSeriesResult {
        hours: Vec::with_capacity(hours),
        source_meter: Meter::default(),
        line_meters: vec![Meter::default(); feeder.lines.len()],
        peak: Complex64::new(f64::NEG_INFINITY, 0.0),
    };
    for h in start..end {
        let mult: Vec<f64> = inputs.load_shapes.iter().map(|s| s.values[h]).collect();
        let mut input = HourInputs::scaled(feeder, &mult);
        if let (Some(kw), Some(s)) = (feeder.pv_kw, &inputs.pv_shape) {
            input.pv_kw = kw * s.values[h];
        }
        if let (Some(spec), Some(s)) = (&feeder.storage, &inputs.storage_shape) {
            input.storage_kw = dispatch_storage(spec, s.values[h], soc);
        }
        let snap = solve_snapshot(feeder, &input)?;
        out.source_meter.record(snap.source, snap.losses());
        for (m, (s, l)) in out
            .line_meters
            .iter_mut()
            .zip(snap.line_sending.iter().zip(&snap.line_losses))
        {
            m.record(*s, *l);
        }
        if snap.source.re > out.peak.re {
            out.peak = snap.source;
        }
        if let Some(spec) = &feeder.storage {
            soc = next_soc(spec, input.storage_kw, soc);
        }
        let last = feeder.lines.len();
        out.hours.push(HourRecord {
            hour: h,
            source_kw: snap.source.re,
            source_kvar: snap.source.im,
            losses_kw: snap.losses().re,
            losses_kvar: snap.losses().im,
            load3_v_pu: snap.node_voltages[last].norm() / feeder.v_phase(),
            load_kw: input.load_kw.clone(),
            pv_kw: input.pv_kw,
            storage_kw: input.storage_kw,
            soc,
        });
    }
    Ok(out)
}

pub fn write_hours_csv<W: Write>(rows: &[HourRecord], out: W) -> Result<(), DistError> {
    let mut w = csv::Writer::from_writer(out);
    let n_loads = rows.first().map(|r| r.load_kw.len()).unwrap_or(0);
    let mut header: Vec<String> = [
        "hour",
        "source_kW",
        "source_kvar",
        "losses_kW",
        "losses_kvar",
        "V_last_pu",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=n_loads).map(|k| format!("Load{k}_kW")));
    header.extend(["PV_kW", "Storage_kW", "SOC"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.hour.to_string(),
            format!("{:.6}", r.source_kw),
            format!("{:.6}", r.source_kvar),
            format!("{:.6}", r.losses_kw),
            format!("{:.6}", r.losses_kvar),
            format!("{:.8}", r.load3_v_pu),
        ];
        rec.extend(r.load_kw.iter().map(|v| format!("{v:.6}")));
        rec.extend([
            format!("{:.6}", r.pv_kw),
            format!("{:.6}", r.storage_kw),
            format!("{:.8}", r.soc),
        ]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| DistError::Csv(e.to_string()))
}

/// One Monte Carlo draw: three-phase kW per load and generator kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDraw {
    pub load_kw: Vec<f64>,
    pub gen_kw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadSource {
    /// Normal(0.5·rated, 0.05·rated) per load and run.
    Internal {
        seed: u64,
    },
    External(Vec<RandomDraw>),
}

/// Draw for run `run`, independent of every other run.
pub fn internal_draw(feeder: &Feeder, seed: u64, run: u64, gen_kw: f64) -> RandomDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    let load_kw = feeder
        .loads
        .iter()
        .map(|l| {
            Normal::new(0.5 * l.kw, 0.05 * l.kw)
                .expect("finite rating")
                .sample(&mut rng)
        })
        .collect();
    RandomDraw { load_kw, gen_kw }
}

/// Table in the external format: rows of (run, load, kW), with load names
/// from the feeder plus `Gen` for a randomly varying generator.
pub fn generate_random_loads(
    feeder: &Feeder,
    runs: usize,
    seed: u64,
    gen_mean_kw: Option<f64>,
) -> Vec<RandomDraw> {
    (0..runs as u64)
        .map(|r| {
            let mut d = internal_draw(feeder, seed, r, 0.0);
            if let Some(g) = gen_mean_kw {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
                rng.set_stream(r);
                d.gen_kw = Normal::new(g, 0.05 * g).expect("finite").sample(&mut rng);
            }
            d
        })
        .collect()
}

pub fn write_random_loads<W: Write>(
    feeder: &Feeder,
    draws: &[RandomDraw],
    out: W,
) -> Result<(), DistError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "load", "kW"])?;
    for (r, d) in draws.iter().enumerate() {
        for (l, kw) in feeder.loads.iter().zip(&d.load_kw) {
            w.write_record([r.to_string(), l.name.clone(), format!("{kw:e}")])?;
        }
        if d.gen_kw != 0.0 {
            w.write_record([r.to_string(), "Gen".into(), format!("{:e}", d.gen_kw)])?;
        }
    }
    w.flush().map_err(|e| DistError::Csv(e.to_string()))
}

/// Parses the (run, load, kW) table. Runs must be numbered from 0 without
/// gaps and every run must list every load.
pub fn read_random_loads<R: Read>(
    load_names: &[String],
    input: R,
) -> Result<Vec<RandomDraw>, DistError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut records = rdr.records();
    let header = records.next().ok_or(DistError::Empty)??;
    if header.iter().map(str::trim).ne(["run", "load", "kW"]) {
        return Err(DistError::Parse {
            line: 1,
            message: "header must be run,load,kW".into(),
        });
    }
    let mut draws: Vec<(Vec<Option<f64>>, f64)> = Vec::new();
    for (k, rec) in records.enumerate() {
        let rec = rec?;
        let line = k + 2;
        let perr = |m: String| DistError::Parse { line, message: m };
        if rec.len() != 3 {
            return Err(perr(format!("expected 3 fields, found {}", rec.len())));
        }
        let run: usize = rec[0]
            .trim()
            .parse()
            .map_err(|e| perr(format!("run: {e}")))?;
        let kw: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|e| perr(format!("kW: {e}")))?;
        if !kw.is_finite() {
            return Err(perr("kW is not finite".into()));
        }
        if run > draws.len() {
            return Err(perr(format!("run {run} skips run {}", draws.len())));
        }
        if run == draws.len() {
            draws.push((vec![None; load_names.len()], 0.0));
        }
        let name = rec[1].trim();
        if name == "Gen" {
            draws[run].1 = kw;
        } else {
            let idx = load_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| perr(format!("unknown load {name:?}")))?;
            draws[run].0[idx] = Some(kw);
        }
    }
    draws
        .into_iter()
        .enumerate()
        .map(|(r, (loads, gen_kw))| {
            let load_kw =
                loads
                    .into_iter()
                    .collect::<Option<Vec<f64>>>()
                    .ok_or(DistError::Parse {
                        line: 0,
                        message: format!("run {r} is missing a load"),
                    })?;
            Ok(RandomDraw { load_kw, gen_kw })
        })
        .collect()
}

/// Per-phase powers of every monitored element for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub loads: Vec<Complex64>,
    pub lines: Vec<Complex64>,
    pub source: Complex64,
    pub gen_kw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PqStats {
    pub mean_kw: f64,
    pub mean_kvar: f64,
    pub std_kw: f64,
    pub std_kvar: f64,
}

fn stats(values: &[Complex64]) -> PqStats {
    let n = values.len() as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / n;
    let (mut vr, mut vi) = (0.0, 0.0);
    for v in values {
        vr += (v.re - mean.re).powi(2);
        vi += (v.im - mean.im).powi(2);
    }
    let dof = (n - 1.0).max(1.0);
    PqStats {
        mean_kw: mean.re,
        mean_kvar: mean.im,
        std_kw: (vr / dof).sqrt(),
        std_kvar: (vi / dof).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub runs: Vec<RunRecord>,
    /// (element name, phase-A statistics): loads, then lines, then Source.
    pub table: Vec<(String, PqStats)>,
}

/// Independent snapshots with random loads. A constant generator of
/// `gen_kw` (active power only) sits at the last node; external tables may
/// override it per run.
pub fn run_monte_carlo(
    feeder: &Feeder,
    n_runs: usize,
    source: &LoadSource,
    gen_kw: Option<f64>,
) -> Result<MonteCarloResult, DistError> {
    feeder.validate()?;
    if n_runs == 0 {
        return Err(DistError::Feeder("at least one run is required".into()));
    }
    if let LoadSource::External(t) = source {
        if t.len() < n_runs {
            return Err(DistError::ShortTable {
                available: t.len(),
                needed: n_runs,
            });
        }
    }
    let runs: Vec<RunRecord> = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let draw = match source {
                LoadSource::Internal { seed } => {
                    internal_draw(feeder, *seed, r as u64, gen_kw.unwrap_or(0.0))
                }
                LoadSource::External(t) => {
                    let mut d = t[r].clone();
                    if d.gen_kw == 0.0 {
                        d.gen_kw = gen_kw.unwrap_or(0.0);
                    } else if gen_kw.is_none() {
                        d.gen_kw = 0.0;
                    }
                    d
                }
            };
            let mult: Vec<f64> = draw
                .load_kw
                .iter()
                .zip(&feeder.loads)
                .map(|(kw, l)| if l.kw > 0.0 { kw / l.kw } else { 0.0 })
                .collect();
            let mut input = HourInputs::scaled(feeder, &mult);
            input.pv_kw = draw.gen_kw;
            let snap = solve_snapshot(feeder, &input)?;
            Ok(RunRecord {
                run: r,
                loads: snap.loads.iter().map(|s| s / 3.0).collect(),
                lines: snap.line_sending.iter().map(|s| s / 3.0).collect(),
                source: snap.source / 3.0,
                gen_kw: draw.gen_kw,
            })
        })
        .collect::<Result<_, DistError>>()?;

    let mut table = Vec::new();
    for (k, l) in feeder.loads.iter().enumerate() {
        let v: Vec<Complex64> = runs.iter().map(|r| r.loads[k]).collect();
        table.push((l.name.clone(), stats(&v)));
    }
    for (k, l) in feeder.lines.iter().enumerate() {
        let v: Vec<Complex64> = runs.iter().map(|r| r.lines[k]).collect();
        table.push((l.name.clone(), stats(&v)));
    }
    let v: Vec<Complex64> = runs.iter().map(|r| r.source).collect();
    table.push(("Source".into(), stats(&v)));
    Ok(MonteCarloResult { runs, table })
}

pub fn write_stats_csv<W: Write>(table: &[(String, PqStats)], out: W) -> Result<(), DistError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "Element",
        "Mean.kW",
        "Mean.kvar",
        "StdDev.kW",
        "StdDev.kvar",
    ])?;
    for (name, s) in table {
        w.write_record([
            name.clone(),
            format!("{:.4}", s.mean_kw),
            format!("{:.4}", s.mean_kvar),
            format!("{:.4}", s.std_kw),
            format!("{:.4}", s.std_kvar),
        ])?;
    }
    w.flush().map_err(|e| DistError::Csv(e.to_string()))
}

pub fn write_runs_csv<W: Write>(
    feeder: &Feeder,
    runs: &[RunRecord],
    out: W,
) -> Result<(), DistError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["run".to_string()];
    for l in &feeder.loads {
        header.push(format!("{}_kW", l.name));
        header.push(format!("{}_kvar", l.name));
    }
    for l in &feeder.lines {
        header.push(format!("{}_kW", l.name));
        header.push(format!("{}_kvar", l.name));
    }
    header.extend(["Source_kW", "Source_kvar", "Gen_kW"].map(String::from));
    w.write_record(&header)?;
    for r in runs {
        let mut rec = vec![r.run.to_string()];
        for s in r.loads.iter().chain(&r.lines).chain([&r.source]) {
            rec.push(format!("{:.6}", s.re));
            rec.push(format!("{:.6}", s.im));
        }
        rec.push(format!("{:.6}", r.gen_kw));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| DistError::Csv(e.to_string()))
}

pub fn write_meters_csv<W: Write>(cases: &[(String, Meter)], out: W) -> Result<(), DistError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["Case".to_string()];
    header.extend(METER_COLUMNS.map(String::from));
    w.write_record(&header)?;
    for (name, m) in cases {
        w.write_record([
            name.clone(),
            format!("{:.2}", m.kwh),
            format!("{:.2}", m.kvarh),
            format!("{:.2}", m.peak_kw),
            format!("{:.2}", m.peak_kva),
            format!("{:.2}", m.losses_kwh),
            format!("{:.2}", m.losses_kvarh),
            format!("{:.2}", m.peak_losses_kw),
        ])?;
    }
    w.flush().map_err(|e| DistError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_limits() {
        let s = StorageSpec::default();
        assert_eq!(dispatch_storage(&s, 1.0, s.soc_min), 0.0);
        assert_eq!(dispatch_storage(&s, -1.0, s.soc_max), 0.0);
        assert_eq!(dispatch_storage(&s, 0.0, 0.5), 0.0);
        assert_eq!(dispatch_storage(&s, 0.5, 0.5), 50.0);
    }

    #[test]
    fn shape_csv_round_trip() {
        let s = synthetic_pv_shape(48, 3);
        let mut buf = Vec::new();
        write_shape(&s, &mut buf).unwrap();
        assert_eq!(read_shape("pv", &buf[..]).unwrap(), s);
    }

    #[test]
    fn shape_errors_carry_line_numbers() {
        let bad = "hour,multiplier\n0,1.0\n2,0.5\n";
        assert!(matches!(
            read_shape("x", bad.as_bytes()),
            Err(DistError::Parse { line: 3, .. })
        ));
        let bad = "hour,multiplier\n0,abc\n";
        assert!(matches!(
            read_shape("x", bad.as_bytes()),
            Err(DistError::Parse { line: 2, .. })
        ));
        assert_eq!(read_shape("x", "".as_bytes()), Err(DistError::Empty));
    }

    #[test]
    fn pv_is_dark_at_night_and_peaks_at_one() {
        let s = synthetic_pv_shape(200, 1);
        assert!(s.values.iter().enumerate().all(|(h, v)| {
            let hod = h % 24;
            (6..=18).contains(&hod) || *v == 0.0
        }));
        assert_eq!(s.values.iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn random_load_table_round_trip() {
        let f = Feeder::default();
        let draws = generate_random_loads(&f, 5, 2, Some(300.0));
        let mut buf = Vec::new();
        write_random_loads(&f, &draws, &mut buf).unwrap();
        let names: Vec<String> = f.loads.iter().map(|l| l.name.clone()).collect();
        let back = read_random_loads(&names, &buf[..]).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in draws.iter().zip(&back) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn random_load_table_rejects_gaps() {
        let names = vec!["Load1".to_string()];
        let t = "run,load,kW\n0,Load1,1.0\n2,Load1,1.0\n";
        assert!(matches!(
            read_random_loads(&names, t.as_bytes()),
            Err(DistError::Parse { line: 3, .. })
        ));
        let t = "run,load,kW\n0,Load9,1.0\n";
        assert!(matches!(
            read_random_loads(&names, t.as_bytes()),
            Err(DistError::Parse { line: 2, .. })
        ));
    }
}
