use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::egm::{classify_impact, critical_currents, CriticalCurrents};
use super::sample::{sample_stroke, tower_strengths};
use super::strike::simulate_strike;
use super::{ImpactClass, LightningConfig, LightningError, OuterPhase, StrokeSample};

/// One Monte Carlo event and what came of it. `flashover` is `None` when the
/// simulation of a line stroke failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub index: usize,
    pub sample: StrokeSample,
    pub class: ImpactClass,
    pub flashover: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// Simulated years.
    pub years: f64,
    /// Flashovers per year on the simulated stretch.
    pub per_year: f64,
    /// Flashovers per 100 km and year.
    pub rate: f64,
}

/// Years represented by `n` strokes over an `l1 × l2` km strip with `ng`
/// flashes per km² and year, and the flashover rate that `nf` flashovers in
/// that time imply.
pub fn flashover_rate(
    n: usize,
    nf: usize,
    l1_km: f64,
    l2_km: f64,
    ng: f64,
) -> Result<RateResult, LightningError> {
    if n == 0 {
        return Err(LightningError::NoStrokes);
    }
    for (name, v) in [("l1", l1_km), ("l2", l2_km), ("ground flash density", ng)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(LightningError::RateInput(name));
        }
    }
    let years = n as f64 / (l1_km * l2_km * ng);
    let per_year = nf as f64 / years;
    Ok(RateResult {
        years,
        per_year,
        rate: per_year * 100.0 / l2_km,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub n: usize,
    pub to_ground: usize,
    pub shield_at_tower: usize,
    pub shield_at_span: usize,
    /// Phase A then phase C.
    pub phase_at_tower: [usize; 2],
    pub phase_at_span: [usize; 2],
    pub flashovers: usize,
    pub flashovers_at_tower: usize,
    pub flashovers_at_span: usize,
    pub failures: usize,
    pub critical: CriticalCurrents,
    pub exposed_length_km: f64,
    pub ground_flash_density: f64,
    pub rate: RateResult,
    pub events: Vec<EventRecord>,
}

impl StudyResult {
    pub fn to_line(&self) -> usize {
        self.n - self.to_ground
    }

    pub fn to_towers(&self) -> usize {
        self.shield_at_tower + self.phase_at_tower.iter().sum::<usize>()
    }

    pub fn to_spans(&self) -> usize {
        self.shield_at_span + self.phase_at_span.iter().sum::<usize>()
    }

    pub fn to_shield_wires(&self) -> usize {
        self.shield_at_tower + self.shield_at_span
    }

    pub fn to_conductors(&self) -> usize {
        self.to_line() - self.to_shield_wires()
    }

    pub fn count(&self, class: ImpactClass) -> usize {
        let ph = |p: OuterPhase| match p {
            OuterPhase::A => 0,
            OuterPhase::C => 1,
        };
        match class {
            ImpactClass::ToGround => self.to_ground,
            ImpactClass::ShieldWireAtTower => self.shield_at_tower,
            ImpactClass::ShieldWireAtSpan => self.shield_at_span,
            ImpactClass::PhaseConductorAtTower(p) => self.phase_at_tower[ph(p)],
            ImpactClass::PhaseConductorAtSpan(p) => self.phase_at_span[ph(p)],
        }
    }
}

fn run_event(cfg: &LightningConfig, seed: u64, index: usize) -> EventRecord {
    let sample = sample_stroke(seed, index as u64, &cfg.geometry, &cfg.strokes);
    let class = classify_impact(&sample, &cfg.geometry);
    let flashover = if class.is_line() {
        let side = cfg.strike.spans_each_side;
        let towers = if class.at_tower() {
            2 * side + 1
        } else {
            2 * side
        };
        let strengths = if cfg.per_tower_strength {
            tower_strengths(seed, index as u64, towers, &cfg.strokes)
        } else {
            vec![sample.insulator_strength_kv; towers]
        };
        simulate_strike(&sample, class, &cfg.geometry, &cfg.strike, &strengths)
            .ok()
            .map(|o| o.flashover.is_some())
    } else {
        Some(false)
    };
    EventRecord {
        index,
        sample,
        class,
        flashover,
    }
}

/// Samples `cfg.n` strokes, classifies each one and simulates those that hit
/// the line. Events run in parallel; each draws from its own random stream,
/// so the result does not depend on the thread count.
pub fn run_study(cfg: &LightningConfig, seed: u64) -> Result<StudyResult, LightningError> {
    cfg.validate()?;
    if cfg.n == 0 {
        return Err(LightningError::NoStrokes);
    }
    let events: Vec<EventRecord> = (0..cfg.n)
        .into_par_iter()
        .map(|i| run_event(cfg, seed, i))
        .collect();

    let mut r = StudyResult {
        n: cfg.n,
        to_ground: 0,
        shield_at_tower: 0,
        shield_at_span: 0,
        phase_at_tower: [0; 2],
        phase_at_span: [0; 2],
        flashovers: 0,
        flashovers_at_tower: 0,
        flashovers_at_span: 0,
        failures: 0,
        critical: critical_currents(&cfg.geometry),
        exposed_length_km: cfg.geometry.exposed_length_m() / 1e3,
        ground_flash_density: cfg.ground_flash_density,
        rate: RateResult {
            years: 0.0,
            per_year: 0.0,
            rate: 0.0,
        },
        events: Vec::new(),
    };
    for e in &events {
        let ph = |p: OuterPhase| (p == OuterPhase::C) as usize;
        match e.class {
            ImpactClass::ToGround => r.to_ground += 1,
            ImpactClass::ShieldWireAtTower => r.shield_at_tower += 1,
            ImpactClass::ShieldWireAtSpan => r.shield_at_span += 1,
            ImpactClass::PhaseConductorAtTower(p) => r.phase_at_tower[ph(p)] += 1,
            ImpactClass::PhaseConductorAtSpan(p) => r.phase_at_span[ph(p)] += 1,
        }
        match e.flashover {
            None => r.failures += 1,
            Some(true) => {
                r.flashovers += 1;
                if e.class.at_tower() {
                    r.flashovers_at_tower += 1;
                } else {
                    r.flashovers_at_span += 1;
                }
            }
            Some(false) => {}
        }
    }
    let l1 = 2.0 * cfg.geometry.strip_half_width_m / 1e3;
    r.rate = flashover_rate(
        cfg.n,
        r.flashovers,
        l1,
        r.exposed_length_km,
        cfg.ground_flash_density,
    )?;
    r.events = events;
    Ok(r)
}

/// Count listings of a finished study.
pub fn summary_text(r: &StudyResult) -> String {
    let mut s = String::new();
    let mut line = |label: &str, value: String| {
        let _ = writeln!(s, "{label:<42}= {value}");
    };
    line(
        "Critical current to shield wires",
        format!("{:.2} (kA)", r.critical.shield_ka),
    );
    line(
        "Critical current that shields a span",
        format!("{:.2} (kA)", r.critical.span_ka),
    );
    line("Number of strokes to ground", r.to_ground.to_string());
    line("Number of strokes to the line", r.to_line().to_string());
    line("Number of strokes to towers", r.to_towers().to_string());
    line("Number of strokes to spans", r.to_spans().to_string());
    line(
        "Number of strokes to shield wires",
        r.to_shield_wires().to_string(),
    );
    line(
        "Number of strokes to shield wires at towers",
        r.shield_at_tower.to_string(),
    );
    line(
        "Number of strokes to shield wires at spans",
        r.shield_at_span.to_string(),
    );
    line(
        "Number of strokes to conductors",
        r.to_conductors().to_string(),
    );
    line(
        "Number of strokes to conductors at towers",
        r.phase_at_tower.iter().sum::<usize>().to_string(),
    );
    line(
        "Number of strokes to conductors at spans",
        r.phase_at_span.iter().sum::<usize>().to_string(),
    );
    line("Number of flashovers", r.flashovers.to_string());
    line(
        "Number of flashovers caused by strokes to spans",
        r.flashovers_at_span.to_string(),
    );
    line(
        "Number of flashovers caused by strokes to towers",
        r.flashovers_at_tower.to_string(),
    );
    line("Number of failed simulations", r.failures.to_string());
    line("Number of random generated strokes", r.n.to_string());
    line(
        "Length of the simulated test line",
        format!("{:.3} (km)", r.exposed_length_km),
    );
    line(
        "Stroke density",
        format!("{} (strokes per km2 and year)", r.ground_flash_density),
    );
    line("Number of total flashovers", r.flashovers.to_string());
    line("Number of simulated years", format!("{:.0}", r.rate.years));
    line(
        "Flashover rate",
        format!("{:.2} (flashovers per 100 km and year)", r.rate.rate),
    );
    s
}

const EVENT_HEADER: [&str; 8] = [
    "Event",
    "PhaseAngle",
    "StrokePeak",
    "FrontTime",
    "HalfPeak",
    "Wire",
    "Tower",
    "Flashover",
];

/// Writes one row per event. `Flashover` is 1, 0, or NA for a failed run.
pub fn write_events<W: Write>(events: &[EventRecord], out: W) -> Result<(), LightningError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_HEADER)?;
    for e in events {
        let s = &e.sample;
        let fo = match e.flashover {
            Some(true) => "1",
            Some(false) => "0",
            None => "NA",
        };
        w.write_record([
            e.index.to_string(),
            s.phase_angle_deg.to_string(),
            s.ip_ka.to_string(),
            s.tf_us.to_string(),
            s.th_us.to_string(),
            e.class.wire_label().to_string(),
            e.class.place_label().to_string(),
            fo.to_string(),
        ])?;
    }
    w.flush().map_err(|e| LightningError::Csv(e.to_string()))?;
    Ok(())
}

/// A row of an events table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub event: usize,
    pub phase_angle_deg: f64,
    pub ip_ka: f64,
    pub tf_us: f64,
    pub th_us: f64,
    pub class: ImpactClass,
    pub flashover: Option<bool>,
}

impl EventRecord {
    pub fn row(&self) -> EventRow {
        EventRow {
            event: self.index,
            phase_angle_deg: self.sample.phase_angle_deg,
            ip_ka: self.sample.ip_ka,
            tf_us: self.sample.tf_us,
            th_us: self.sample.th_us,
            class: self.class,
            flashover: self.flashover,
        }
    }
}

/// Reads a table written by [`write_events`].
pub fn read_events<R: Read>(input: R) -> Result<Vec<EventRow>, LightningError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut rows = rdr.records();
    let header = rows.next().ok_or(LightningError::Parse {
        line: 1,
        message: "empty input".into(),
    })??;
    if header.iter().ne(EVENT_HEADER) {
        return Err(LightningError::Parse {
            line: 1,
            message: format!("expected header {}", EVENT_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in rows.enumerate() {
        let line = k + 2;
        let rec = rec?;
        let bad = |message: String| LightningError::Parse { line, message };
        if rec.len() != EVENT_HEADER.len() {
            return Err(bad(format!("{} fields, expected 8", rec.len())));
        }
        let num = |i: usize| -> Result<f64, LightningError> {
            let v: f64 = rec[i]
                .trim()
                .parse()
                .map_err(|_| bad(format!("{}: not a number: {:?}", EVENT_HEADER[i], &rec[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("{}: not finite", EVENT_HEADER[i])))
            }
        };
        let event = rec[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("Event: not an index: {:?}", &rec[0])))?;
        let class = ImpactClass::from_labels(rec[5].trim(), rec[6].trim())
            .ok_or_else(|| bad(format!("unknown impact {:?}/{:?}", &rec[5], &rec[6])))?;
        let flashover = match rec[7].trim() {
            "1" => Some(true),
            "0" => Some(false),
            "NA" => None,
            other => return Err(bad(format!("Flashover: {other:?}"))),
        };
        out.push(EventRow {
            event,
            phase_angle_deg: num(1)?,
            ip_ka: num(2)?,
            tf_us: num(3)?,
            th_us: num(4)?,
            class,
            flashover,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rate() {
        let r = flashover_rate(50_000, 1103, 1.0, 1.2874752, 2.2).unwrap();
        assert_eq!(r.years.round(), 17653.0);
        assert!((r.rate - 4.85).abs() < 0.005);
    }

    #[test]
    fn rate_inputs() {
        assert_eq!(flashover_rate(10, 0, 1.0, 1.0, 1.0).unwrap().rate, 0.0);
        assert!(flashover_rate(10, 1, 1.0, 1.0, 0.0).is_err());
        assert!(flashover_rate(10, 1, 0.0, 1.0, 1.0).is_err());
        assert_eq!(
            flashover_rate(0, 0, 1.0, 1.0, 1.0),
            Err(LightningError::NoStrokes)
        );
    }

    #[test]
    fn events_round_trip() {
        let s = StrokeSample {
            x_along_m: 1.0,
            y_lateral_m: 2.0,
            phase_angle_deg: 123.456,
            ip_ka: 34.5,
            tf_us: 1.25,
            th_us: 80.125,
            r_footing_ohm: 20.0,
            insulator_strength_kv: 970.0,
        };
        let events: Vec<EventRecord> = ImpactClass::all()
            .iter()
            .enumerate()
            .map(|(i, &class)| EventRecord {
                index: i,
                sample: s,
                class,
                flashover: [Some(true), Some(false), None][i % 3],
            })
            .collect();
        let mut buf = Vec::new();
        write_events(&events, &mut buf).unwrap();
        let back = read_events(buf.as_slice()).unwrap();
        let want: Vec<EventRow> = events.iter().map(EventRecord::row).collect();
        assert_eq!(back, want);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(read_events("".as_bytes()).is_err());
        assert!(read_events("a,b\n".as_bytes()).is_err());
        let head = EVENT_HEADER.join(",");
        let bad = format!("{head}\n0,1,2,3,4,Phase B,Span,0\n");
        assert!(matches!(
            read_events(bad.as_bytes()),
            Err(LightningError::Parse { line: 2, .. })
        ));
    }
}
