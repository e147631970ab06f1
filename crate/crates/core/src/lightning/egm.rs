use serde::{Deserialize, Serialize};

use super::{ImpactClass, LineGeometry, OuterPhase, StrokeSample};

/// Brown–Whitehead striking distances `(rc, rg)` in metres for a peak
/// current in kA: to conductors and to earth.
pub fn striking_distances(ip_ka: f64) -> (f64, f64) {
    let s = ip_ka.powf(0.75);
    (7.1 * s, 6.4 * s)
}

/// What a vertical channel reaches first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Ground,
    ShieldWire(usize),
    Phase(OuterPhase),
}

/// Lateral intervals `[lo, hi)` captured by each line conductor for one
/// peak current; everything outside goes to ground.
#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    pub intervals: Vec<(f64, f64, Target)>,
}

impl Exposure {
    pub fn target_at(&self, y: f64) -> Target {
        let k = self.intervals.partition_point(|iv| iv.1 <= y);
        match self.intervals.get(k) {
            Some(&(lo, _, t)) if lo <= y => t,
            _ => Target::Ground,
        }
    }

    /// Total lateral width captured by the outer phases.
    pub fn phase_width(&self) -> f64 {
        self.intervals
            .iter()
            .filter(|iv| matches!(iv.2, Target::Phase(_)))
            .map(|iv| iv.1 - iv.0)
            .sum()
    }

    pub fn line_width(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.1 - iv.0).sum()
    }
}

/// Arcs taking part in the construction. The middle phase is left out: it
/// sits between the ground wires and is treated as fully shielded.
fn arcs(geom: &LineGeometry) -> [(Target, f64, f64); 4] {
    let g = &geom.ground_wires;
    let p = &geom.phase_conductors;
    [
        (Target::ShieldWire(0), g[0][0], g[0][1]),
        (Target::ShieldWire(1), g[1][0], g[1][1]),
        (Target::Phase(OuterPhase::A), p[0][0], p[0][1]),
        (Target::Phase(OuterPhase::C), p[2][0], p[2][1]),
    ]
}

/// Builds the upper envelope of the striking arcs and the earth line.
///
/// Every change of owner along the envelope happens at an arc end, an
/// arc–arc crossing or an arc–earth crossing; those abscissae split the axis
/// into pieces that each have a single owner.
pub fn exposure(geom: &LineGeometry, ip_ka: f64) -> Exposure {
    let (r, g) = striking_distances(ip_ka);
    let arcs = arcs(geom);
    let mut cuts = Vec::new();
    for &(_, y, h) in &arcs {
        cuts.push(y - r);
        cuts.push(y + r);
        let dz = g - h;
        if dz.abs() <= r {
            let dy = (r * r - dz * dz).sqrt();
            cuts.push(y - dy);
            cuts.push(y + dy);
        }
    }
    for (i, &(_, y1, h1)) in arcs.iter().enumerate() {
        for &(_, y2, h2) in &arcs[i + 1..] {
            let (dy, dz) = (y2 - y1, h2 - h1);
            let d = dy.hypot(dz);
            if d == 0.0 || d > 2.0 * r {
                continue;
            }
            let a = (r * r - d * d / 4.0).max(0.0).sqrt();
            let my = (y1 + y2) / 2.0;
            // perpendicular to the centre line, y component
            let py = -dz / d * a;
            cuts.push(my + py);
            cuts.push(my - py);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let owner = |y: f64| {
        let mut best = (Target::Ground, g);
        for &(t, yc, h) in &arcs {
            let dy = y - yc;
            if dy.abs() <= r {
                let z = h + (r * r - dy * dy).sqrt();
                if z > best.1 {
                    best = (t, z);
                }
            }
        }
        best.0
    };

    let mut intervals: Vec<(f64, f64, Target)> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let t = owner(0.5 * (lo + hi));
        if t == Target::Ground {
            continue;
        }
        match intervals.last_mut() {
            Some(last) if last.2 == t && last.1 == lo => last.1 = hi,
            _ => intervals.push((lo, hi, t)),
        }
    }
    Exposure { intervals }
}

/// Lateral width over which a stroke of `ip_ka` reaches an outer phase.
pub fn shielding_failure_width(geom: &LineGeometry, ip_ka: f64) -> f64 {
    exposure(geom, ip_ka).phase_width()
}

/// Fraction of the span, counted from the nearest tower, inside which a
/// stroke is taken to hit the tower.
fn tower_zone(ip_ka: f64) -> f64 {
    if ip_ka > 64.0 {
        0.25
    } else if ip_ka >= 25.0 {
        0.125
    } else {
        0.0625
    }
}

/// Decides the point of impact of one stroke.
pub fn classify_impact(sample: &StrokeSample, geom: &LineGeometry) -> ImpactClass {
    let target = exposure(geom, sample.ip_ka).target_at(sample.y_lateral_m);
    if target == Target::Ground {
        return ImpactClass::ToGround;
    }
    let s = geom.span_length_m;
    let along = sample.x_along_m.rem_euclid(s);
    let to_tower = along.min(s - along);
    let tower = to_tower < tower_zone(sample.ip_ka) * s;
    match (target, tower) {
        (Target::Phase(p), true) => ImpactClass::PhaseConductorAtTower(p),
        (Target::Phase(p), false) => ImpactClass::PhaseConductorAtSpan(p),
        (_, true) => ImpactClass::ShieldWireAtTower,
        (_, false) => ImpactClass::ShieldWireAtSpan,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurrents {
    /// Above this peak current no stroke reaches a phase conductor, kA.
    pub shield_ka: f64,
    /// Above this peak current the striking radius from the two towers
    /// covers the whole span, kA.
    pub span_ka: f64,
}

/// Peak current at which the striking radius reaches midspan from a tower.
pub fn span_critical_current(geom: &LineGeometry) -> f64 {
    (geom.span_length_m / 2.0 / 7.1).powf(4.0 / 3.0)
}

const SEARCH_MAX_KA: f64 = 2000.0;

/// Critical currents of the line. The shielding current is found by
/// bisection on the exposed phase width; it is infinite when phases are
/// still exposed at 2000 kA.
pub fn critical_currents(geom: &LineGeometry) -> CriticalCurrents {
    let exposed = |i: f64| shielding_failure_width(geom, i) > 0.0;
    let span_ka = span_critical_current(geom);
    let (mut lo, mut hi) = (1e-3, SEARCH_MAX_KA);
    if exposed(hi) {
        return CriticalCurrents {
            shield_ka: f64::INFINITY,
            span_ka,
        };
    }
    if !exposed(lo) {
        return CriticalCurrents {
            shield_ka: 0.0,
            span_ka,
        };
    }
    while hi - lo > 1e-5 {
        let mid = 0.5 * (lo + hi);
        if exposed(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    CriticalCurrents {
        shield_ka: hi,
        span_ka,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_current_distances() {
        assert_eq!(striking_distances(1.0), (7.1, 6.4));
    }

    #[test]
    fn span_current_of_the_reference_span() {
        let i = span_critical_current(&LineGeometry::default());
        assert!((i - 64.15).abs() < 0.01, "{i}");
    }

    #[test]
    fn intervals_are_ordered_and_disjoint() {
        let g = LineGeometry::default();
        for ip in [3.0, 10.0, 34.0, 150.0] {
            let e = exposure(&g, ip);
            for w in e.intervals.windows(2) {
                assert!(w[0].1 <= w[1].0);
            }
            assert!(e.intervals.iter().all(|iv| iv.0 < iv.1));
        }
    }

    #[test]
    fn phases_under_the_wires_are_never_reached() {
        let g = LineGeometry {
            ground_wires: [[-7.0, 30.0], [7.0, 30.0]],
            ..Default::default()
        };
        assert_eq!(critical_currents(&g).shield_ka, 0.0);
    }
}
