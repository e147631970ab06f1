//! Oracles shared by the integration tests.
#![allow(dead_code)]

use gridstudies_core::lightning::{ImpactClass, LineGeometry, OuterPhase, StrokeSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

pub fn ks_statistic(mut v: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Drops a vertical leader at `y` and returns the first conductor its tip
/// comes within striking distance of, scanning every conductor arc.
pub fn highest_arc(y: f64, ip: f64, g: &LineGeometry) -> Option<&'static str> {
    let r = 7.1 * ip.powf(0.75);
    let mut best = (None, 6.4 * ip.powf(0.75));
    let wires = [
        ("gw", g.ground_wires[0]),
        ("gw", g.ground_wires[1]),
        ("A", g.phase_conductors[0]),
        ("C", g.phase_conductors[2]),
    ];
    for (name, [yc, h]) in wires {
        let dy = (y - yc).abs();
        if dy <= r {
            let z = h + (r * r - dy * dy).sqrt();
            if z > best.1 {
                best = (Some(name), z);
            }
        }
    }
    best.0
}

pub fn oracle_class(s: &StrokeSample, g: &LineGeometry) -> ImpactClass {
    let Some(hit) = highest_arc(s.y_lateral_m, s.ip_ka, g) else {
        return ImpactClass::ToGround;
    };
    let span = g.span_length_m;
    let nearest = (0..=g.spans_modeled)
        .map(|k| (s.x_along_m - k as f64 * span).abs())
        .fold(f64::INFINITY, f64::min);
    let zone = if s.ip_ka > 64.0 {
        span / 4.0
    } else if s.ip_ka >= 25.0 {
        span / 8.0
    } else {
        span / 16.0
    };
    let tower = nearest < zone;
    match (hit, tower) {
        ("gw", true) => ImpactClass::ShieldWireAtTower,
        ("gw", false) => ImpactClass::ShieldWireAtSpan,
        ("A", true) => ImpactClass::PhaseConductorAtTower(OuterPhase::A),
        ("A", false) => ImpactClass::PhaseConductorAtSpan(OuterPhase::A),
        ("C", true) => ImpactClass::PhaseConductorAtTower(OuterPhase::C),
        _ => ImpactClass::PhaseConductorAtSpan(OuterPhase::C),
    }
}

pub fn near_line_samples(n: usize, seed: u64, g: &LineGeometry) -> Vec<StrokeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| StrokeSample {
            x_along_m: rng.random_range(0.0..g.exposed_length_m()),
            y_lateral_m: rng.random_range(-150.0..150.0),
            phase_angle_deg: 0.0,
            ip_ka: rng.random_range(0.0f64..6.0).exp(),
            tf_us: 1.0,
            th_us: 50.0,
            r_footing_ohm: 10.0,
            insulator_strength_kv: 1000.0,
        })
        .collect()
}

/// Closed-form shielding test on the left side: the phase is exposed while
/// the upper crossing of its arc with the ground-wire arc lies above the
/// earth line.
pub fn phase_exposed_closed_form(g: &LineGeometry, ip: f64) -> bool {
    let r = 7.1 * ip.powf(0.75);
    let rg = 6.4 * ip.powf(0.75);
    let [ya, ha] = g.phase_conductors[0];
    let [yw, hw] = g.ground_wires[0];
    let d = (yw - ya).hypot(hw - ha);
    if d >= 2.0 * r {
        return true;
    }
    let a = (r * r - d * d / 4.0).sqrt();
    let crossing_z = 0.5 * (ha + hw) + (yw - ya).abs() / d * a;
    crossing_z > rg
}
