use std::f64::consts::PI;

use gridstudies_core::stability::{
    cct_equal_area, default_durations_ms, default_power_factors, init_conditions, simulate, sweep,
    swing_step, FaultEvent, OperatingPoint, SimOptions, SmibModel, SwingState, Verdict,
};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn full_load() -> OperatingPoint {
    OperatingPoint { p: 0.9, q: 0.436 }
}

/// Works back from the solved internal EMF: current through the total
/// reactance, then the terminal phasor and its complex power.
fn terminal_power_oracle(m: &SmibModel, e_prime: f64, delta0: f64) -> C {
    let e = C::from_polar(e_prime, delta0);
    let eb = C::new(m.e_bus, 0.0);
    let i = (e - eb) / C::new(0.0, m.x_prefault());
    let vt = eb + C::new(0.0, m.network_prefault()) * i;
    vt * i.conj()
}

#[test]
fn full_load_initialization_matches_phasor_oracle() {
    let m = SmibModel::default();
    let s = init_conditions(&m, &full_load()).unwrap();
    let sp = terminal_power_oracle(&m, s.e_prime, s.delta0);
    assert!(
        (sp.re - 0.9).abs() < 1e-9 && (sp.im - 0.436).abs() < 1e-9,
        "{sp}"
    );
    let pe = s.e_prime * m.e_bus / m.x_prefault() * s.delta0.sin();
    assert!((pe - 0.9).abs() < 1e-10);
}

#[test]
fn equilibrium_holds_for_five_seconds() {
    let m = SmibModel::default();
    let s0 = init_conditions(&m, &full_load()).unwrap();
    let pmax = s0.e_prime * m.e_bus / m.x_prefault();
    let mut s = SwingState {
        delta: s0.delta0,
        speed_dev: 0.0,
    };
    for _ in 0..10_000 {
        s = swing_step(&s, &m, pmax, 0.9, 0.5e-3);
    }
    assert!((s.delta - s0.delta0).abs() < 1e-9);
}

fn free_swing(dt: f64, t_end: f64) -> (Vec<SwingState>, f64, f64, SmibModel) {
    let m = SmibModel::default();
    let s0 = init_conditions(&m, &full_load()).unwrap();
    let pmax = s0.e_prime * m.e_bus / m.x_prefault();
    let mut s = SwingState {
        delta: s0.delta0 + 0.1,
        speed_dev: 0.0,
    };
    let n = (t_end / dt).round() as usize;
    let mut out = vec![s];
    for _ in 0..n {
        s = swing_step(&s, &m, pmax, 0.9, dt);
        out.push(s);
    }
    (out, pmax, s0.delta0, m)
}

#[test]
fn undamped_swing_conserves_energy() {
    let (states, pmax, d0, m) = free_swing(0.5e-3, 5.0);
    let w0 = m.omega0();
    let energy = |s: &SwingState| {
        m.h * w0 * s.speed_dev * s.speed_dev
            - 0.9 * (s.delta - d0)
            - pmax * (s.delta.cos() - d0.cos())
    };
    let e0 = energy(&states[0]);
    let swing = states.iter().map(|s| s.delta).fold(f64::MIN, f64::max) - d0;
    assert!(swing < 0.2, "bounded oscillation");
    for s in &states {
        assert!((energy(s) - e0).abs() <= 1e-3 * e0.abs().max(1e-3));
    }
}

#[test]
fn step_halving_converges() {
    let (a, ..) = free_swing(0.5e-3, 2.0);
    let (b, ..) = free_swing(0.25e-3, 2.0);
    assert!((a.last().unwrap().delta - b.last().unwrap().delta).abs() < 1e-6);
}

#[test]
fn zero_duration_is_the_equilibrium() {
    let m = SmibModel::default();
    let (trace, v) = simulate(
        &m,
        &full_load(),
        &FaultEvent::at_transformer(0.1, 0.0),
        &SimOptions::default(),
    )
    .unwrap();
    assert_eq!(v, Verdict::Stable);
    let d0 = trace.delta[0];
    assert!(trace.delta.iter().all(|d| (d - d0).abs() < 1e-9));
}

#[test]
fn fifty_ms_full_load_fault_is_stable() {
    let (trace, v) = simulate(
        &SmibModel::default(),
        &full_load(),
        &FaultEvent::at_transformer(0.1, 0.05),
        &SimOptions::default(),
    )
    .unwrap();
    assert_eq!(v, Verdict::Stable);
    assert!(trace.delta.iter().all(|d| d.is_finite()));
    // no transfer while the fault is on
    let k = trace.t.iter().position(|&t| t > 0.12).unwrap();
    assert!(trace.pe[k].abs() < 1e-12);
}

#[test]
fn boundary_exists_at_1998_mw() {
    let m = SmibModel::default();
    let opts = SimOptions::default();
    let v: Vec<u32> = default_durations_ms()
        .iter()
        .map(|&d| {
            gridstudies_core::stability::classify(&m, 0.9, d, &opts)
                .unwrap()
                .stability
        })
        .collect();
    assert_eq!(v[0], 0);
    assert_eq!(*v.last().unwrap(), 1);
}

#[test]
fn time_domain_agrees_with_equal_area() {
    let m = SmibModel::default();
    let opts = SimOptions::default();
    for pf in [0.6, 0.7, 0.8, 0.85, 0.9, 0.95] {
        let op = OperatingPoint::from_power_factor(pf);
        let cc = cct_equal_area(&m, &op).unwrap();
        for k in 0..40 {
            let d = 0.02 + k as f64 * 0.006;
            if (d - cc.t_crit).abs() <= opts.dt {
                continue;
            }
            let (_, v) = simulate(&m, &op, &FaultEvent::at_transformer(0.1, d), &opts).unwrap();
            let expect = if d > cc.t_crit {
                Verdict::Unstable
            } else {
                Verdict::Stable
            };
            assert_eq!(v, expect, "pf {pf} d {d} t_crit {}", cc.t_crit);
        }
    }
}

#[test]
fn flip_happens_within_one_step_of_t_crit() {
    let m = SmibModel::default();
    let opts = SimOptions::default();
    let cc = cct_equal_area(&m, &full_load()).unwrap();
    let run = |d: f64| {
        simulate(&m, &full_load(), &FaultEvent::at_transformer(0.1, d), &opts)
            .unwrap()
            .1
    };
    assert_eq!(run(cc.t_crit - opts.dt), Verdict::Stable);
    assert_eq!(run(cc.t_crit + opts.dt), Verdict::Unstable);
}

#[test]
fn quadrupled_inertia_doubles_t_crit() {
    let m = SmibModel::default();
    let m4 = SmibModel {
        h: 4.0 * m.h,
        ..m.clone()
    };
    let a = cct_equal_area(&m, &full_load()).unwrap();
    let b = cct_equal_area(&m4, &full_load()).unwrap();
    assert!((b.t_crit / a.t_crit - 2.0).abs() < 1e-12);
    assert_eq!(a.delta_crit, b.delta_crit);
}

#[test]
fn no_accelerating_power_never_loses_step() {
    let c = cct_equal_area(&SmibModel::default(), &OperatingPoint { p: 0.0, q: 0.3 }).unwrap();
    assert!(c.t_crit.is_infinite());
}

#[test]
fn sweep_is_monotone_in_duration_and_power() {
    let m = SmibModel::default();
    let ds = default_durations_ms();
    let pfs = default_power_factors();
    let rows = sweep(&m, &ds, &pfs, &SimOptions::default()).unwrap();
    assert_eq!(rows.len(), ds.len() * pfs.len());
    let at = |i: usize, j: usize| rows[i * ds.len() + j].stability;
    for i in 0..pfs.len() {
        for j in 1..ds.len() {
            assert!(at(i, j) >= at(i, j - 1), "pf {} d {}", pfs[i], ds[j]);
        }
    }
    for j in 0..ds.len() {
        for i in 1..pfs.len() {
            assert!(at(i, j) >= at(i - 1, j), "pf {} d {}", pfs[i], ds[j]);
        }
    }
}

#[test]
fn published_holdout_rows_are_reproduced() {
    let m = SmibModel::default();
    let opts = SimOptions::default();
    let durations = [201.18, 140.81, 58.56, 221.22];
    let expected = [
        (1820.4, [1, 0, 0, 1]),
        (1975.8, [1, 1, 0, 1]),
        (2153.4, [1, 1, 1, 1]),
        (1354.2, [0, 0, 0, 0]),
    ];
    for (mw, verdicts) in expected {
        for (d, want) in durations.iter().zip(verdicts) {
            let row =
                gridstudies_core::stability::classify(&m, mw / m.s_base_mva, *d, &opts).unwrap();
            assert_eq!(row.stability, want, "{mw} MW {d} ms");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stable_equilibrium_exists_for_feasible_points(p in 0.0f64..1.2, q in -0.3f64..0.6) {
        let m = SmibModel::default();
        if let Ok(s) = init_conditions(&m, &OperatingPoint { p, q }) {
            let pmax = s.e_prime * m.e_bus / m.x_prefault();
            prop_assert!(p < pmax);
            prop_assert!(s.delta0 < PI - (p / pmax).asin());
            let sp = terminal_power_oracle(&m, s.e_prime, s.delta0);
            prop_assert!((sp.re - p).abs() < 1e-9 && (sp.im - q).abs() < 1e-9);
        }
    }

    #[test]
    fn traces_stay_finite(pf in 0.6f64..0.99, d in 0.0f64..0.3) {
        let (trace, _) = simulate(
            &SmibModel::default(),
            &OperatingPoint::from_power_factor(pf),
            &FaultEvent::at_transformer(0.1, d),
            &SimOptions { after_clear: 1.0, ..Default::default() },
        ).unwrap();
        prop_assert!(trace.delta.iter().chain(&trace.speed_dev).chain(&trace.pe).all(|v| v.is_finite()));
        let dt: Vec<f64> = trace.t.windows(2).map(|w| w[1] - w[0]).collect();
        prop_assert!(dt.iter().all(|x| (x - 0.5e-3).abs() < 1e-12));
    }
}
