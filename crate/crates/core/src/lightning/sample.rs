use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{LightningError, LineGeometry};

/// Parameters of the random inputs of one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrokeDistributions {
    /// Median and log standard deviation of the peak current, kA.
    pub peak_median_ka: f64,
    pub peak_sigma_ln: f64,
    pub front_median_us: f64,
    pub front_sigma_ln: f64,
    pub tail_median_us: f64,
    pub tail_sigma_ln: f64,
    pub footing_min_ohm: f64,
    pub footing_max_ohm: f64,
    /// Insulator critical flashover voltage and its standard deviation, kV.
    pub cfo_kv: f64,
    pub cfo_sigma_kv: f64,
}

impl Default for StrokeDistributions {
    fn default() -> Self {
        Self {
            peak_median_ka: 34.0,
            peak_sigma_ln: 0.740,
            front_median_us: 2.0,
            front_sigma_ln: 0.494,
            tail_median_us: 77.5,
            tail_sigma_ln: 0.577,
            footing_min_ohm: 10.0,
            footing_max_ohm: 100.0,
            cfo_kv: 977.5,
            cfo_sigma_kv: 0.05 * 977.5,
        }
    }
}

impl StrokeDistributions {
    pub fn validate(&self) -> Result<(), LightningError> {
        let positive = [
            ("peak median", self.peak_median_ka),
            ("peak sigma", self.peak_sigma_ln),
            ("front median", self.front_median_us),
            ("front sigma", self.front_sigma_ln),
            ("tail median", self.tail_median_us),
            ("tail sigma", self.tail_sigma_ln),
            ("minimum footing resistance", self.footing_min_ohm),
            ("CFO", self.cfo_kv),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(LightningError::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.footing_max_ohm.is_finite() && self.footing_max_ohm >= self.footing_min_ohm) {
            return Err(LightningError::Parameter(
                "footing resistance range is empty".into(),
            ));
        }
        if !(self.cfo_sigma_kv.is_finite() && self.cfo_sigma_kv >= 0.0) {
            return Err(LightningError::Parameter(
                "CFO deviation must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One Monte Carlo event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeSample {
    pub x_along_m: f64,
    pub y_lateral_m: f64,
    pub phase_angle_deg: f64,
    pub ip_ka: f64,
    pub tf_us: f64,
    pub th_us: f64,
    pub r_footing_ohm: f64,
    pub insulator_strength_kv: f64,
}

fn event_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Event `index` of the study seeded with `seed`. Each event has its own
/// random stream, so events can be drawn in any order.
pub fn sample_stroke(
    seed: u64,
    index: u64,
    geom: &LineGeometry,
    d: &StrokeDistributions,
) -> StrokeSample {
    let mut rng = event_rng(seed, index);
    let lognormal = |median: f64, sigma: f64| LogNormal::new(median.ln(), sigma).unwrap();
    let l2 = geom.exposed_length_m();
    let w = geom.strip_half_width_m;
    let x_along_m = uniform(&mut rng, 0.0, l2);
    let y_lateral_m = uniform(&mut rng, -w, w);
    let phase_angle_deg = uniform(&mut rng, 0.0, 360.0);
    let ip_ka = lognormal(d.peak_median_ka, d.peak_sigma_ln).sample(&mut rng);
    let tf_us = lognormal(d.front_median_us, d.front_sigma_ln).sample(&mut rng);
    let th_us = lognormal(d.tail_median_us, d.tail_sigma_ln).sample(&mut rng);
    let r_footing_ohm = uniform(&mut rng, d.footing_min_ohm, d.footing_max_ohm);
    let insulator_strength_kv = Normal::new(d.cfo_kv, d.cfo_sigma_kv)
        .unwrap()
        .sample(&mut rng);
    StrokeSample {
        x_along_m,
        y_lateral_m,
        phase_angle_deg,
        ip_ka,
        tf_us,
        th_us,
        r_footing_ohm,
        insulator_strength_kv,
    }
}

/// Extra per-tower strengths for an event, from a stream disjoint from the
/// event's own.
pub(crate) fn tower_strengths(
    seed: u64,
    index: u64,
    towers: usize,
    d: &StrokeDistributions,
) -> Vec<f64> {
    let mut rng = event_rng(seed, index | 1 << 63);
    let normal = Normal::new(d.cfo_kv, d.cfo_sigma_kv).unwrap();
    (0..towers).map(|_| normal.sample(&mut rng)).collect()
}

pub fn sample_strokes(
    n: usize,
    seed: u64,
    geom: &LineGeometry,
    d: &StrokeDistributions,
) -> Vec<StrokeSample> {
    (0..n as u64)
        .map(|i| sample_stroke(seed, i, geom, d))
        .collect()
}
