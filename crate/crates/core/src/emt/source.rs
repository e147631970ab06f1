use serde::{Deserialize, Serialize};

use super::EmtError;

/// Piecewise-linear lightning current: 0 at t = 0, `Ip` at `tf`, `Ip/2` at
/// `th`, then decaying with the same tail slope until it reaches zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleRampSource {
    pub ip_ka: f64,
    pub tf_us: f64,
    pub th_us: f64,
    pub node: usize,
}

impl DoubleRampSource {
    pub fn new(ip_ka: f64, tf_us: f64, th_us: f64, node: usize) -> Result<Self, EmtError> {
        if !(ip_ka.is_finite() && ip_ka > 0.0) {
            return Err(EmtError::InvalidSource(format!("peak {ip_ka} kA")));
        }
        if !(tf_us.is_finite() && th_us.is_finite() && 0.0 < tf_us && tf_us < th_us) {
            return Err(EmtError::InvalidSource(format!(
                "need 0 < tf < th, got tf = {tf_us} us, th = {th_us} us"
            )));
        }
        Ok(Self {
            ip_ka,
            tf_us,
            th_us,
            node,
        })
    }

    /// Current in amperes at `t` seconds.
    pub fn eval(&self, t: f64) -> f64 {
        double_ramp(self.ip_ka * 1e3, self.tf_us * 1e-6, self.th_us * 1e-6, t)
    }
}

fn double_ramp(peak: f64, tf: f64, th: f64, t: f64) -> f64 {
    let shape = if t.is_nan() || t <= 0.0 {
        0.0
    } else if t <= tf {
        t / tf
    } else {
        (1.0 - 0.5 * (t - tf) / (th - tf)).max(0.0)
    };
    peak * shape
}

/// Time functions for sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Waveform {
    Dc(f64),
    /// `amplitude` for t >= `t_on`, 0 before.
    Step {
        amplitude: f64,
        t_on: f64,
    },
    /// `amplitude·cos(2π·freq·t + phase)`.
    Sine {
        amplitude: f64,
        freq_hz: f64,
        phase_rad: f64,
    },
    /// Double-ramp current, peak and times in SI units.
    DoubleRamp {
        peak: f64,
        tf: f64,
        th: f64,
    },
}

impl Waveform {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Waveform::Dc(v) => v,
            Waveform::Step { amplitude, t_on } => {
                if t >= t_on {
                    amplitude
                } else {
                    0.0
                }
            }
            Waveform::Sine {
                amplitude,
                freq_hz,
                phase_rad,
            } => amplitude * (std::f64::consts::TAU * freq_hz * t + phase_rad).cos(),
            Waveform::DoubleRamp { peak, tf, th } => double_ramp(peak, tf, th, t),
        }
    }
}

impl From<DoubleRampSource> for Waveform {
    fn from(s: DoubleRampSource) -> Self {
        Waveform::DoubleRamp {
            peak: s.ip_ka * 1e3,
            tf: s.tf_us * 1e-6,
            th: s.th_us * 1e-6,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knees() {
        let s = DoubleRampSource::new(30.0, 1.2, 50.0, 1).unwrap();
        assert_eq!(s.eval(0.0), 0.0);
        assert!((s.eval(1.2e-6) - 30e3).abs() < 1e-9);
        assert!((s.eval(50e-6) - 15e3).abs() < 1e-9);
        assert!((s.eval(0.6e-6) - 15e3).abs() < 1e-9);
        // tail reaches zero at tf + 2(th - tf)
        assert_eq!(s.eval(98.8e-6 + 1e-9), 0.0);
        assert_eq!(s.eval(1.0), 0.0);
        assert_eq!(s.eval(f64::NAN), 0.0);
    }

    #[test]
    fn continuous_around_peak() {
        let s = DoubleRampSource::new(10.0, 2.0, 80.0, 1).unwrap();
        let eps = 1e-15;
        assert!((s.eval(2e-6 - eps) - s.eval(2e-6 + eps)).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_times() {
        assert!(DoubleRampSource::new(10.0, 5.0, 5.0, 1).is_err());
        assert!(DoubleRampSource::new(10.0, 0.0, 5.0, 1).is_err());
        assert!(DoubleRampSource::new(-1.0, 1.0, 5.0, 1).is_err());
    }

    #[test]
    fn waveform_variants() {
        assert_eq!(Waveform::Dc(3.0).eval(1.0), 3.0);
        let step = Waveform::Step {
            amplitude: 2.0,
            t_on: 1e-3,
        };
        assert_eq!(step.eval(0.0), 0.0);
        assert_eq!(step.eval(1e-3), 2.0);
        let sine = Waveform::Sine {
            amplitude: 1.0,
            freq_hz: 50.0,
            phase_rad: 0.0,
        };
        assert!((sine.eval(0.01) + 1.0).abs() < 1e-12);
        let negative = Waveform::DoubleRamp {
            peak: -10.0,
            tf: 1.0,
            th: 2.0,
        };
        assert_eq!(negative.eval(2.0), -5.0);
        assert_eq!(negative.eval(10.0), 0.0);
    }
}
