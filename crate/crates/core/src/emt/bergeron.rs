use nalgebra::{DMatrix, DVector};

use super::EmtError;

/// Lossless multi-conductor line with one common travel time.
///
/// Each end `k` draws `i_k(t) = Yc·v_k(t) + h_k(t)` from its nodes, where
/// `h_k(t) = s_m(t − τ)` comes from the opposite end `m` and
/// `s_m = −Yc·v_m − i_m`. Travel times that are not a whole number of steps
/// are handled by linear interpolation between the two neighbouring samples.
#[derive(Debug, Clone)]
pub struct BergeronLine {
    zc: DMatrix<f64>,
    yc: DMatrix<f64>,
    tau: f64,
    lag: usize,
    frac: f64,
    buffers: [Vec<DVector<f64>>; 2],
    history: [DVector<f64>; 2],
}

impl BergeronLine {
    /// `zc` is the surge-impedance matrix in ohms, `tau` the travel time.
    pub fn new(zc: DMatrix<f64>, tau: f64, dt: f64) -> Result<Self, EmtError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EmtError::InvalidStep(dt));
        }
        if !(tau.is_finite() && tau >= dt) {
            return Err(EmtError::LineTooShort { tau, dt });
        }
        if zc.nrows() != zc.ncols() || zc.nrows() == 0 {
            return Err(EmtError::Dimension(format!(
                "surge impedance matrix is {}x{}",
                zc.nrows(),
                zc.ncols()
            )));
        }
        let yc = zc
            .clone()
            .try_inverse()
            .ok_or(EmtError::BadSurgeImpedance)?;
        let q = tau / dt;
        let (lag, frac) = if (q - q.round()).abs() < 1e-9 * q {
            (q.round() as usize, 0.0)
        } else {
            (q.floor() as usize, q - q.floor())
        };
        let n = zc.nrows();
        let depth = lag + 2;
        let zero = DVector::zeros(n);
        Ok(Self {
            zc,
            yc,
            tau,
            lag,
            frac,
            buffers: [vec![zero.clone(); depth], vec![zero.clone(); depth]],
            history: [zero.clone(), zero],
        })
    }

    pub fn single(zc: f64, tau: f64, dt: f64) -> Result<Self, EmtError> {
        Self::new(DMatrix::from_element(1, 1, zc), tau, dt)
    }

    pub fn conductors(&self) -> usize {
        self.zc.nrows()
    }

    pub fn zc(&self) -> &DMatrix<f64> {
        &self.zc
    }

    pub fn yc(&self) -> &DMatrix<f64> {
        &self.yc
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Ring-buffer depth in samples per end.
    pub fn depth(&self) -> usize {
        self.buffers[0].len()
    }

    /// Fills both delay buffers as if each end had sat at the given
    /// voltages with zero current since t = −∞ (a line charged to DC).
    pub fn prime(&mut self, v_send: &DVector<f64>, v_recv: &DVector<f64>) {
        for (end, v) in [v_send, v_recv].into_iter().enumerate() {
            let s = -(&self.yc * v);
            for slot in self.buffers[end].iter_mut() {
                slot.copy_from(&s);
            }
        }
    }

    fn delayed(&self, end: usize, step: usize) -> DVector<f64> {
        let depth = self.depth() as i64;
        let at = |m: i64| &self.buffers[end][m.rem_euclid(depth) as usize];
        let m = step as i64 - self.lag as i64;
        if self.frac == 0.0 {
            at(m).clone()
        } else {
            at(m) * (1.0 - self.frac) + at(m - 1) * self.frac
        }
    }

    /// Computes the history currents for `step` (t = step·dt, step >= 1).
    /// They depend only on the opposite end at t − τ.
    pub fn bergeron_update(&mut self, step: usize) {
        self.history[0] = self.delayed(1, step);
        self.history[1] = self.delayed(0, step);
    }

    /// History current vector at end 0 (sending) or 1 (receiving).
    pub fn history(&self, end: usize) -> &DVector<f64> {
        &self.history[end]
    }

    /// Current drawn into the line at `end` for the solved end voltages.
    pub fn end_current(&self, end: usize, v: &DVector<f64>) -> DVector<f64> {
        &self.yc * v + &self.history[end]
    }

    /// Stores this step's characteristic values once the network is solved.
    pub fn record(&mut self, step: usize, v_send: &DVector<f64>, v_recv: &DVector<f64>) {
        let depth = self.depth();
        for (end, v) in [v_send, v_recv].into_iter().enumerate() {
            // s = −Yc·v − i = −2·Yc·v − h
            let s = -(&self.yc * v) * 2.0 - &self.history[end];
            self.buffers[end][step % depth] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_lines() {
        assert_eq!(
            BergeronLine::single(400.0, 0.5e-6, 1e-6).unwrap_err(),
            EmtError::LineTooShort {
                tau: 0.5e-6,
                dt: 1e-6
            }
        );
        assert!(BergeronLine::single(400.0, 0.0, 1e-6).is_err());
    }

    #[test]
    fn buffer_depth_follows_travel_time() {
        let l = BergeronLine::single(400.0, 1e-6, 1e-7).unwrap();
        assert_eq!(l.depth(), 12);
        let l = BergeronLine::single(400.0, 1.05e-6, 1e-7).unwrap();
        assert_eq!(l.depth(), 12);
    }

    #[test]
    fn history_sees_only_far_end() {
        let dt = 1.0;
        let mut l = BergeronLine::single(100.0, 2.0, dt).unwrap();
        l.prime(&DVector::zeros(1), &DVector::zeros(1));
        // step 1: drive the sending end only
        l.bergeron_update(1);
        l.record(1, &DVector::from_element(1, 50.0), &DVector::zeros(1));
        l.bergeron_update(2);
        assert_eq!(l.history(1)[0], 0.0);
        l.record(2, &DVector::zeros(1), &DVector::zeros(1));
        l.bergeron_update(3);
        // s_send(1) = −2·(50/100) − 0 = −1
        assert_eq!(l.history(1)[0], -1.0);
        assert_eq!(l.history(0)[0], 0.0);
    }
}
