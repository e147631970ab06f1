use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset, MinMaxScaler, MlError};

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fully connected network with logistic units on every layer.
///
/// `weights[l]` is row-major `layout[l+1] × layout[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layout: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Standard-normal initialization, reproducible from `seed`.
    pub fn random(layout: &[usize], seed: u64) -> Result<Self, MlError> {
        if layout.len() < 2 || layout.contains(&0) {
            return Err(MlError::InvalidModel(format!("layout {layout:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layout.windows(2) {
            weights.push(
                (0..w[0] * w[1])
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect(),
            );
            biases.push((0..w[1]).map(|_| StandardNormal.sample(&mut rng)).collect());
        }
        Ok(Self {
            layout: layout.to_vec(),
            weights,
            biases,
        })
    }

    pub fn zeros(layout: &[usize]) -> Result<Self, MlError> {
        let mut m = Self::random(layout, 0)?;
        m.set_params(&vec![0.0; m.param_count()]);
        Ok(m)
    }

    pub(crate) fn validate(&self) -> Result<(), MlError> {
        let l = &self.layout;
        if l.len() < 2 || l.contains(&0) {
            return Err(MlError::InvalidModel(format!("layout {l:?}")));
        }
        if self.weights.len() != l.len() - 1 || self.biases.len() != l.len() - 1 {
            return Err(MlError::InvalidModel("layer count".into()));
        }
        for (k, w) in l.windows(2).enumerate() {
            if self.weights[k].len() != w[0] * w[1] || self.biases[k].len() != w[1] {
                return Err(MlError::InvalidModel(format!("layer {k} shape")));
            }
        }
        if !self.params().iter().all(|p| p.is_finite()) {
            return Err(MlError::InvalidModel("non-finite weight".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flattened parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w);
            p.extend_from_slice(b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p[k..k + nw]);
            k += nw;
            b.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
    }

    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (n_in, n_out) = (self.layout[l], self.layout[l + 1]);
            let prev = &acts[l];
            let next = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    logistic(row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>() + b[o])
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.activations(x).pop().unwrap_or_default()
    }

    /// Half the summed squared error over the batch.
    pub fn loss(&self, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> f64 {
        xs.iter()
            .zip(ts)
            .map(|(x, t)| {
                self.forward(x)
                    .iter()
                    .zip(t)
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
            })
            .sum::<f64>()
            * 0.5
    }

    /// Gradient of [`MlpModel::loss`] by backpropagation, in `params` order.
    pub fn gradient(&self, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> Vec<f64> {
        let layers = self.weights.len();
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        for (x, t) in xs.iter().zip(ts) {
            let acts = self.activations(x);
            let out = &acts[layers];
            let mut delta: Vec<f64> = out
                .iter()
                .zip(t)
                .map(|(y, t)| (y - t) * y * (1.0 - y))
                .collect();
            for l in (0..layers).rev() {
                let n_in = self.layout[l];
                let prev = &acts[l];
                for (o, d) in delta.iter().enumerate() {
                    gb[l][o] += d;
                    for (i, a) in prev.iter().enumerate() {
                        gw[l][o * n_in + i] += d * a;
                    }
                }
                if l > 0 {
                    delta = (0..n_in)
                        .map(|i| {
                            let s: f64 = delta
                                .iter()
                                .enumerate()
                                .map(|(o, d)| self.weights[l][o * n_in + i] * d)
                                .sum();
                            s * prev[i] * (1.0 - prev[i])
                        })
                        .collect();
                }
            }
        }
        let mut g = Vec::with_capacity(self.param_count());
        for (w, b) in gw.iter().zip(&gb) {
            g.extend_from_slice(w);
            g.extend_from_slice(b);
        }
        g
    }

    /// Full-batch gradient descent with a bold-driver step size: a step that
    /// lowers the loss is kept and the rate grows by 5%, otherwise it is
    /// undone and the rate halves.
    pub fn train(
        mut self,
        xs: &[Vec<f64>],
        ts: &[Vec<f64>],
        cfg: &MlpTrainConfig,
    ) -> Result<(Self, TrainReport), MlError> {
        let mut p = self.params();
        let mut loss = self.loss(xs, ts);
        if !loss.is_finite() {
            return Err(MlError::Diverged(0));
        }
        let mut report = TrainReport {
            epochs: 0,
            initial_loss: loss,
            final_loss: loss,
            accepted: 0,
        };
        let mut lr = cfg.learning_rate;
        for epoch in 1..=cfg.epochs {
            if loss < cfg.loss_threshold {
                break;
            }
            report.epochs = epoch;
            let g = self.gradient(xs, ts);
            let trial: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p - lr * g).collect();
            self.set_params(&trial);
            let trial_loss = self.loss(xs, ts);
            if trial_loss.is_finite() && trial_loss <= loss {
                p = trial;
                loss = trial_loss;
                lr *= 1.05;
                report.accepted += 1;
            } else {
                self.set_params(&p);
                lr *= 0.5;
                if lr == 0.0 || !lr.is_finite() {
                    return Err(MlError::Diverged(epoch));
                }
            }
        }
        report.final_loss = loss;
        Ok((self, report))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub loss_threshold: f64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20_000,
            learning_rate: 0.1,
            loss_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    /// Gradient steps attempted.
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub accepted: usize,
}

/// Largest relative gap between the backpropagated gradient and a central
/// finite difference with step `h`.
pub fn gradient_check(model: &MlpModel, xs: &[Vec<f64>], ts: &[Vec<f64>], h: f64) -> f64 {
    let analytic = model.gradient(xs, ts);
    let base = model.params();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, a) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.set_params(&p);
        let up = probe.loss(xs, ts);
        p[k] = base[k] - h;
        probe.set_params(&p);
        let down = probe.loss(xs, ts);
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((a - numeric).abs() / scale);
    }
    worst
}

/// Network plus the feature scaling and label coding it was trained with.
/// Two classes use one output unit; more classes use one unit each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    pub scaler: MinMaxScaler,
    pub classes: Vec<u32>,
    pub model: MlpModel,
}

impl MlpClassifier {
    pub fn train(
        train: &Dataset,
        hidden: &[usize],
        seed: u64,
        cfg: &MlpTrainConfig,
    ) -> Result<(Self, TrainReport), MlError> {
        let classes = train.classes();
        if classes.len() < 2 {
            return Err(MlError::OneClass);
        }
        let scaler = MinMaxScaler::fit(&train.features)?;
        let xs = scaler.transform_all(&train.features);
        let ts = Self::targets(&classes, &train.labels);
        let mut layout = vec![train.dim()];
        layout.extend_from_slice(hidden);
        layout.push(ts[0].len());
        let (model, report) = MlpModel::random(&layout, seed)?.train(&xs, &ts, cfg)?;
        Ok((
            Self {
                scaler,
                classes,
                model,
            },
            report,
        ))
    }

    fn targets(classes: &[u32], labels: &[u32]) -> Vec<Vec<f64>> {
        labels
            .iter()
            .map(|l| {
                if classes.len() == 2 {
                    vec![if *l == classes[1] { 1.0 } else { 0.0 }]
                } else {
                    classes
                        .iter()
                        .map(|c| if c == l { 1.0 } else { 0.0 })
                        .collect()
                }
            })
            .collect()
    }

    pub(crate) fn validate(&self) -> Result<(), MlError> {
        self.model.validate()?;
        let d = self.model.layout[0];
        let out = *self.model.layout.last().unwrap_or(&0);
        let expected_out = if self.classes.len() == 2 {
            1
        } else {
            self.classes.len()
        };
        if self.classes.len() < 2 || out != expected_out {
            return Err(MlError::InvalidModel(
                "output width does not match classes".into(),
            ));
        }
        if self.scaler.min.len() != d || self.scaler.max.len() != d {
            return Err(MlError::InvalidModel("scaler width".into()));
        }
        Ok(())
    }
}

impl Classifier for MlpClassifier {
    fn predict(&self, x: &[f64]) -> u32 {
        let y = self.model.forward(&self.scaler.transform(x));
        if self.classes.len() == 2 {
            return if y[0] >= 0.5 {
                self.classes[1]
            } else {
                self.classes[0]
            };
        }
        let mut best = 0;
        for (k, v) in y.iter().enumerate() {
            if *v > y[best] {
                best = k;
            }
        }
        self.classes[best]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            vec![vec![0.0], vec![1.0], vec![1.0], vec![0.0]],
        )
    }

    #[test]
    fn xor_reaches_low_loss() {
        let (xs, ts) = xor();
        let cfg = MlpTrainConfig {
            epochs: 20_000,
            learning_rate: 0.5,
            loss_threshold: 0.01,
        };
        let (_, r) = MlpModel::random(&[2, 2, 1], 3)
            .unwrap()
            .train(&xs, &ts, &cfg)
            .unwrap();
        assert!(r.final_loss < 0.01, "{r:?}");
        assert!(r.epochs <= 20_000);
    }

    #[test]
    fn zero_epochs_keeps_initialization() {
        let (xs, ts) = xor();
        let m = MlpModel::random(&[2, 3, 1], 8).unwrap();
        let cfg = MlpTrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (t, r) = m.clone().train(&xs, &ts, &cfg).unwrap();
        assert_eq!(t, m);
        assert_eq!(r.epochs, 0);
        assert_eq!(m, MlpModel::random(&[2, 3, 1], 8).unwrap());
    }

    #[test]
    fn nan_weights_are_reported_as_divergence() {
        let (xs, ts) = xor();
        let mut m = MlpModel::random(&[2, 2, 1], 1).unwrap();
        m.weights[0][0] = f64::NAN;
        assert_eq!(
            m.train(&xs, &ts, &MlpTrainConfig::default()),
            Err(MlError::Diverged(0))
        );
    }

    #[test]
    fn zero_weights_gradient_check() {
        let (xs, ts) = xor();
        let m = MlpModel::zeros(&[2, 3, 1]).unwrap();
        assert!(gradient_check(&m, &xs, &ts, 1e-5) < 1e-4);
    }

    #[test]
    fn bad_layout() {
        assert!(MlpModel::random(&[2], 0).is_err());
        assert!(MlpModel::random(&[2, 0, 1], 0).is_err());
    }
}
