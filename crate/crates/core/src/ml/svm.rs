use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-|x - z|² / (2σ²))`
    Rbf {
        sigma: f64,
    },
    Linear,
}

impl Kernel {
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { sigma } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            Kernel::Linear => x.iter().zip(z).map(|(a, b)| a * b).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    /// RBF width; `None` picks the median pairwise training distance.
    pub sigma: Option<f64>,
    pub linear: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            sigma: None,
            linear: false,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }
}

/// Median of all pairwise Euclidean distances between distinct rows.
pub fn median_pairwise_distance(rows: &[Vec<f64>]) -> f64 {
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let s: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.push(s.sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    let med = if d.len() % 2 == 0 {
        0.5 * (d[m - 1] + d[m])
    } else {
        d[m]
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// One binary machine: decision `Σ coef_i K(sv_i, x) + bias`, positive
/// means `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: u32,
    pub negative: u32,
    pub support: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector
    pub coef: Vec<f64>,
    pub bias: f64,
    pub kkt_gap: f64,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Soft-margin SVM, one machine per class pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub classes: Vec<u32>,
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn train(train: &Dataset, config: &SvmConfig) -> Result<Self, MlError> {
        let classes = train.classes();
        if classes.len() < 2 {
            return Err(MlError::OneClass);
        }
        let kernel = if config.linear {
            Kernel::Linear
        } else {
            Kernel::Rbf {
                sigma: config
                    .sigma
                    .unwrap_or_else(|| median_pairwise_distance(&train.features)),
            }
        };
        let mut machines = Vec::new();
        for (a, &pos) in classes.iter().enumerate() {
            for &neg in &classes[a + 1..] {
                let (x, y): (Vec<&[f64]>, Vec<f64>) = train
                    .features
                    .iter()
                    .zip(&train.labels)
                    .filter(|(_, &l)| l == pos || l == neg)
                    .map(|(f, &l)| (f.as_slice(), if l == pos { 1.0 } else { -1.0 }))
                    .unzip();
                machines.push(smo(&x, &y, &kernel, config, pos, neg)?);
            }
        }
        Ok(Self {
            kernel,
            c: config.c,
            classes,
            machines,
        })
    }

    pub(crate) fn validate(&self) -> Result<(), MlError> {
        if let Kernel::Rbf { sigma } = self.kernel {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(MlError::InvalidModel(format!("sigma {sigma}")));
            }
        }
        if self.classes.len() < 2 {
            return Err(MlError::OneClass);
        }
        let k = self.classes.len();
        if self.machines.len() != k * (k - 1) / 2 {
            return Err(MlError::InvalidModel("machine count".into()));
        }
        for m in &self.machines {
            if m.support.len() != m.coef.len() {
                return Err(MlError::InvalidModel("coefficient count".into()));
            }
            if !self.classes.contains(&m.positive) || !self.classes.contains(&m.negative) {
                return Err(MlError::InvalidModel("unknown class".into()));
            }
            let finite = m.bias.is_finite()
                && m.coef
                    .iter()
                    .all(|c| c.is_finite() && c.abs() <= self.c * (1.0 + 1e-9))
                && m.support.iter().flatten().all(|v| v.is_finite());
            if !finite {
                return Err(MlError::InvalidModel(
                    "non-finite or out-of-box coefficient".into(),
                ));
            }
        }
        Ok(())
    }

    /// Largest KKT violation over all binary machines at the end of training.
    pub fn kkt_gap(&self) -> f64 {
        self.machines.iter().map(|m| m.kkt_gap).fold(0.0, f64::max)
    }
}

impl Classifier for SvmModel {
    fn predict(&self, x: &[f64]) -> u32 {
        let mut votes = vec![0usize; self.classes.len()];
        for m in &self.machines {
            let winner = if m.decision(&self.kernel, x) > 0.0 {
                m.positive
            } else {
                m.negative
            };
            let idx = self.classes.binary_search(&winner).unwrap_or(0);
            votes[idx] += 1;
        }
        // classes are sorted, so the first maximum is the lowest code
        let best = votes.iter().copied().max().unwrap_or(0);
        self.classes[votes.iter().position(|&v| v == best).unwrap_or(0)]
    }
}

/// Dual coordinate pairs chosen by maximal violation with second-order
/// working-set selection.
fn smo(
    x: &[&[f64]],
    y: &[f64],
    kernel: &Kernel,
    cfg: &SvmConfig,
    positive: u32,
    negative: u32,
) -> Result<BinarySvm, MlError> {
    let n = x.len();
    let c = cfg.c;
    let tau = 1e-12;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(x[i], x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let gap = loop {
        let mut i = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > m_up {
                m_up = -y[t] * grad[t];
                i = t;
            }
        }
        let mut m_low = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            m_low = m_low.min(v);
            if i != usize::MAX && v < m_up {
                let b = m_up - v;
                let mut a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                if a <= 0.0 {
                    a = tau;
                }
                let score = -b * b / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        let gap = m_up - m_low;
        if i == usize::MAX || j == usize::MAX || gap < cfg.tolerance {
            break gap.max(0.0);
        }
        if iterations >= cfg.max_iterations {
            return Err(MlError::NotConverged { iterations, gap });
        }
        iterations += 1;

        let mut a = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
        if a <= 0.0 {
            a = tau;
        }
        let b = -y[i] * grad[i] + y[j] * grad[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let sum = y[i] * old_i + y[j] * old_j;
        let mut ai = old_i + y[i] * b / a;
        ai = ai.clamp(0.0, c);
        let mut aj = y[j] * (sum - y[i] * ai);
        aj = aj.clamp(0.0, c);
        ai = (y[i] * (sum - y[j] * aj)).clamp(0.0, c);
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[t * n + i] * di + y[j] * k[t * n + j] * dj);
        }
    };

    let mut free_sum = 0.0;
    let mut free = 0;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free += 1;
        } else if in_up(alpha[t], y[t]) {
            lb = lb.max(v);
        } else {
            ub = ub.min(v);
        }
    }
    let bias = if free > 0 {
        free_sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };

    let (support, coef) = (0..n)
        .filter(|&t| alpha[t] > 0.0)
        .map(|t| (x[t].to_vec(), alpha[t] * y[t]))
        .unzip();
    Ok(BinarySvm {
        positive,
        negative,
        support,
        coef,
        bias,
        kkt_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> Dataset {
        Dataset::new(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
            ],
            vec![0, 0, 1, 1],
            vec![],
            "y",
        )
        .unwrap()
    }

    fn train_accuracy(m: &SvmModel, d: &Dataset) -> f64 {
        let hits = d
            .features
            .iter()
            .zip(&d.labels)
            .filter(|(f, l)| m.predict(f) == **l)
            .count();
        hits as f64 / d.len() as f64
    }

    #[test]
    fn rbf_separates_xor_and_linear_cannot() {
        let d = xor();
        let cfg = SvmConfig {
            c: 100.0,
            ..Default::default()
        };
        let rbf = SvmModel::train(&d, &cfg).unwrap();
        assert_eq!(train_accuracy(&rbf, &d), 1.0);
        assert!(rbf.kkt_gap() < 1e-3);
        let lin = SvmModel::train(
            &d,
            &SvmConfig {
                linear: true,
                ..cfg
            },
        )
        .unwrap();
        assert!(train_accuracy(&lin, &d) < 1.0);
    }

    #[test]
    fn alphas_stay_in_the_box() {
        let m = SvmModel::train(&xor(), &SvmConfig::default()).unwrap();
        m.validate().unwrap();
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let cfg = SvmConfig {
            max_iterations: 0,
            ..Default::default()
        };
        match SvmModel::train(&xor(), &cfg) {
            Err(MlError::NotConverged { iterations: 0, gap }) => assert!(gap > 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn one_class_is_rejected() {
        let d = Dataset::new(vec![vec![0.0], vec![1.0]], vec![3, 3], vec![], "y").unwrap();
        assert_eq!(
            SvmModel::train(&d, &SvmConfig::default()),
            Err(MlError::OneClass)
        );
    }

    #[test]
    fn median_distance() {
        let rows = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert_eq!(median_pairwise_distance(&rows), 2.0);
    }
}
