use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MlError;

/// Feature table with one label code per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    pub feature_names: Vec<String>,
    pub label_name: String,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u32>,
        feature_names: Vec<String>,
        label_name: impl Into<String>,
    ) -> Result<Self, MlError> {
        if features.is_empty() {
            return Err(MlError::Empty);
        }
        if features.len() != labels.len() {
            return Err(MlError::LabelCount {
                features: features.len(),
                labels: labels.len(),
            });
        }
        let d = features[0].len();
        for (row, f) in features.iter().enumerate() {
            if f.len() != d {
                return Err(MlError::Ragged {
                    row,
                    found: f.len(),
                    expected: d,
                });
            }
            if let Some(col) = f.iter().position(|v| !v.is_finite()) {
                return Err(MlError::NotFinite { row, col });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            label_name: label_name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    /// Sorted distinct label codes.
    pub fn classes(&self) -> Vec<u32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// Random split with `round(fraction·n)` rows in the first part. Rows
    /// keep their original relative order inside each part.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), MlError> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(MlError::Fraction(fraction));
        }
        let n = self.len();
        let n_train = (fraction * n as f64).round() as usize;
        if n_train == 0 {
            return Err(MlError::EmptySide("train"));
        }
        if n_train == n {
            return Err(MlError::EmptySide("test"));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (mut a, mut b) = (idx[..n_train].to_vec(), idx[n_train..].to_vec());
        a.sort_unstable();
        b.sort_unstable();
        Ok((self.subset(&a), self.subset(&b)))
    }
}

/// Per-column affine map of the training range onto [0, 1]. Constant
/// columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, MlError> {
        let first = rows.first().ok_or(MlError::Empty)?;
        let mut min = first.clone();
        let mut max = first.clone();
        for r in rows {
            for (k, &v) in r.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let span = self.max[k] - self.min[k];
                if span > 0.0 {
                    (v - self.min[k]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(k, &v)| self.min[k] + v * (self.max[k] - self.min[k]))
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// One-hot columns for a categorical feature. Categories are sorted, so the
/// encoding does not depend on row order.
pub fn one_hot<S: AsRef<str>>(values: &[S]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut cats: Vec<String> = values.iter().map(|v| v.as_ref().to_string()).collect();
    cats.sort();
    cats.dedup();
    let rows = values
        .iter()
        .map(|v| {
            cats.iter()
                .map(|c| if c == v.as_ref() { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    (cats, rows)
}

/// Fractions of wrong (`false_frac`) and right (`true_frac`) predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub false_frac: f64,
    pub true_frac: f64,
}

pub fn agreement(predicted: &[u32], actual: &[u32]) -> Result<Agreement, MlError> {
    if actual.is_empty() {
        return Err(MlError::Empty);
    }
    if predicted.len() != actual.len() {
        return Err(MlError::LabelCount {
            features: predicted.len(),
            labels: actual.len(),
        });
    }
    let right = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    let n = actual.len();
    Ok(Agreement {
        false_frac: (n - right) as f64 / n as f64,
        true_frac: right as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        Dataset::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            (0..n).map(|i| (i % 2) as u32).collect(),
            vec!["x".into()],
            "y",
        )
        .unwrap()
    }

    #[test]
    fn split_sizes() {
        let (a, b) = toy(4418).split(0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (2209, 2209));
        let (a, b) = toy(335).split(0.8, 1).unwrap();
        assert_eq!((a.len(), b.len()), (268, 67));
    }

    #[test]
    fn split_is_a_partition_and_reproducible() {
        let d = toy(50);
        let (a, b) = d.split(0.3, 9).unwrap();
        let mut all: Vec<f64> = a.features.iter().chain(&b.features).map(|r| r[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..50).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(d.split(0.3, 9).unwrap(), (a, b));
    }

    #[test]
    fn split_rejects_bad_fractions() {
        assert_eq!(toy(5).split(1.0, 0), Err(MlError::Fraction(1.0)));
        assert_eq!(toy(1).split(0.5, 0), Err(MlError::EmptySide("test")));
        assert_eq!(toy(3).split(0.1, 0), Err(MlError::EmptySide("train")));
    }

    #[test]
    fn dataset_validation() {
        assert_eq!(
            Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1], vec![], "y"),
            Err(MlError::Ragged {
                row: 1,
                found: 2,
                expected: 1
            })
        );
        assert_eq!(
            Dataset::new(vec![vec![f64::NAN]], vec![0], vec![], "y"),
            Err(MlError::NotFinite { row: 0, col: 0 })
        );
        assert_eq!(
            Dataset::new(vec![], vec![], vec![], "y"),
            Err(MlError::Empty)
        );
    }

    #[test]
    fn scaler_round_trip() {
        let rows = vec![vec![1.0, 5.0, 2.0], vec![3.0, -5.0, 2.0]];
        let s = MinMaxScaler::fit(&rows).unwrap();
        assert_eq!(s.transform(&rows[0]), vec![0.0, 1.0, 0.0]);
        assert_eq!(s.transform(&rows[1]), vec![1.0, 0.0, 0.0]);
        assert_eq!(
            s.inverse(&s.transform(&[2.0, 0.0, 2.0])),
            vec![2.0, 0.0, 2.0]
        );
    }

    #[test]
    fn one_hot_is_order_free() {
        let (names, rows) = one_hot(&["Tower", "Span", "Tower"]);
        assert_eq!(names, vec!["Span", "Tower"]);
        assert_eq!(rows[0], vec![0.0, 1.0]);
        assert_eq!(rows[1], vec![1.0, 0.0]);
    }

    #[test]
    fn agreement_table() {
        let a = agreement(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((a.false_frac, a.true_frac), (0.5, 0.5));
        assert_eq!(agreement(&[], &[]), Err(MlError::Empty));
    }
}
