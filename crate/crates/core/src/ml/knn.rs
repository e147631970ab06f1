use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset, MlError};

/// k-nearest-neighbour classifier with Euclidean distance.
///
/// Neighbours at equal distance are taken in training order. A vote tie
/// goes to the tied label whose neighbours are closer on average, then to
/// the lowest label code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
}

impl KnnModel {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self, MlError> {
        let model = Self {
            k,
            features: train.features.clone(),
            labels: train.labels.clone(),
        };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn validate(&self) -> Result<(), MlError> {
        let n = self.features.len();
        if self.k == 0 || self.k > n {
            return Err(MlError::BadK { k: self.k, n });
        }
        if self.labels.len() != n {
            return Err(MlError::LabelCount {
                features: n,
                labels: self.labels.len(),
            });
        }
        Dataset::new(self.features.clone(), self.labels.clone(), vec![], "")?;
        Ok(())
    }

    /// Indices and distances of the k nearest training rows.
    pub fn neighbours(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let s: f64 = f.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, s)
            })
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d.truncate(self.k);
        d.into_iter().map(|(i, s)| (i, s.sqrt())).collect()
    }
}

impl Classifier for KnnModel {
    fn predict(&self, x: &[f64]) -> u32 {
        // label -> (votes, summed distance)
        let mut tally: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
        for (i, d) in self.neighbours(x) {
            let e = tally.entry(self.labels[i]).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
        }
        let mut best: Option<(u32, usize, f64)> = None;
        // BTreeMap iterates in ascending label order, so strict comparisons
        // keep the lowest code on a full tie
        for (&label, &(votes, sum)) in &tally {
            let mean = sum / votes as f64;
            let better = match best {
                None => true,
                Some((_, bv, bm)) => votes > bv || (votes == bv && mean < bm),
            };
            if better {
                best = Some((label, votes, mean));
            }
        }
        best.map(|b| b.0).expect("k >= 1")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(points: &[(f64, f64, u32)]) -> Dataset {
        Dataset::new(
            points.iter().map(|p| vec![p.0, p.1]).collect(),
            points.iter().map(|p| p.2).collect(),
            vec!["x".into(), "y".into()],
            "c",
        )
        .unwrap()
    }

    #[test]
    fn self_match_with_k1() {
        let d = data(&[(0.0, 0.0, 3), (1.0, 0.0, 5), (0.0, 1.0, 7)]);
        let m = KnnModel::fit(&d, 1).unwrap();
        for (f, l) in d.features.iter().zip(&d.labels) {
            assert_eq!(m.predict(f), *l);
        }
    }

    #[test]
    fn global_vote() {
        let d = data(&[(0.0, 0.0, 1), (1.0, 0.0, 1), (5.0, 5.0, 1), (9.0, 9.0, 2)]);
        let m = KnnModel::fit(&d, 4).unwrap();
        assert_eq!(m.predict(&[9.0, 9.0]), 1);
        assert_eq!(m.predict(&[-3.0, 7.0]), 1);
    }

    #[test]
    fn tie_goes_to_closer_label_then_lowest_code() {
        let d = data(&[(1.0, 0.0, 4), (-2.0, 0.0, 2)]);
        let m = KnnModel::fit(&d, 2).unwrap();
        assert_eq!(m.predict(&[0.0, 0.0]), 4);
        let d = data(&[(1.0, 0.0, 4), (-1.0, 0.0, 2)]);
        let m = KnnModel::fit(&d, 2).unwrap();
        assert_eq!(m.predict(&[0.0, 0.0]), 2);
    }

    #[test]
    fn k_is_checked() {
        let d = data(&[(0.0, 0.0, 1)]);
        assert_eq!(KnnModel::fit(&d, 0), Err(MlError::BadK { k: 0, n: 1 }));
        assert_eq!(KnnModel::fit(&d, 2), Err(MlError::BadK { k: 2, n: 1 }));
    }
}
