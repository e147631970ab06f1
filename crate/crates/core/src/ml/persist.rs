use serde::{Deserialize, Serialize};

use super::{Classifier, KnnModel, MlError, MlpClassifier, SvmModel};

/// Any trained model in its on-disk JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Knn(KnnModel),
    Svm(SvmModel),
    Mlp(MlpClassifier),
}

impl Classifier for SavedModel {
    fn predict(&self, x: &[f64]) -> u32 {
        match self {
            SavedModel::Knn(m) => m.predict(x),
            SavedModel::Svm(m) => m.predict(x),
            SavedModel::Mlp(m) => m.predict(x),
        }
    }
}

impl SavedModel {
    pub fn validate(&self) -> Result<(), MlError> {
        match self {
            SavedModel::Knn(m) => m.validate(),
            SavedModel::Svm(m) => m.validate(),
            SavedModel::Mlp(m) => m.validate(),
        }
    }
}

pub fn save_model(model: &SavedModel) -> String {
    serde_json::to_string_pretty(model).expect("models serialize")
}

/// Parses and structurally checks a saved model.
pub fn load_model(text: &str) -> Result<SavedModel, MlError> {
    let m: SavedModel = serde_json::from_str(text).map_err(|e| MlError::Format(e.to_string()))?;
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{Dataset, MlpTrainConfig, SvmConfig};

    fn data() -> Dataset {
        Dataset::new(
            vec![
                vec![0.0, 0.0],
                vec![0.1, 0.2],
                vec![3.0, 3.0],
                vec![3.2, 2.9],
            ],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
            "y",
        )
        .unwrap()
    }

    #[test]
    fn round_trips_preserve_predictions() {
        let d = data();
        let models = vec![
            SavedModel::Knn(KnnModel::fit(&d, 1).unwrap()),
            SavedModel::Svm(SvmModel::train(&d, &SvmConfig::default()).unwrap()),
            SavedModel::Mlp(
                MlpClassifier::train(&d, &[3], 1, &MlpTrainConfig::default())
                    .unwrap()
                    .0,
            ),
        ];
        for m in models {
            let back = load_model(&save_model(&m)).unwrap();
            assert_eq!(back, m);
            for q in [[0.0, 0.1], [2.0, 2.0], [3.0, 3.1]] {
                assert_eq!(back.predict(&q), m.predict(&q));
            }
        }
    }

    #[test]
    fn rejects_garbage_and_inconsistent_models() {
        assert!(matches!(load_model("{"), Err(MlError::Format(_))));
        let text = r#"{"kind":"knn","k":5,"features":[[0.0]],"labels":[1]}"#;
        assert_eq!(load_model(text), Err(MlError::BadK { k: 5, n: 1 }));
    }
}
