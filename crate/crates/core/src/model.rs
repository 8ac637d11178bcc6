//! Versioned JSON model files.
//!
//! The file stores the basis parameters rather than the frequency arrays;
//! the basis is re-sampled on load and its digest checked against the one
//! recorded at training time.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infer::{CausationModel, DirectionModel, Model, TrainingReport};
use crate::learn::Classifier;
use crate::rff::{BasisSpec, RffBasis};

pub const MODEL_FORMAT: &str = "cepairs-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Body {
    Direction { classifier: Classifier },
    Causation { clf_causal: Classifier, clf_direction: Classifier },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    basis: BasisSpec,
    basis_digest: String,
    standardize: bool,
    #[serde(flatten)]
    body: Body,
    #[serde(default)]
    training: Option<TrainingReport>,
}

pub fn model_to_json(model: &Model, training: Option<&TrainingReport>) -> Result<String> {
    let body = match model {
        Model::Direction(m) => Body::Direction {
            classifier: m.classifier.clone(),
        },
        Model::Causation(m) => Body::Causation {
            clf_causal: m.clf_causal.clone(),
            clf_direction: m.clf_direction.clone(),
        },
    };
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        basis: model.basis().spec(),
        basis_digest: format!("{:016x}", model.basis().digest()),
        standardize: model.standardize(),
        body,
        training: training.cloned(),
    };
    serde_json::to_string(&file).map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<(Model, Option<TrainingReport>)> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!("unknown format {:?}", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {}", file.version)));
    }
    let basis = RffBasis::from_spec(file.basis)?;
    let recorded = u64::from_str_radix(&file.basis_digest, 16)
        .map_err(|_| Error::ModelFormat(format!("bad basis digest {:?}", file.basis_digest)))?;
    if recorded != basis.digest() {
        return Err(Error::BasisMismatch {
            expected: basis.digest(),
            found: recorded,
        });
    }
    let model = match file.body {
        Body::Direction { classifier } => Model::Direction(DirectionModel::new(basis, classifier, file.standardize)?),
        Body::Causation {
            clf_causal,
            clf_direction,
        } => Model::Causation(CausationModel::new(basis, clf_causal, clf_direction, file.standardize)?),
    };
    Ok((model, file.training))
}

pub fn save_model(path: impl AsRef<Path>, model: &Model, training: Option<&TrainingReport>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model, training)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Model, Option<TrainingReport>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{train_forest, train_gbm, ForestConfig, GbmConfig, TrainingSet};
    use crate::rff::sample_basis;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn toy(digest: u64) -> TrainingSet {
        let mut r = rng_from_seed(11);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut ids = Vec::new();
        for i in 0..80 {
            let row: Vec<f64> = (0..6).map(|_| r.random::<f64>() - 0.5).collect();
            labels.push(u8::from(row[0] + 0.3 * row[2] > 0.0));
            rows.push(row);
            ids.push(format!("r{i:03}"));
        }
        TrainingSet::new(rows, labels, ids, digest).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let basis = sample_basis(10.0, 6, 9).unwrap();
        let set = toy(basis.digest());
        let forest = Classifier::Forest(
            train_forest(
                &set,
                &ForestConfig {
                    n_trees: 20,
                    ..ForestConfig::default()
                },
            )
            .unwrap(),
        );
        let gbm = Classifier::Gbm(
            train_gbm(
                &set,
                &GbmConfig {
                    rounds: 20,
                    subsample: 0.7,
                    ..GbmConfig::default()
                },
            )
            .unwrap(),
        );
        let models = [
            Model::Direction(DirectionModel::new(basis.clone(), gbm.clone(), true).unwrap()),
            Model::Causation(CausationModel::new(basis.clone(), forest, gbm, false).unwrap()),
        ];
        let dir = tempfile::tempdir().unwrap();
        for (i, m) in models.iter().enumerate() {
            let path = dir.path().join(format!("m{i}.json"));
            save_model(&path, m, Some(&TrainingReport::default())).unwrap();
            let (back, report) = load_model(&path).unwrap();
            assert_eq!(&back, m);
            assert_eq!(report, Some(TrainingReport::default()));
            for j in 0..set.len() {
                let x = set.row(j);
                let (a, b) = match (m, &back) {
                    (Model::Direction(a), Model::Direction(b)) => (a.classifier.predict_row(x), b.classifier.predict_row(x)),
                    (Model::Causation(a), Model::Causation(b)) => (a.clf_causal.predict_row(x), b.clf_causal.predict_row(x)),
                    _ => unreachable!(),
                };
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_files() {
        let basis = sample_basis(10.0, 6, 9).unwrap();
        let set = toy(basis.digest());
        let gbm = Classifier::Gbm(train_gbm(&set, &GbmConfig { rounds: 2, ..GbmConfig::default() }).unwrap());
        let m = Model::Direction(DirectionModel::new(basis, gbm, true).unwrap());
        let json = model_to_json(&m, None).unwrap();
        assert!(matches!(model_from_json("{}"), Err(Error::ModelFormat(_))));
        let v2 = json.replace("\"version\":1", "\"version\":2");
        assert!(matches!(model_from_json(&v2), Err(Error::ModelFormat(_))));
        let reseeded = json.replace("\"seed\":9", "\"seed\":10");
        assert!(matches!(model_from_json(&reseeded), Err(Error::BasisMismatch { .. })));
    }
}
