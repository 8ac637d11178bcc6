//! Pair-level inference: direction probabilities, the two-classifier
//! causation score and the IGCI slope baseline.

use serde::{Deserialize, Serialize};

use crate::data::{CausalLabel, CausalPair};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::learn::{
    cross_validate, train_forest, train_gbm, Classifier, CvResult, ForestConfig, GbmConfig, TrainingSet,
};
use crate::rff::{featurize, FeatureVector, RffBasis};

/// Direction classifier: class 1 means X causes Y.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionModel {
    pub basis: RffBasis,
    pub classifier: Classifier,
    pub standardize: bool,
}

/// Causal-vs-non-causal classifier combined with a direction classifier
/// trained on causal pairs only.
#[derive(Clone, Debug, PartialEq)]
pub struct CausationModel {
    pub basis: RffBasis,
    pub clf_causal: Classifier,
    pub clf_direction: Classifier,
    pub standardize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausationScore {
    pub score: f64,
    pub p1: f64,
    pub p2: f64,
}

impl CausationScore {
    /// `score = p1 (2 p2 - 1)`.
    pub fn from_probabilities(p1: f64, p2: f64) -> Self {
        Self {
            score: p1 * (2.0 * p2 - 1.0),
            p1,
            p2,
        }
    }
}

fn check_basis(basis: &RffBasis, clf: &Classifier) -> Result<()> {
    if clf.basis_digest() != basis.digest() {
        return Err(Error::BasisMismatch {
            expected: basis.digest(),
            found: clf.basis_digest(),
        });
    }
    Ok(())
}

impl DirectionModel {
    pub fn new(basis: RffBasis, classifier: Classifier, standardize: bool) -> Result<Self> {
        check_basis(&basis, &classifier)?;
        Ok(Self {
            basis,
            classifier,
            standardize,
        })
    }
}

impl CausationModel {
    pub fn new(basis: RffBasis, clf_causal: Classifier, clf_direction: Classifier, standardize: bool) -> Result<Self> {
        check_basis(&basis, &clf_causal)?;
        check_basis(&basis, &clf_direction)?;
        Ok(Self {
            basis,
            clf_causal,
            clf_direction,
            standardize,
        })
    }
}

/// Probability that X causes Y and the confidence `max(p, 1 - p)`.
pub fn predict_direction(m: &DirectionModel, p: &CausalPair) -> Result<(f64, f64)> {
    let f = featurize(p, &m.basis, m.standardize)?;
    let prob = m.classifier.predict(&f)?;
    Ok((prob, prob.max(1.0 - prob)))
}

pub fn causation_coefficient(m: &CausationModel, p: &CausalPair) -> Result<CausationScore> {
    let f = featurize(p, &m.basis, m.standardize)?;
    causation_from_features(m, &f)
}

pub fn causation_from_features(m: &CausationModel, f: &FeatureVector) -> Result<CausationScore> {
    let p1 = m.clf_causal.predict(f)?;
    let p2 = m.clf_direction.predict(f)?;
    Ok(CausationScore::from_probabilities(p1, p2))
}

/// Either trained model, scored uniformly.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Direction(DirectionModel),
    Causation(CausationModel),
}

/// One row of a score file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub id: String,
    pub score: f64,
    pub p1: f64,
    pub p2: f64,
    pub confidence: f64,
}

impl ScoredPair {
    /// X->Y when `p2 >= 0.5`, else Y->X.
    pub fn predicted_direction(&self) -> CausalLabel {
        if self.p2 >= 0.5 {
            CausalLabel::XcausesY
        } else {
            CausalLabel::YcausesX
        }
    }
}

impl Model {
    pub fn basis(&self) -> &RffBasis {
        match self {
            Model::Direction(m) => &m.basis,
            Model::Causation(m) => &m.basis,
        }
    }

    pub fn standardize(&self) -> bool {
        match self {
            Model::Direction(m) => m.standardize,
            Model::Causation(m) => m.standardize,
        }
    }

    /// A direction model reports `p1 = 1`, `p2 = P(X->Y)` and
    /// `score = 2 p2 - 1`; a causation model reports its coefficient with
    /// confidence `(1 + |score|) / 2`.
    pub fn score_features(&self, id: &str, f: &FeatureVector) -> Result<ScoredPair> {
        let (s, confidence) = match self {
            Model::Direction(m) => {
                let p = m.classifier.predict(f)?;
                (CausationScore::from_probabilities(1.0, p), p.max(1.0 - p))
            }
            Model::Causation(m) => {
                let s = causation_from_features(m, f)?;
                (s, 0.5 + 0.5 * s.score.abs())
            }
        };
        Ok(ScoredPair {
            id: id.to_string(),
            score: s.score,
            p1: s.p1,
            p2: s.p2,
            confidence,
        })
    }

    pub fn score_pair(&self, p: &CausalPair) -> Result<ScoredPair> {
        let f = featurize(p, self.basis(), self.standardize())?;
        self.score_features(p.id(), &f)
    }
}

/// How to fit a binary classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Forest(ForestConfig),
    Gbm(GbmConfig),
    /// Pick a boosted config by stratified k-fold CV, then refit on all rows.
    GbmCv {
        grid: Vec<GbmConfig>,
        folds: usize,
        seed: u64,
    },
}

pub fn fit_classifier(set: &TrainingSet, spec: &ClassifierSpec) -> Result<(Classifier, Option<CvResult>)> {
    match spec {
        ClassifierSpec::Forest(c) => Ok((Classifier::Forest(train_forest(set, c)?), None)),
        ClassifierSpec::Gbm(c) => Ok((Classifier::Gbm(train_gbm(set, c)?), None)),
        ClassifierSpec::GbmCv { grid, folds, seed } => {
            let cv = cross_validate(set, grid, *folds, *seed)?;
            let model = train_gbm(set, &cv.best)?;
            Ok((Classifier::Gbm(model), Some(cv)))
        }
    }
}

fn binary_set(fm: &FeatureMatrix, label_of: impl Fn(CausalLabel) -> Option<u8>) -> Result<TrainingSet> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for r in &fm.rows {
        if let Some(y) = r.label.and_then(&label_of) {
            rows.push(r.values.clone());
            labels.push(y);
            ids.push(r.id.clone());
        }
    }
    TrainingSet::new(rows, labels, ids, fm.digest())
}

/// Rows labelled X->Y (class 1) and Y->X (class 0).
pub fn direction_training_set(fm: &FeatureMatrix) -> Result<TrainingSet> {
    binary_set(fm, |l| match l {
        CausalLabel::XcausesY => Some(1),
        CausalLabel::YcausesX => Some(0),
        CausalLabel::NonCausal => None,
    })
}

/// All labelled rows; class 1 is causal in either direction.
pub fn causal_training_set(fm: &FeatureMatrix) -> Result<TrainingSet> {
    binary_set(fm, |l| Some(u8::from(l.is_causal())))
}

/// Training diagnostics stored next to a model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub n_rows: Vec<usize>,
    pub cv: Vec<CvResult>,
}

fn check_matrix(fm: &FeatureMatrix, basis: &RffBasis) -> Result<()> {
    if fm.digest() != basis.digest() {
        return Err(Error::BasisMismatch {
            expected: basis.digest(),
            found: fm.digest(),
        });
    }
    Ok(())
}

pub fn train_direction_model(
    fm: &FeatureMatrix,
    basis: &RffBasis,
    spec: &ClassifierSpec,
) -> Result<(DirectionModel, TrainingReport)> {
    check_matrix(fm, basis)?;
    let set = direction_training_set(fm)?;
    let (clf, cv) = fit_classifier(&set, spec)?;
    let report = TrainingReport {
        n_rows: vec![set.len()],
        cv: cv.into_iter().collect(),
    };
    Ok((DirectionModel::new(basis.clone(), clf, fm.standardized)?, report))
}

pub fn train_causation_model(
    fm: &FeatureMatrix,
    basis: &RffBasis,
    spec: &ClassifierSpec,
) -> Result<(CausationModel, TrainingReport)> {
    check_matrix(fm, basis)?;
    let causal_set = causal_training_set(fm)?;
    let direction_set = direction_training_set(fm)?;
    let (clf_causal, cv1) = fit_classifier(&causal_set, spec)?;
    let (clf_direction, cv2) = fit_classifier(&direction_set, spec)?;
    let report = TrainingReport {
        n_rows: vec![causal_set.len(), direction_set.len()],
        cv: cv1.into_iter().chain(cv2).collect(),
    };
    Ok((
        CausationModel::new(basis.clone(), clf_causal, clf_direction, fm.standardized)?,
        report,
    ))
}

/// IGCI verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IgciVerdict {
    XtoY,
    YtoX,
    Abstain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgciDecision {
    pub value: IgciVerdict,
    pub s_xy: f64,
    pub s_yx: f64,
}

fn distinct(v: &[f64]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s.dedup();
    s.len()
}

fn unit_rescale(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|&a| (a - lo) / (hi - lo)).collect()
}

/// Mean of `log |db / da|` over consecutive steps of the rows sorted by
/// `(a, b)`, skipping steps where either coordinate is unchanged.
fn slope_score(a: &[f64], b: &[f64]) -> Result<f64> {
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let mut sum = 0.0;
    let mut used = 0usize;
    for w in idx.windows(2) {
        let da = a[w[1]] - a[w[0]];
        let db = b[w[1]] - b[w[0]];
        if da > 0.0 && db != 0.0 {
            sum += (db / da).abs().ln();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::IgciUndefined("no usable slope steps".into()));
    }
    Ok(sum / used as f64)
}

/// Slope-based IGCI estimates `(s_xy, s_yx)` with a uniform reference
/// measure: both variables are rescaled to `[0, 1]` first.
pub fn igci_slope_score(p: &CausalPair) -> Result<(f64, f64)> {
    for (name, v) in [("x", p.x()), ("y", p.y())] {
        let d = distinct(v);
        if d < 3 {
            return Err(Error::IgciUndefined(format!("{name} has {d} distinct values, need 3")));
        }
    }
    let x = unit_rescale(p.x());
    let y = unit_rescale(p.y());
    Ok((slope_score(&x, &y)?, slope_score(&y, &x)?))
}

/// X->Y when `s_xy < s_yx - margin`, Y->X when `s_yx < s_xy - margin`,
/// otherwise abstain.
pub fn igci_decide(p: &CausalPair, margin: f64) -> Result<IgciDecision> {
    let (s_xy, s_yx) = igci_slope_score(p)?;
    let value = if s_xy < s_yx - margin {
        IgciVerdict::XtoY
    } else if s_yx < s_xy - margin {
        IgciVerdict::YtoX
    } else {
        IgciVerdict::Abstain
    };
    Ok(IgciDecision { value, s_xy, s_yx })
}
