//! Probabilistic binary classifiers over feature vectors.
//!
//! Everything here is deterministic in its configured seed. Rows are put in
//! canonical order (by id) before any random draw, so shuffling the
//! training rows does not change the fitted model.

mod cv;
mod forest;
mod gbm;
mod tree;

pub use cv::{cross_validate, default_grid, stratified_folds, CvResult};
pub use forest::{predict_forest, train_forest, train_forest_oob, ForestConfig, ForestModel};
pub use gbm::{logistic_gradient, logistic_loss, predict_gbm, sigmoid, train_gbm, GbmConfig, GbmModel};
pub use tree::{train_tree, TreeConfig};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rff::FeatureVector;

/// Feature rows with binary labels (1 = positive class).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    ids: Vec<String>,
    basis_digest: u64,
}

impl TrainingSet {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, ids: Vec<String>, basis_digest: u64) -> Result<Self> {
        if rows.len() != labels.len() || rows.len() != ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows, {} labels, {} ids",
                rows.len(),
                labels.len(),
                ids.len()
            )));
        }
        let n_features = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for (row, id) in rows.iter().zip(&ids) {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch(format!(
                    "row {id} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("features of {id}")));
            }
            features.extend_from_slice(row);
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::DuplicateId(dup.clone()));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            ids,
            basis_digest,
        })
    }

    /// Builds a set from featurized rows, checking they share one basis.
    pub fn from_vectors(vectors: &[FeatureVector], labels: Vec<u8>, ids: Vec<String>) -> Result<Self> {
        let digest = vectors.first().map_or(0, |v| v.basis_id);
        if let Some(v) = vectors.iter().find(|v| v.basis_id != digest) {
            return Err(Error::BasisMismatch {
                expected: digest,
                found: v.basis_id,
            });
        }
        Self::new(vectors.iter().map(|v| v.values.clone()).collect(), labels, ids, digest)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub(crate) fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn basis_digest(&self) -> u64 {
        self.basis_digest
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Row indices sorted by id.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.ids[a].cmp(&self.ids[b]));
        idx
    }

    /// The rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            basis_digest: self.basis_digest,
        }
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        let pos = self.positives();
        if self.is_empty() || pos == 0 || pos == self.len() {
            return Err(Error::DegenerateClasses(format!(
                "training data needs both classes ({pos} positive of {})",
                self.len()
            )));
        }
        Ok(())
    }
}

/// A node of a binary decision tree. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    #[serde(rename = "s")]
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// `value` is the class-1 fraction for classification trees and the
    /// additive output for boosting trees.
    #[serde(rename = "l")]
    Leaf { value: f64, count: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(value: f64, count: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf {
                value,
                count: count as u32,
            }],
        }
    }

    fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf { value, count } => Some((value, count)),
            Node::Split { .. } => None,
        })
    }
}

/// Midpoint between two consecutive distinct values, never equal to `hi`.
pub(crate) fn split_threshold(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

/// A trained binary classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Classifier {
    Forest(ForestModel),
    Gbm(GbmModel),
}

impl Classifier {
    pub fn basis_digest(&self) -> u64 {
        match self {
            Classifier::Forest(m) => m.basis_digest,
            Classifier::Gbm(m) => m.basis_digest,
        }
    }

    /// Probability of class 1 for a raw feature row.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Forest(m) => m.predict_row(x),
            Classifier::Gbm(m) => m.predict_row(x),
        }
    }

    pub fn predict(&self, f: &FeatureVector) -> Result<f64> {
        match self {
            Classifier::Forest(m) => predict_forest(m, f),
            Classifier::Gbm(m) => predict_gbm(m, f),
        }
    }
}

pub(crate) fn check_digest(expected: u64, found: u64) -> Result<()> {
    if expected != found {
        return Err(Error::BasisMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_set_validation() {
        let ok = TrainingSet::new(vec![vec![1.0], vec![2.0]], vec![0, 1], vec!["a".into(), "b".into()], 1);
        assert!(ok.is_ok());
        assert!(TrainingSet::new(vec![vec![1.0]], vec![0, 1], vec!["a".into()], 1).is_err());
        assert!(TrainingSet::new(vec![vec![f64::NAN]], vec![0], vec!["a".into()], 1).is_err());
        assert!(TrainingSet::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1], vec!["a".into(), "b".into()], 1).is_err());
        assert!(TrainingSet::new(vec![vec![1.0], vec![2.0]], vec![0, 1], vec!["a".into(), "a".into()], 1).is_err());
        let one_class = TrainingSet::new(vec![vec![1.0], vec![2.0]], vec![1, 1], vec!["a".into(), "b".into()], 1).unwrap();
        assert!(matches!(one_class.require_both_classes(), Err(Error::DegenerateClasses(_))));
    }

    #[test]
    fn threshold_stays_below_upper_value() {
        assert_eq!(split_threshold(1.0, 3.0), 2.0);
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = split_threshold(lo, hi);
        assert!(lo <= t && t < hi);
        let big = split_threshold(-f64::MAX, f64::MAX);
        assert!(big < f64::MAX);
    }

    #[test]
    fn tree_routing() {
        let t = DecisionTree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 0.2, count: 3 },
                Node::Leaf { value: 0.9, count: 4 },
            ],
        };
        assert_eq!(t.predict(&[9.0, 0.5]), 0.2);
        assert_eq!(t.predict(&[9.0, 0.6]), 0.9);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.leaves().count(), 2);
    }
}
