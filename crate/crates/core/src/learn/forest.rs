//! Random forests: bagged CART trees with per-node feature subsampling.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_digest, train_tree, DecisionTree, TrainingSet, TreeConfig};
use crate::error::{Error, Result};
use crate::rff::FeatureVector;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Each leaf holds at least `ceil(min_leaf_fraction * n)` rows.
    pub min_leaf_fraction: f64,
    /// Defaults to `ceil(sqrt(m))` when unset.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            min_leaf_fraction: 0.01,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be positive".into()));
        }
        if !(self.min_leaf_fraction > 0.0 && self.min_leaf_fraction < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "min_leaf_fraction must lie in (0, 0.5), got {}",
                self.min_leaf_fraction
            )));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::InvalidConfig("features_per_split must be positive".into()));
        }
        Ok(())
    }

    pub fn min_leaf(&self, n: usize) -> usize {
        // Slack absorbs representation error, e.g. 0.01 * 4000.
        ((self.min_leaf_fraction * n as f64 - 1e-9).ceil() as usize).max(1)
    }

    pub fn features_per_split(&self, m: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (m as f64).sqrt().ceil() as usize)
            .clamp(1, m.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub config: ForestConfig,
    pub basis_digest: u64,
    pub n_features: usize,
}

impl ForestModel {
    /// Mean over trees of the leaf class-1 fractions.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }
}

pub fn predict_forest(model: &ForestModel, f: &FeatureVector) -> Result<f64> {
    check_digest(model.basis_digest, f.basis_id)?;
    if f.values.len() != model.n_features {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, got {}",
            model.n_features,
            f.values.len()
        )));
    }
    Ok(model.predict_row(&f.values))
}

/// Trains the forest and also returns out-of-bag class-1 probabilities
/// (`None` for rows that landed in every bag), in the input row order.
pub fn train_forest_oob(data: &TrainingSet, cfg: &ForestConfig) -> Result<(ForestModel, Vec<Option<f64>>)> {
    cfg.validate()?;
    data.require_both_classes()?;
    let n = data.len();
    let order = data.canonical_order();
    let tree_cfg = TreeConfig {
        min_leaf: cfg.min_leaf(n),
        features_per_split: cfg.features_per_split(data.n_features()),
        max_depth: None,
    };
    let fitted = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| -> Result<(DecisionTree, Vec<bool>)> {
            let mut r = rng::stream(cfg.seed, t as u64);
            let mut in_bag = vec![!cfg.bootstrap; n];
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n)
                    .map(|_| {
                        let row = order[r.random_range(0..n)];
                        in_bag[row] = true;
                        row
                    })
                    .collect()
            } else {
                order.clone()
            };
            Ok((train_tree(data, &rows, &tree_cfg, &mut r)?, in_bag))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0usize; n];
    for (tree, in_bag) in &fitted {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            oob_sum[i] += tree.predict(data.row(i));
            oob_count[i] += 1;
        }
    }
    let oob = oob_sum
        .iter()
        .zip(&oob_count)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let model = ForestModel {
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
        config: cfg.clone(),
        basis_digest: data.basis_digest(),
        n_features: data.n_features(),
    };
    Ok((model, oob))
}

pub fn train_forest(data: &TrainingSet, cfg: &ForestConfig) -> Result<ForestModel> {
    train_forest_oob(data, cfg).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn linear_toy(n: usize, seed: u64) -> TrainingSet {
        let mut r = rng_from_seed(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        while rows.len() < n {
            let v: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
            let s = v[0] + 0.5 * v[1] - 0.8 * v[2];
            // Margin so the separator is unambiguous.
            if s.abs() < 0.1 {
                continue;
            }
            labels.push(u8::from(s > 0.0));
            rows.push(v);
        }
        let ids = (0..n).map(|i| format!("t{i:05}")).collect();
        TrainingSet::new(rows, labels, ids, 42).unwrap()
    }

    #[test]
    fn defaults_follow_recipe() {
        let c = ForestConfig::default();
        assert_eq!(c.n_trees, 500);
        assert_eq!(c.min_leaf(4000), 40);
        assert_eq!(c.min_leaf(1000), 10);
        assert_eq!(c.min_leaf(150), 2);
        assert_eq!(c.features_per_split(300), 18);
        assert!(ForestConfig { min_leaf_fraction: 0.5, ..c.clone() }.validate().is_err());
        assert!(ForestConfig { n_trees: 0, ..c }.validate().is_err());
    }

    #[test]
    fn single_unbagged_tree_equals_train_tree() {
        let d = linear_toy(200, 1);
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            seed: 9,
            ..ForestConfig::default()
        };
        let f = train_forest(&d, &cfg).unwrap();
        assert_eq!(f.trees.len(), 1);
        let tc = TreeConfig {
            min_leaf: cfg.min_leaf(200),
            features_per_split: cfg.features_per_split(5),
            max_depth: None,
        };
        let t = train_tree(&d, &d.canonical_order(), &tc, &mut rng::stream(9, 0)).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn oob_accuracy_on_separable_data() {
        let d = linear_toy(600, 2);
        let cfg = ForestConfig {
            n_trees: 100,
            seed: 3,
            ..ForestConfig::default()
        };
        let (model, oob) = train_forest_oob(&d, &cfg).unwrap();
        assert_eq!(model.trees.len(), 100);
        let judged: Vec<(f64, u8)> = oob
            .iter()
            .zip(d.labels())
            .filter_map(|(p, &l)| p.map(|p| (p, l)))
            .collect();
        let acc = judged.iter().filter(|(p, l)| u8::from(*p > 0.5) == *l).count() as f64 / judged.len() as f64;
        assert!(acc >= 0.95, "oob accuracy {acc}");
        for (_, c) in model.trees.iter().flat_map(|t| t.leaves()) {
            assert!(c as usize >= cfg.min_leaf(600));
        }
    }

    #[test]
    fn predictions_ignore_row_order() {
        let d = linear_toy(150, 4);
        let cfg = ForestConfig {
            n_trees: 20,
            seed: 5,
            ..ForestConfig::default()
        };
        let a = train_forest(&d, &cfg).unwrap();
        let mut perm: Vec<usize> = (0..d.len()).collect();
        perm.reverse();
        perm.rotate_left(37);
        let b = train_forest(&d.subset(&perm), &cfg).unwrap();
        for i in 0..d.len() {
            assert_eq!(a.predict_row(d.row(i)), b.predict_row(d.row(i)));
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let d = linear_toy(150, 6);
        let cfg = ForestConfig {
            n_trees: 16,
            seed: 7,
            ..ForestConfig::default()
        };
        let p1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let p4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = p1.install(|| train_forest(&d, &cfg)).unwrap();
        let b = p4.install(|| train_forest(&d, &cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prediction_contract() {
        let d = linear_toy(100, 8);
        let model = train_forest(&d, &ForestConfig { n_trees: 10, ..ForestConfig::default() }).unwrap();
        let ok = FeatureVector { values: d.row(0).to_vec(), basis_id: 42 };
        let p = predict_forest(&model, &ok).unwrap();
        assert!((0.0..=1.0).contains(&p));
        let wrong = FeatureVector { values: d.row(0).to_vec(), basis_id: 41 };
        assert!(matches!(predict_forest(&model, &wrong), Err(Error::BasisMismatch { .. })));
        let single = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![1, 1], vec!["a".into(), "b".into()], 0).unwrap();
        assert!(matches!(train_forest(&single, &ForestConfig::default()), Err(Error::DegenerateClasses(_))));
    }

    #[test]
    fn averages_leaf_fractions() {
        let m = ForestModel {
            trees: vec![DecisionTree::leaf(0.2, 1), DecisionTree::leaf(0.6, 1)],
            config: ForestConfig::default(),
            basis_digest: 0,
            n_features: 1,
        };
        assert!((m.predict_row(&[0.0]) - 0.4).abs() < 1e-15);
        let pure = ForestModel {
            trees: vec![DecisionTree::leaf(1.0, 1); 3],
            ..m
        };
        assert_eq!(pure.predict_row(&[0.0]), 1.0);
    }
}
