//! Stratified k-fold model selection for boosted models.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_gbm, GbmConfig, TrainingSet};
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::rng;

/// Per-config validation AUCs and the selected config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub grid: Vec<GbmConfig>,
    /// `fold_scores[c][f]`: AUC of config `c` on fold `f`.
    pub fold_scores: Vec<Vec<f64>>,
    pub mean_scores: Vec<f64>,
    pub best_index: usize,
    pub best: GbmConfig,
}

/// rounds {100, 300, 500} x depth {3, 5} x learning rate {0.05, 0.1}.
pub fn default_grid(seed: u64) -> Vec<GbmConfig> {
    let mut grid = Vec::new();
    for rounds in [100, 300, 500] {
        for max_depth in [3, 5] {
            for learning_rate in [0.05, 0.1] {
                grid.push(GbmConfig {
                    rounds,
                    max_depth,
                    learning_rate,
                    seed,
                    ..GbmConfig::default()
                });
            }
        }
    }
    grid
}

/// Fold index for every row. Each class is ordered by id, shuffled with a
/// seeded stream and dealt round-robin, so every fold gets both classes.
pub fn stratified_folds(data: &TrainingSet, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let order = data.canonical_order();
    let mut folds = vec![0; data.len()];
    for class in [0u8, 1] {
        let mut members: Vec<usize> = order.iter().copied().filter(|&i| data.labels()[i] == class).collect();
        if members.len() < k {
            return Err(Error::DegenerateClasses(format!(
                "class {class} has {} members, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng::stream(seed, u64::from(class)));
        for (pos, &i) in members.iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    Ok(folds)
}

/// Configs that differ only in `rounds` share a fit: a shorter run is a
/// prefix of a longer one.
fn group_key(c: &GbmConfig) -> (usize, u64, usize, u64, u64) {
    (c.max_depth, c.learning_rate.to_bits(), c.min_leaf_count, c.subsample.to_bits(), c.seed)
}

/// Scores each config by mean validation AUC over `k` stratified folds and
/// picks the best; ties go to fewer rounds, then shallower trees, then
/// larger leaves, then grid order.
pub fn cross_validate(data: &TrainingSet, grid: &[GbmConfig], k: usize, seed: u64) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    if data.len() < k {
        return Err(Error::InvalidConfig(format!("{} rows for {k} folds", data.len())));
    }
    for c in grid {
        c.validate()?;
    }
    let folds = stratified_folds(data, k, seed)?;

    let mut groups: BTreeMap<_, Vec<usize>> = BTreeMap::new();
    for (i, c) in grid.iter().enumerate() {
        groups.entry(group_key(c)).or_default().push(i);
    }
    let jobs: Vec<(Vec<usize>, usize)> = groups
        .into_values()
        .flat_map(|members| (0..k).map(move |f| (members.clone(), f)))
        .collect();

    let results = jobs
        .par_iter()
        .map(|(members, fold)| -> Result<Vec<(usize, usize, f64)>> {
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != *fold).collect();
            let val_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == *fold).collect();
            let longest = members.iter().map(|&c| grid[c].rounds).max().unwrap_or(0);
            let cfg = GbmConfig {
                rounds: longest,
                ..grid[members[0]].clone()
            };
            let model = train_gbm(&data.subset(&train_idx), &cfg)?;
            let positives: Vec<bool> = val_idx.iter().map(|&i| data.labels()[i] == 1).collect();
            members
                .iter()
                .map(|&c| {
                    let scores: Vec<f64> = val_idx
                        .iter()
                        .map(|&i| model.logit_at(data.row(i), grid[c].rounds))
                        .collect();
                    Ok((c, *fold, roc_auc(&scores, &positives)?))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut fold_scores = vec![vec![0.0; k]; grid.len()];
    for (c, f, auc) in results.into_iter().flatten() {
        fold_scores[c][f] = auc;
    }
    let mean_scores: Vec<f64> = fold_scores
        .iter()
        .map(|s| s.iter().sum::<f64>() / k as f64)
        .collect();
    let best_index = (0..grid.len())
        .min_by(|&a, &b| {
            let (ca, cb) = (&grid[a], &grid[b]);
            mean_scores[b]
                .total_cmp(&mean_scores[a])
                .then(ca.rounds.cmp(&cb.rounds))
                .then(ca.max_depth.cmp(&cb.max_depth))
                .then(cb.min_leaf_count.cmp(&ca.min_leaf_count))
                .then(a.cmp(&b))
        })
        .expect("grid is non-empty");
    Ok(CvResult {
        k,
        grid: grid.to_vec(),
        fold_scores,
        mean_scores,
        best_index,
        best: grid[best_index].clone(),
    })
}
