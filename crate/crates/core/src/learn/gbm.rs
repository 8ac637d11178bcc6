//! Gradient boosting with the logistic loss.
//!
//! Round `t` fits a depth-limited least-squares regression tree to the
//! residuals `y - sigmoid(F)` and replaces each leaf's mean by one Newton
//! step `sum(r) / sum(p (1 - p))`, clamped to `[-4, 4]`. Trees are grown
//! level by level over feature orders sorted once per fit, so each level
//! costs one pass over every feature column.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{check_digest, split_threshold, DecisionTree, Node, TrainingSet};
use crate::error::{Error, Result};
use crate::rff::FeatureVector;
use crate::rng;

const LEAF_CLAMP: f64 = 4.0;
const NO_NODE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf_count: usize,
    /// Fraction of rows, drawn without replacement, used by each round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            rounds: 300,
            max_depth: 3,
            learning_rate: 0.1,
            min_leaf_count: 5,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.max_depth == 0 {
            return bad("max_depth must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must lie in (0, 1], got {}", self.learning_rate));
        }
        if self.min_leaf_count == 0 {
            return bad("min_leaf_count must be positive".into());
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample must lie in (0, 1], got {}", self.subsample));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub prior_logodds: f64,
    pub trees: Vec<DecisionTree>,
    pub learning_rate: f64,
    pub config: GbmConfig,
    pub basis_digest: u64,
    pub n_features: usize,
}

pub fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

/// `log(1 + e^f) - y f`, the negative log-likelihood of label `y`.
pub fn logistic_loss(f: f64, y: f64) -> f64 {
    f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f
}

/// Derivative of [`logistic_loss`] with respect to `f`.
pub fn logistic_gradient(f: f64, y: f64) -> f64 {
    sigmoid(f) - y
}

impl GbmModel {
    /// Raw score after the first `rounds` trees.
    pub fn logit_at(&self, x: &[f64], rounds: usize) -> f64 {
        let mut f = self.prior_logodds;
        for t in self.trees.iter().take(rounds) {
            f += self.learning_rate * t.predict(x);
        }
        f
    }

    pub fn proba_at(&self, x: &[f64], rounds: usize) -> f64 {
        // sigmoid(+-36) is still strictly inside (0, 1) in f64.
        sigmoid(self.logit_at(x, rounds).clamp(-36.0, 36.0))
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.proba_at(x, self.trees.len())
    }
}

pub fn predict_gbm(model: &GbmModel, f: &FeatureVector) -> Result<f64> {
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

#[derive(Clone, Copy, Default)]
struct Stats {
    count: usize,
    sum_r: f64,
    sum_h: f64,
}

#[derive(Clone, Copy)]
struct Scan {
    left: usize,
    left_r: f64,
    last: f64,
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Scan {
    fn new() -> Self {
        Self {
            left: 0,
            left_r: 0.0,
            last: f64::NEG_INFINITY,
            gain: 0.0,
            feature: usize::MAX,
            threshold: 0.0,
        }
    }
}

fn leaf_value(s: &Stats) -> f64 {
    if s.sum_h > 0.0 {
        (s.sum_r / s.sum_h).clamp(-LEAF_CLAMP, LEAF_CLAMP)
    } else {
        0.0
    }
}

struct Grower<'a> {
    data: &'a TrainingSet,
    sorted: &'a [Vec<u32>],
    cfg: &'a GbmConfig,
}

impl Grower<'_> {
    /// One regression tree on the rows with `node_of[i] == 0`.
    fn grow(&self, resid: &[f64], hess: &[f64], mut node_of: Vec<u32>) -> DecisionTree {
        let min_leaf = self.cfg.min_leaf_count;
        let mut nodes = vec![Node::Leaf { value: 0.0, count: 0 }];
        let mut stats = vec![Stats::default()];
        for (i, &s) in node_of.iter().enumerate() {
            if s != NO_NODE {
                let st = &mut stats[s as usize];
                st.count += 1;
                st.sum_r += resid[i];
                st.sum_h += hess[i];
            }
        }
        let mut active: Vec<u32> = vec![0];
        for _ in 0..self.cfg.max_depth {
            let eligible: Vec<bool> = (0..nodes.len())
                .map(|s| active.contains(&(s as u32)) && stats[s].count >= 2 * min_leaf)
                .collect();
            if !eligible.iter().any(|&e| e) {
                break;
            }
            let mut scans = vec![Scan::new(); nodes.len()];
            let mut best = vec![Scan::new(); nodes.len()];
            for (f, order) in self.sorted.iter().enumerate() {
                // Carry the best split so far; restart the running sums.
                for &s in &active {
                    scans[s as usize] = Scan {
                        left: 0,
                        left_r: 0.0,
                        last: f64::NEG_INFINITY,
                        ..best[s as usize]
                    };
                }
                for &i in order {
                    let i = i as usize;
                    let s = node_of[i];
                    if s == NO_NODE || !eligible[s as usize] {
                        continue;
                    }
                    let total = stats[s as usize];
                    let v = self.data.value(i, f);
                    let sc = &mut scans[s as usize];
                    if sc.left >= min_leaf && total.count - sc.left >= min_leaf && v > sc.last {
                        let nl = sc.left as f64;
                        let nr = (total.count - sc.left) as f64;
                        let rr = total.sum_r - sc.left_r;
                        let gain = sc.left_r * sc.left_r / nl + rr * rr / nr
                            - total.sum_r * total.sum_r / total.count as f64;
                        if gain > sc.gain {
                            sc.gain = gain;
                            sc.feature = f;
                            sc.threshold = split_threshold(sc.last, v);
                        }
                    }
                    sc.left += 1;
                    sc.left_r += resid[i];
                    sc.last = v;
                }
                for &s in &active {
                    best[s as usize] = scans[s as usize];
                }
            }

            // Turn winning nodes into splits and route their rows.
            let mut next = Vec::new();
            let mut children = vec![(NO_NODE, NO_NODE); nodes.len()];
            for &s in &active {
                let b = best[s as usize];
                if !(eligible[s as usize] && b.feature != usize::MAX && b.gain > 1e-12) {
                    continue;
                }
                let l = nodes.len() as u32;
                nodes.push(Node::Leaf { value: 0.0, count: 0 });
                nodes.push(Node::Leaf { value: 0.0, count: 0 });
                stats.push(Stats::default());
                stats.push(Stats::default());
                nodes[s as usize] = Node::Split {
                    feature: b.feature as u32,
                    threshold: b.threshold,
                    left: l,
                    right: l + 1,
                };
                children[s as usize] = (l, l + 1);
                next.push(l);
                next.push(l + 1);
            }
            if next.is_empty() {
                break;
            }
            for (i, slot) in node_of.iter_mut().enumerate() {
                let s = *slot;
                if s == NO_NODE || (s as usize) >= children.len() {
                    continue;
                }
                let (l, r) = children[s as usize];
                if l == NO_NODE {
                    continue;
                }
                let Node::Split { feature, threshold, .. } = nodes[s as usize] else {
                    unreachable!("children are only recorded for splits")
                };
                let c = if self.data.value(i, feature as usize) <= threshold { l } else { r };
                *slot = c;
                let st = &mut stats[c as usize];
                st.count += 1;
                st.sum_r += resid[i];
                st.sum_h += hess[i];
            }
            active = next;
        }
        for (s, node) in nodes.iter_mut().enumerate() {
            if let Node::Leaf { value, count } = node {
                *value = leaf_value(&stats[s]);
                *count = stats[s].count as u32;
            }
        }
        DecisionTree { nodes }
    }
}

/// Fits a boosted model. Rows are reordered canonically by id first.
pub fn train_gbm(data: &TrainingSet, cfg: &GbmConfig) -> Result<GbmModel> {
    cfg.validate()?;
    data.require_both_classes()?;
    let canon = data.subset(&data.canonical_order());
    let n = canon.len();
    let m = canon.n_features();
    let sorted: Vec<Vec<u32>> = (0..m)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                canon
                    .value(a as usize, f)
                    .total_cmp(&canon.value(b as usize, f))
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();
    let y: Vec<f64> = canon.labels().iter().map(|&l| f64::from(l)).collect();
    let pos = canon.positives() as f64;
    let prior = (pos / (n as f64 - pos)).ln();
    let mut logits = vec![prior; n];
    let grower = Grower {
        data: &canon,
        sorted: &sorted,
        cfg,
    };
    let mut trees = Vec::with_capacity(cfg.rounds);
    let bag = ((cfg.subsample * n as f64).ceil() as usize).clamp(1, n);
    for round in 0..cfg.rounds {
        let p: Vec<f64> = logits.iter().map(|&f| sigmoid(f)).collect();
        let resid: Vec<f64> = y.iter().zip(&p).map(|(y, p)| y - p).collect();
        let hess: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let node_of = if bag < n {
            let mut r = rng::stream(cfg.seed, round as u64);
            let mut v = vec![NO_NODE; n];
            for i in index::sample(&mut r, n, bag).into_iter() {
                v[i] = 0;
            }
            v
        } else {
            vec![0; n]
        };
        let tree = grower.grow(&resid, &hess, node_of);
        for (i, f) in logits.iter_mut().enumerate() {
            *f += cfg.learning_rate * tree.predict(canon.row(i));
        }
        trees.push(tree);
    }
    Ok(GbmModel {
        prior_logodds: prior,
        trees,
        learning_rate: cfg.learning_rate,
        config: cfg.clone(),
        basis_digest: data.basis_digest(),
        n_features: m,
    })
}
