//! CART classification trees with Gini impurity.

use rand::seq::index;

use super::{split_threshold, DecisionTree, Node, TrainingSet};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeConfig {
    /// Minimum number of (possibly repeated) rows in each leaf.
    pub min_leaf: usize,
    /// Features sampled without replacement at each node.
    pub features_per_split: usize,
    pub max_depth: Option<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Sum over children of `c1 (n - c1) / n`, half the size-weighted Gini impurity.
#[inline]
fn impurity(c1: f64, n: f64) -> f64 {
    c1 * (n - c1) / n
}

fn best_split(
    data: &TrainingSet,
    rows: &[usize],
    c1: usize,
    cfg: &TreeConfig,
    rng: &mut Rng,
    buf: &mut Vec<(f64, u8)>,
) -> Option<Split> {
    let n = rows.len();
    let m = data.n_features();
    let k = cfg.features_per_split.clamp(1, m);
    let parent = impurity(c1 as f64, n as f64);
    let mut best: Option<Split> = None;
    for f in index::sample(rng, m, k).into_iter() {
        buf.clear();
        buf.extend(rows.iter().map(|&r| (data.value(r, f), data.labels()[r])));
        buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left1 = 0usize;
        for i in 0..n - 1 {
            left1 += usize::from(buf[i].1);
            let nl = i + 1;
            if nl < cfg.min_leaf {
                continue;
            }
            if n - nl < cfg.min_leaf {
                break;
            }
            if buf[i].0 == buf[i + 1].0 {
                continue;
            }
            let score = impurity(left1 as f64, nl as f64)
                + impurity((c1 - left1) as f64, (n - nl) as f64);
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Split {
                    feature: f,
                    threshold: split_threshold(buf[i].0, buf[i + 1].0),
                    score,
                });
            }
        }
    }
    // Gain in mean Gini impurity: 2 (parent - score) / n.
    best.filter(|b| 2.0 * (parent - b.score) / n as f64 > 1e-12)
}

/// Grows a tree greedily on `rows` (indices into `data`, repeats allowed).
/// Leaves store the fraction of class-1 rows that reached them.
pub fn train_tree(data: &TrainingSet, rows: &[usize], cfg: &TreeConfig, rng: &mut Rng) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    if data.n_features() == 0 {
        return Err(Error::DimensionMismatch("training set has no features".into()));
    }
    let min_leaf = cfg.min_leaf.max(1);
    let cfg = TreeConfig {
        min_leaf,
        ..cfg.clone()
    };
    let labels = data.labels();
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0, count: 0 }];
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, rows.to_vec(), 0)];
    let mut buf = Vec::with_capacity(rows.len());
    while let Some((slot, node_rows, depth)) = stack.pop() {
        let n = node_rows.len();
        let c1 = node_rows.iter().filter(|&&r| labels[r] == 1).count();
        let leaf = Node::Leaf {
            value: c1 as f64 / n as f64,
            count: n as u32,
        };
        let can_split = n >= 2 * min_leaf
            && c1 != 0
            && c1 != n
            && cfg.max_depth.is_none_or(|d| depth < d);
        let split = if can_split {
            best_split(data, &node_rows, c1, &cfg, rng, &mut buf)
        } else {
            None
        };
        let Some(split) = split else {
            nodes[slot] = leaf;
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = node_rows
            .iter()
            .partition(|&&r| data.value(r, split.feature) <= split.threshold);
        let li = nodes.len();
        nodes.push(Node::Leaf { value: 0.0, count: 0 });
        nodes.push(Node::Leaf { value: 0.0, count: 0 });
        nodes[slot] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: li as u32,
            right: (li + 1) as u32,
        };
        stack.push((li + 1, right, depth + 1));
        stack.push((li, left, depth + 1));
    }
    Ok(DecisionTree { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn set(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> TrainingSet {
        let ids = (0..rows.len()).map(|i| format!("r{i:04}")).collect();
        TrainingSet::new(rows, labels, ids, 0).unwrap()
    }

    fn cfg(min_leaf: usize, k: usize) -> TreeConfig {
        TreeConfig {
            min_leaf,
            features_per_split: k,
            max_depth: None,
        }
    }

    /// Every leaf honours `min_leaf` and routing reaches the counted leaf.
    fn check_leaf_counts(t: &DecisionTree, min_leaf: usize) {
        for (_, count) in t.leaves() {
            assert!(count as usize >= min_leaf);
        }
    }

    #[test]
    fn pure_data_is_a_single_leaf() {
        let d = set(vec![vec![1.0], vec![2.0], vec![3.0]], vec![1, 1, 1]);
        let t = train_tree(&d, &[0, 1, 2], &cfg(1, 1), &mut rng_from_seed(0)).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { value: 1.0, count: 3 }]);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn separates_threshold_data() {
        let mut r = rng_from_seed(1);
        let xs: Vec<f64> = (0..200).map(|_| r.random_range(-1.0..1.0)).collect();
        let labels: Vec<u8> = xs.iter().map(|&x| u8::from(x > 0.0)).collect();
        // Oracle: a single threshold separates the classes.
        let max_neg = xs.iter().copied().filter(|&x| x <= 0.0).fold(f64::MIN, f64::max);
        let min_pos = xs.iter().copied().filter(|&x| x > 0.0).fold(f64::MAX, f64::min);
        assert!(max_neg < min_pos);
        let d = set(xs.iter().map(|&x| vec![x]).collect(), labels.clone());
        let rows: Vec<usize> = (0..200).collect();
        let t = train_tree(&d, &rows, &cfg(1, 1), &mut r).unwrap();
        let correct = (0..200)
            .filter(|&i| u8::from(t.predict(d.row(i)) > 0.5) == labels[i])
            .count();
        assert_eq!(correct, 200);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn half_leaf_constraint_forces_root_leaf() {
        let mut r = rng_from_seed(2);
        let n = 101;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random(), r.random()]).collect();
        let labels: Vec<u8> = rows.iter().map(|v| u8::from(v[0] > 0.5)).collect();
        let d = set(rows, labels);
        let min_leaf = (0.5 * n as f64).ceil() as usize;
        let idx: Vec<usize> = (0..n).collect();
        let t = train_tree(&d, &idx, &cfg(min_leaf, 2), &mut r).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn leaves_respect_min_leaf_and_paths_are_consistent() {
        let mut r = rng_from_seed(3);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| r.random()).collect()).collect();
        let labels: Vec<u8> = rows.iter().map(|v| u8::from(v[0] + v[1] * v[2] > 0.7)).collect();
        let d = set(rows, labels);
        let idx: Vec<usize> = (0..300).collect();
        let t = train_tree(&d, &idx, &cfg(7, 2), &mut r).unwrap();
        check_leaf_counts(&t, 7);
        // Counts stored at leaves match the rows routed there.
        let mut routed = vec![0u32; t.nodes.len()];
        for i in 0..300 {
            routed[t.leaf_index(d.row(i))] += 1;
        }
        for (i, node) in t.nodes.iter().enumerate() {
            if let Node::Leaf { count, .. } = node {
                assert_eq!(routed[i], *count);
            }
        }
    }

    #[test]
    fn depth_limit_and_empty_rows() {
        let d = set((0..50).map(|i| vec![i as f64]).collect(), (0..50).map(|i| (i % 2) as u8).collect());
        let idx: Vec<usize> = (0..50).collect();
        let mut c = cfg(1, 1);
        c.max_depth = Some(2);
        let t = train_tree(&d, &idx, &c, &mut rng_from_seed(4)).unwrap();
        assert!(t.depth() <= 2);
        assert!(matches!(train_tree(&d, &[], &c, &mut rng_from_seed(4)), Err(Error::EmptySample)));
    }
}
