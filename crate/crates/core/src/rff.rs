//! Randomized kernel mean embeddings.
//!
//! For the squared-exponential kernel `k(x, x') = exp(-gamma |x - x'|^2)`
//! the spectral measure is `N(0, 2 gamma I)`, so averaging
//! `cos(w_k . x + b_k)` over a sample with `w_k` drawn from it and
//! `b_k ~ U[0, 2 pi)` gives a finite-dimensional approximation of the
//! empirical mean embedding. A pair is featurized as three blocks: the
//! embedding of the x marginal, of the y marginal (both with the same
//! frequencies) and of the joint sample.

use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{standardize, CausalPair};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Frozen random projection parameters shared by training and scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct RffBasis {
    gamma: f64,
    m: usize,
    seed: u64,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<[f64; 2]>,
    b2: Vec<f64>,
}

/// The parameters that fully determine an [`RffBasis`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub gamma: f64,
    pub m: usize,
    pub seed: u64,
}

fn check_params(gamma: f64, m: usize) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    if m == 0 || !m.is_multiple_of(3) {
        return Err(Error::InvalidConfig(format!(
            "feature count must be a positive multiple of 3, got {m}"
        )));
    }
    Ok(())
}

fn phase(rng: &mut impl rand::Rng) -> f64 {
    let b = rng.random::<f64>() * TAU;
    // u * TAU can round up to TAU itself.
    if b >= TAU {
        0.0
    } else {
        b
    }
}

/// Stable 64-bit digest of the basis parameters.
pub fn basis_digest(gamma: f64, m: usize, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"cepairs/rff-basis/v1");
    h.update(gamma.to_bits().to_le_bytes());
    h.update((m as u64).to_le_bytes());
    h.update(seed.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

/// Draws a basis with `m / 3` components per block.
pub fn sample_basis(gamma: f64, m: usize, seed: u64) -> Result<RffBasis> {
    check_params(gamma, m)?;
    let k = m / 3;
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, (2.0 * gamma).sqrt()).expect("finite positive std");
    let w1: Vec<f64> = (0..k).map(|_| normal.sample(&mut rng)).collect();
    let b1: Vec<f64> = (0..k).map(|_| phase(&mut rng)).collect();
    let w2: Vec<[f64; 2]> = (0..k)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let b2: Vec<f64> = (0..k).map(|_| phase(&mut rng)).collect();
    Ok(RffBasis {
        gamma,
        m,
        seed,
        w1,
        b1,
        w2,
        b2,
    })
}

impl RffBasis {
    pub fn from_spec(spec: BasisSpec) -> Result<Self> {
        sample_basis(spec.gamma, spec.m, spec.seed)
    }

    pub fn spec(&self) -> BasisSpec {
        BasisSpec {
            gamma: self.gamma,
            m: self.m,
            seed: self.seed,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn digest(&self) -> u64 {
        basis_digest(self.gamma, self.m, self.seed)
    }

    /// Scalar frequencies shared by both marginal blocks.
    pub fn marginal_frequencies(&self) -> &[f64] {
        &self.w1
    }

    pub fn marginal_phases(&self) -> &[f64] {
        &self.b1
    }

    pub fn joint_frequencies(&self) -> &[[f64; 2]] {
        &self.w2
    }

    pub fn joint_phases(&self) -> &[f64] {
        &self.b2
    }
}

/// Embedding of one pair; every entry is a mean of cosines.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub basis_id: u64,
}

impl FeatureVector {
    /// The x-marginal, y-marginal and joint blocks.
    pub fn blocks(&self) -> [&[f64]; 3] {
        let k = self.values.len() / 3;
        [
            &self.values[..k],
            &self.values[k..2 * k],
            &self.values[2 * k..],
        ]
    }
}

/// Component `k` is the sample mean of `cos(w_k . x + b_k)`.
pub fn embed_block<const D: usize>(
    sample: &[[f64; D]],
    w: &[[f64; D]],
    b: &[f64],
) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if w.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frequencies but {} phases",
            w.len(),
            b.len()
        )));
    }
    let mut sums = vec![0.0; w.len()];
    for point in sample {
        for ((acc, wk), bk) in sums.iter_mut().zip(w).zip(b) {
            let mut arg = *bk;
            for d in 0..D {
                arg += wk[d] * point[d];
            }
            *acc += arg.cos();
        }
    }
    let n = sample.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

fn embed_marginal(values: &[f64], w: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let mut pts: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
    pts.sort_unstable_by(|a, c| a[0].total_cmp(&c[0]));
    let w: Vec<[f64; 1]> = w.iter().map(|&v| [v]).collect();
    embed_block(&pts, &w, b)
}

/// The three-block embedding of a pair, of length `basis.m()`.
///
/// Rows are put in a canonical order before summation so the result is
/// bitwise invariant to row permutations, and the y block of `p` equals the
/// x block of `p.swap()` exactly.
pub fn featurize(p: &CausalPair, basis: &RffBasis, pre_standardize: bool) -> Result<FeatureVector> {
    let (x, y) = if pre_standardize {
        (standardize(p.x()).values, standardize(p.y()).values)
    } else {
        (p.x().to_vec(), p.y().to_vec())
    };
    let mut values = Vec::with_capacity(basis.m);
    values.extend(embed_marginal(&x, &basis.w1, &basis.b1)?);
    values.extend(embed_marginal(&y, &basis.w1, &basis.b1)?);
    let mut joint: Vec<[f64; 2]> = x.iter().zip(&y).map(|(&a, &b)| [a, b]).collect();
    joint.sort_unstable_by(|a, c| a[0].total_cmp(&c[0]).then(a[1].total_cmp(&c[1])));
    values.extend(embed_block(&joint, &basis.w2, &basis.b2)?);
    Ok(FeatureVector {
        values,
        basis_id: basis.digest(),
    })
}

/// Exact squared-exponential kernel.
pub fn sq_exp_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// `(2/M) sum_k cos(w_k . x + b_k) cos(w_k . y + b_k)` for explicit
/// frequencies and phases.
pub fn kernel_estimate_with(x: &[f64], y: &[f64], w: &[Vec<f64>], b: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "points of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    if w.is_empty() || w.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frequencies but {} phases",
            w.len(),
            b.len()
        )));
    }
    let dot = |wk: &[f64], v: &[f64]| -> Result<f64> {
        if wk.len() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "frequency of dimension {} for point of dimension {}",
                wk.len(),
                v.len()
            )));
        }
        Ok(wk.iter().zip(v).map(|(a, c)| a * c).sum())
    };
    let mut acc = 0.0;
    for (wk, bk) in w.iter().zip(b) {
        acc += (dot(wk, x)? + bk).cos() * (dot(wk, y)? + bk).cos();
    }
    Ok(2.0 * acc / w.len() as f64)
}

/// Monte-Carlo estimate of `exp(-gamma |x - y|^2)` from `count` random features.
pub fn kernel_estimate(x: &[f64], y: &[f64], gamma: f64, count: usize, seed: u64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "points of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    if count == 0 {
        return Err(Error::InvalidConfig("need at least one random feature".into()));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, (2.0 * gamma).sqrt()).expect("finite positive std");
    let w: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..x.len()).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let b: Vec<f64> = (0..count).map(|_| phase(&mut rng)).collect();
    kernel_estimate_with(x, y, &w, &b)
}
