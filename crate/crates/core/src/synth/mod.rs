//! Synthetic cause-effect pairs.
//!
//! A causal pair is built as follows: the cause is drawn from a random
//! Gaussian mixture and standardized, the mechanism is a natural cubic
//! spline through normally distributed knots on an equispaced grid over the
//! cause's range, Gaussian noise with a uniformly drawn variance is added,
//! and the effect is standardized. Independent and confounded pairs reuse
//! the same ingredients and are labelled non-causal.

mod spline;

pub use spline::NaturalCubicSpline;

use rand::Rng as _;
use rand_distr::{weighted::WeightedIndex, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{augment_with_swaps, standardize, CausalLabel, CausalPair, PairCollection};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Kind of synthetic pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    Causal,
    Independent,
    Confounded,
}

/// Relative proportions of each kind in a generated dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindMix {
    pub causal: f64,
    pub independent: f64,
    pub confounded: f64,
}

impl Default for KindMix {
    fn default() -> Self {
        Self {
            causal: 1.0,
            independent: 0.0,
            confounded: 0.0,
        }
    }
}

impl KindMix {
    /// Pair counts per kind summing to `n` (largest-remainder rounding).
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        let w = [self.causal, self.independent, self.confounded];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig(format!("invalid kind mix {self:?}")));
        }
        let total: f64 = w.iter().sum();
        let exact: Vec<f64> = w.iter().map(|v| v / total * n as f64).collect();
        let mut counts = [0usize; 3];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = e.floor() as usize;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut left = n - counts.iter().sum::<usize>();
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        Ok(counts)
    }
}

/// Generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_per_pair: usize,
    pub n_pairs: usize,
    pub components: usize,
    /// Spread of the hyperprior on mixture means and standard deviations.
    pub hyper_scale: f64,
    /// Read `hyper_scale` as a standard deviation instead of a variance.
    pub hyper_scale_is_std: bool,
    pub knot_count: usize,
    /// Noise variance is drawn uniformly from `(lo, hi]` (exactly `lo` when equal).
    pub noise_var_range: (f64, f64),
    pub kinds: KindMix,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_pair: 1000,
            n_pairs: 5000,
            components: 5,
            hyper_scale: 5.0,
            hyper_scale_is_std: false,
            knot_count: 10,
            noise_var_range: (0.0, 1.0),
            kinds: KindMix::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_per_pair < 2 {
            return bad("n_per_pair must be at least 2");
        }
        if self.components == 0 {
            return bad("components must be positive");
        }
        if self.knot_count < 2 {
            return bad("knot_count must be at least 2");
        }
        if !(self.hyper_scale.is_finite() && self.hyper_scale > 0.0) {
            return bad("hyper_scale must be positive");
        }
        let (lo, hi) = self.noise_var_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return bad("noise_var_range must satisfy 0 <= lo <= hi");
        }
        self.kinds.counts(self.n_pairs)?;
        Ok(())
    }

    fn hyper_std(&self) -> f64 {
        if self.hyper_scale_is_std {
            self.hyper_scale
        } else {
            self.hyper_scale.sqrt()
        }
    }
}

/// A random Gaussian mixture on the real line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Weights uniform then normalized; means and (positive) stds from the
/// hyperprior `N(0, hyper_scale)`.
pub fn sample_gmm(cfg: &SynthConfig, rng: &mut Rng) -> GmmParams {
    let hyper = Normal::new(0.0, cfg.hyper_std()).expect("validated hyper_scale");
    let raw: Vec<f64> = (0..cfg.components)
        .map(|_| loop {
            // Open interval so a mixture can never have all-zero weights.
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let means = (0..cfg.components).map(|_| hyper.sample(rng)).collect();
    let stds = (0..cfg.components)
        .map(|_| loop {
            let s: f64 = hyper.sample(rng);
            if s > 0.0 {
                break s;
            }
        })
        .collect();
    GmmParams {
        weights,
        means,
        stds,
    }
}

/// `n` mixture draws, standardized.
pub fn draw_cause(g: &GmmParams, n: usize, rng: &mut Rng) -> Vec<f64> {
    let pick = WeightedIndex::new(&g.weights).expect("mixture weights are positive");
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            let c = pick.sample(rng);
            let z: f64 = StandardNormal.sample(rng);
            g.means[c] + g.stds[c] * z
        })
        .collect();
    standardize(&raw).values
}

/// A random smooth mechanism: spline through `knot_count` standard-normal
/// knots on an equispaced grid spanning `[x_min, x_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineMechanism {
    spline: NaturalCubicSpline,
}

impl SplineMechanism {
    pub fn new(grid: Vec<f64>, knots: Vec<f64>) -> Result<Self> {
        Ok(Self {
            spline: NaturalCubicSpline::new(grid, knots)?,
        })
    }

    pub fn grid(&self) -> &[f64] {
        self.spline.nodes()
    }

    pub fn knots(&self) -> &[f64] {
        self.spline.values()
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.spline.eval(x)
    }
}

pub fn fit_mechanism(x_min: f64, x_max: f64, cfg: &SynthConfig, rng: &mut Rng) -> Result<SplineMechanism> {
    if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
        return Err(Error::InvalidConfig(format!(
            "mechanism range must satisfy x_min < x_max, got [{x_min}, {x_max}]"
        )));
    }
    let k = cfg.knot_count;
    let step = (x_max - x_min) / (k - 1) as f64;
    let mut grid: Vec<f64> = (0..k).map(|i| x_min + step * i as f64).collect();
    grid[k - 1] = x_max;
    let knots = (0..k).map(|_| StandardNormal.sample(rng)).collect();
    SplineMechanism::new(grid, knots)
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo < hi {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn noise(cfg: &SynthConfig, n: usize, rng: &mut Rng) -> Vec<f64> {
    let (lo, hi) = cfg.noise_var_range;
    let u: f64 = rng.random();
    let var = if hi > lo { lo + (hi - lo) * (1.0 - u) } else { lo };
    let dist = Normal::new(0.0, var.sqrt()).expect("nonnegative variance");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// `standardize(f(x) + noise)`.
pub fn apply_mechanism(x: &[f64], f: impl Fn(f64) -> f64, noise: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = x.iter().zip(noise).map(|(&v, e)| f(v) + e).collect();
    standardize(&raw).values
}

/// Two effects of one hidden cause `z`.
pub fn confounded_columns(
    z: &[f64],
    f1: impl Fn(f64) -> f64,
    f2: impl Fn(f64) -> f64,
    noise1: &[f64],
    noise2: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    (apply_mechanism(z, f1, noise1), apply_mechanism(z, f2, noise2))
}

fn effect_of(x: &[f64], cfg: &SynthConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    let (lo, hi) = range(x);
    let f = fit_mechanism(lo, hi, cfg, rng)?;
    let eps = noise(cfg, x.len(), rng);
    Ok(apply_mechanism(x, |v| f.apply(v), &eps))
}

pub fn generate_causal_pair(id: impl Into<String>, cfg: &SynthConfig, rng: &mut Rng) -> Result<CausalPair> {
    let gmm = sample_gmm(cfg, rng);
    let x = draw_cause(&gmm, cfg.n_per_pair, rng);
    let y = effect_of(&x, cfg, rng)?;
    Ok(CausalPair::new(id, x, y)?.with_label(CausalLabel::XcausesY))
}

pub fn generate_noncausal_pair(
    id: impl Into<String>,
    kind: PairKind,
    cfg: &SynthConfig,
    rng: &mut Rng,
) -> Result<CausalPair> {
    let (x, y) = match kind {
        PairKind::Causal => {
            return Err(Error::InvalidConfig(
                "generate_noncausal_pair called with the causal kind".into(),
            ))
        }
        PairKind::Independent => {
            let gx = sample_gmm(cfg, rng);
            let x = draw_cause(&gx, cfg.n_per_pair, rng);
            let gy = sample_gmm(cfg, rng);
            let y = draw_cause(&gy, cfg.n_per_pair, rng);
            (x, y)
        }
        PairKind::Confounded => {
            let gz = sample_gmm(cfg, rng);
            let z = draw_cause(&gz, cfg.n_per_pair, rng);
            let (lo, hi) = range(&z);
            let f1 = fit_mechanism(lo, hi, cfg, rng)?;
            let e1 = noise(cfg, z.len(), rng);
            let f2 = fit_mechanism(lo, hi, cfg, rng)?;
            let e2 = noise(cfg, z.len(), rng);
            confounded_columns(&z, |v| f1.apply(v), |v| f2.apply(v), &e1, &e2)
        }
    };
    Ok(CausalPair::new(id, x, y)?.with_label(CausalLabel::NonCausal))
}

/// Kind of the pair at `index` under the layout used by [`generate_dataset`]:
/// causal pairs first, then independent, then confounded.
fn kind_at(index: usize, counts: &[usize; 3]) -> PairKind {
    if index < counts[0] {
        PairKind::Causal
    } else if index < counts[0] + counts[1] {
        PairKind::Independent
    } else {
        PairKind::Confounded
    }
}

/// Ids are `pair` followed by the 1-based index, zero-padded to at least 5 digits.
pub fn pair_id(index: usize, n_pairs: usize) -> String {
    let width = n_pairs.to_string().len().max(5);
    format!("pair{:0width$}", index + 1)
}

/// `cfg.n_pairs` pairs followed by their swapped copies. Pair `i` draws from
/// its own stream derived from `(cfg.seed, i)`.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<PairCollection> {
    cfg.validate()?;
    let counts = cfg.kinds.counts(cfg.n_pairs)?;
    let pairs = (0..cfg.n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(cfg.seed, i as u64);
            let id = pair_id(i, cfg.n_pairs);
            match kind_at(i, &counts) {
                PairKind::Causal => generate_causal_pair(id, cfg, &mut rng),
                kind => generate_noncausal_pair(id, kind, cfg, &mut rng),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let base = PairCollection::new(pairs, format!("synth seed={}", cfg.seed))?;
    augment_with_swaps(&base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

    fn cfg() -> SynthConfig {
        SynthConfig {
            n_pairs: 10,
            n_per_pair: 200,
            seed: 3,
            ..SynthConfig::default()
        }
    }

    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn gmm_defaults() {
        let c = SynthConfig::default();
        let mut r = rng::rng_from_seed(1);
        let g = sample_gmm(&c, &mut r);
        assert_eq!(g.weights.len(), 5);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let again = sample_gmm(&c, &mut rng::rng_from_seed(1));
        assert_eq!(g, again);
        for _ in 0..2000 {
            let g = sample_gmm(&c, &mut r);
            assert!(g.stds.iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn cause_is_standardized() {
        let c = SynthConfig::default();
        let mut r = rng::rng_from_seed(2);
        let g = sample_gmm(&c, &mut r);
        let x = draw_cause(&g, 1000, &mut r);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() <= 1e-10 && (sd - 1.0).abs() <= 1e-10);
        let two = draw_cause(&g, 2, &mut r);
        assert!((two[0].abs() - 1.0).abs() < 1e-12 && (two[0] + two[1]).abs() < 1e-12);
    }

    #[test]
    fn single_component_cause_is_normal() {
        let g = GmmParams {
            weights: vec![1.0],
            means: vec![0.0],
            stds: vec![1.0],
        };
        let mut x = draw_cause(&g, 10_000, &mut rng::rng_from_seed(4));
        x.sort_by(f64::total_cmp);
        let normal = StatNormal::new(0.0, 1.0).unwrap();
        let n = x.len() as f64;
        let d = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = normal.cdf(v);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic two-sided critical value at alpha = 0.01.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn mechanism_properties() {
        let c = SynthConfig::default();
        let mut r = rng::rng_from_seed(5);
        let f = fit_mechanism(-1.5, 2.0, &c, &mut r).unwrap();
        assert_eq!(f.grid().len(), 10);
        assert_eq!(f.grid()[0], -1.5);
        assert_eq!(f.grid()[9], 2.0);
        for (g, k) in f.grid().iter().zip(f.knots()) {
            assert!((f.apply(*g) - k).abs() <= 1e-9);
        }
        assert!(fit_mechanism(1.0, 1.0, &c, &mut r).is_err());
        assert!(fit_mechanism(2.0, 1.0, &c, &mut r).is_err());

        let grid: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let flat = SplineMechanism::new(grid.clone(), vec![0.7; 10]).unwrap();
        assert!((0..=100).all(|i| (flat.apply(i as f64 / 100.0) - 0.7).abs() < 1e-12));
        let ident = SplineMechanism::new(grid.clone(), grid).unwrap();
        assert!((0..=100).all(|i| {
            let t = i as f64 / 100.0;
            (ident.apply(t) - t).abs() <= 1e-9
        }));
    }

    #[test]
    fn causal_pair_shape() {
        let c = SynthConfig {
            n_per_pair: 1000,
            ..SynthConfig::default()
        };
        let p = generate_causal_pair("p", &c, &mut rng::rng_from_seed(6)).unwrap();
        assert_eq!(p.len(), 1000);
        assert_eq!(p.label(), Some(CausalLabel::XcausesY));
        let n = p.len() as f64;
        let mean = p.y().iter().sum::<f64>() / n;
        assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn noiseless_effect_is_a_function_of_the_cause() {
        let c = SynthConfig {
            noise_var_range: (0.0, 0.0),
            ..SynthConfig::default()
        };
        let x: Vec<f64> = [0.1, 0.5, 0.1, 0.9, 0.5, 0.3].to_vec();
        let eps = noise(&c, x.len(), &mut rng::rng_from_seed(7));
        assert!(eps.iter().all(|&e| e == 0.0));
        let y = apply_mechanism(&x, |v| v * v * v + v, &eps);
        assert_eq!(y[0], y[2]);
        assert_eq!(y[1], y[4]);
    }

    #[test]
    fn noncausal_kinds() {
        let c = SynthConfig {
            n_per_pair: 10_000,
            ..SynthConfig::default()
        };
        let p = generate_noncausal_pair("i", PairKind::Independent, &c, &mut rng::rng_from_seed(8)).unwrap();
        assert_eq!(p.label(), Some(CausalLabel::NonCausal));
        assert!(pearson(p.x(), p.y()).abs() <= 0.1);
        let q = generate_noncausal_pair("c", PairKind::Confounded, &cfg(), &mut rng::rng_from_seed(9)).unwrap();
        assert_eq!(q.label(), Some(CausalLabel::NonCausal));
        assert!(generate_noncausal_pair("x", PairKind::Causal, &cfg(), &mut rng::rng_from_seed(9)).is_err());

        // Identity mechanisms without noise reproduce the hidden cause in both columns.
        let z = draw_cause(&sample_gmm(&c, &mut rng::rng_from_seed(10)), 50, &mut rng::rng_from_seed(11));
        let zero = vec![0.0; z.len()];
        let (x, y) = confounded_columns(&z, |v| v, |v| v, &zero, &zero);
        assert_eq!(x, y);
    }

    #[test]
    fn dataset_layout_and_determinism() {
        let c = cfg();
        let d = generate_dataset(&c).unwrap();
        assert_eq!(d.len(), 20);
        assert_eq!(d.count_label(CausalLabel::XcausesY), 10);
        assert_eq!(d.count_label(CausalLabel::YcausesX), 10);
        assert_eq!(d, generate_dataset(&c).unwrap());
        let empty = generate_dataset(&SynthConfig { n_pairs: 0, ..c.clone() }).unwrap();
        assert!(empty.is_empty());

        let mixed = SynthConfig {
            n_pairs: 10,
            kinds: KindMix {
                causal: 0.8,
                independent: 0.1,
                confounded: 0.1,
            },
            ..c
        };
        let m = generate_dataset(&mixed).unwrap();
        assert_eq!(m.count_label(CausalLabel::XcausesY), 8);
        assert_eq!(m.count_label(CausalLabel::YcausesX), 8);
        assert_eq!(m.count_label(CausalLabel::NonCausal), 4);
    }

    #[test]
    fn dataset_independent_of_thread_count() {
        let c = cfg();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| generate_dataset(&c)).unwrap();
        let b = four.install(|| generate_dataset(&c)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn causal_pairs_are_usually_dependent() {
        let c = SynthConfig {
            n_pairs: 1000,
            n_per_pair: 300,
            seed: 12,
            ..SynthConfig::default()
        };
        let d = generate_dataset(&c).unwrap();
        let dependent = d.pairs()[..1000]
            .iter()
            .filter(|p| pearson(p.x(), p.y()).abs() > 0.05)
            .count();
        assert!(dependent >= 500, "{dependent}");
    }

    #[test]
    fn kind_counts() {
        let mix = KindMix {
            causal: 0.8,
            independent: 0.1,
            confounded: 0.1,
        };
        assert_eq!(mix.counts(2000).unwrap(), [1600, 200, 200]);
        assert_eq!(mix.counts(7).unwrap().iter().sum::<usize>(), 7);
        assert!(KindMix {
            causal: 0.0,
            independent: 0.0,
            confounded: 0.0
        }
        .counts(3)
        .is_err());
    }
}
