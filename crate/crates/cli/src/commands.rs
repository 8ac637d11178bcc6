use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, ArgGroup, Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use cepairs::data::{load_collection, write_collection};
use cepairs::eval::{method_report, significance_band, EvalReport, EvalRow};
use cepairs::features::{featurize_collection, read_feature_matrix, write_feature_matrix, FeatureMatrix};
use cepairs::infer::{
    igci_decide, train_causation_model, train_direction_model, ClassifierSpec, IgciDecision, IgciVerdict, Model,
    ScoredPair,
};
use cepairs::learn::{ForestConfig, GbmConfig};
use cepairs::model::{load_model, save_model};
use cepairs::synth::{generate_dataset, KindMix, SynthConfig};
use cepairs::{CausalLabel, CausalPair, Error, PairCollection, RffBasis};

use crate::config::write_resolved;
use crate::error::{CliError, CliResult};

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// `--meta` when given, else `<dir>/pairmeta.txt` if present.
fn resolve_meta(dir: &Path, meta: &Option<PathBuf>) -> Option<PathBuf> {
    meta.clone().or_else(|| {
        let p = dir.join("pairmeta.txt");
        p.is_file().then_some(p)
    })
}

fn load_pairs(dir: &Path, meta: &Option<PathBuf>) -> CliResult<PairCollection> {
    let meta = resolve_meta(dir, meta);
    let c = load_collection(dir, meta.as_deref())?;
    log::info!("loaded {} pairs from {}", c.len(), dir.display());
    Ok(c)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SynthArgs {
    /// Output directory for pair files, pairmeta.txt and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Pairs before swap augmentation.
    #[arg(long, default_value_t = 5000)]
    pub n_pairs: usize,
    /// Samples per pair.
    #[arg(long = "n", default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mixture components of the cause distribution.
    #[arg(long, default_value_t = 5)]
    pub components: usize,
    /// Variance of the normal hyperprior on mixture means and deviations.
    #[arg(long, default_value_t = 5.0)]
    pub hyper_scale: f64,
    /// Read --hyper-scale as a standard deviation.
    #[arg(long, action = ArgAction::Set, default_value_t = false)]
    pub hyper_scale_is_std: bool,
    /// Spline knots of the mechanism.
    #[arg(long, default_value_t = 10)]
    pub knots: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_max: f64,
    /// Relative share of causal pairs.
    #[arg(long, default_value_t = 1.0)]
    pub causal: f64,
    /// Relative share of independent pairs.
    #[arg(long, default_value_t = 0.0)]
    pub independent: f64,
    /// Relative share of confounded pairs.
    #[arg(long, default_value_t = 0.0)]
    pub confounded: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    config: &'a SynthConfig,
    pairs_written: usize,
    x_causes_y: usize,
    y_causes_x: usize,
    non_causal: usize,
}

pub fn synth(a: &SynthArgs) -> CliResult {
    let cfg = SynthConfig {
        n_per_pair: a.n,
        n_pairs: a.n_pairs,
        components: a.components,
        hyper_scale: a.hyper_scale,
        hyper_scale_is_std: a.hyper_scale_is_std,
        knot_count: a.knots,
        noise_var_range: (a.noise_min, a.noise_max),
        kinds: KindMix {
            causal: a.causal,
            independent: a.independent,
            confounded: a.confounded,
        },
        seed: a.seed,
    };
    cfg.validate()?;
    create_dir(&a.out)?;
    let c = generate_dataset(&cfg)?;
    write_collection(&a.out, &c)?;
    let manifest = Manifest {
        format: "cepairs-synth-manifest",
        version: 1,
        config: &cfg,
        pairs_written: c.len(),
        x_causes_y: c.count_label(CausalLabel::XcausesY),
        y_causes_x: c.count_label(CausalLabel::YcausesX),
        non_causal: c.count_label(CausalLabel::NonCausal),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
    write_text(&a.out.join("manifest.json"), &(json + "\n"))?;
    write_resolved(&a.out.join("synth.conf"), "synth", a)?;
    log::info!("wrote {} pairs to {}", c.len(), a.out.display());
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FeaturizeArgs {
    /// Directory of pair files.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Meta file; defaults to pairmeta.txt inside --pairs when present.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Feature matrix CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = cepairs::DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Total features, a multiple of 3.
    #[arg(long, default_value_t = cepairs::DEFAULT_FEATURES)]
    pub m: usize,
    /// Seed of the random Fourier basis.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standardize each variable before embedding.
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    pub standardize: bool,
}

pub fn featurize(a: &FeaturizeArgs) -> CliResult {
    let basis = RffBasis::from_spec(cepairs::rff::BasisSpec {
        gamma: a.gamma,
        m: a.m,
        seed: a.seed,
    })?;
    let c = load_pairs(&a.pairs, &a.meta)?;
    let fm = featurize_collection(&c, &basis, a.standardize)?;
    write_feature_matrix(&a.out, &fm)?;
    write_resolved(&with_suffix(&a.out, ".conf"), "featurize", a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Forest,
    Gbm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// One classifier for X->Y against Y->X.
    Direction,
    /// Causal-vs-non-causal plus direction classifiers.
    Causation,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(group(ArgGroup::new("input").required(true).args(["features", "pairs"])))]
pub struct TrainArgs {
    /// Feature matrix from `featurize`.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Directory of labelled pair files, featurized on the fly.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Basis parameters used with --pairs.
    #[arg(long, default_value_t = cepairs::DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = cepairs::DEFAULT_FEATURES)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub basis_seed: u64,
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    pub standardize: bool,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Forest)]
    pub model: ModelKind,
    #[arg(long, value_enum, default_value_t = Task::Direction)]
    pub task: Task,
    /// Forest size.
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Forest leaves hold at least this fraction of the training rows.
    #[arg(long, default_value_t = 0.01)]
    pub min_leaf: f64,
    /// Features tried per forest split; defaults to ceil(sqrt(m)).
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    pub bootstrap: bool,
    /// Boosting rounds.
    #[arg(long, default_value_t = 300)]
    pub rounds: usize,
    /// Boosted tree depth.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Minimum rows per boosted leaf.
    #[arg(long, default_value_t = 5)]
    pub min_leaf_count: usize,
    /// Row fraction per boosting round.
    #[arg(long, default_value_t = 1.0)]
    pub subsample: f64,
    /// Folds for boosted model selection; 0 disables it.
    #[arg(long, default_value_t = 0)]
    pub cv: usize,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "100,300,500")]
    pub grid_rounds: Vec<usize>,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "3,5")]
    pub grid_depth: Vec<usize>,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "0.05,0.1")]
    pub grid_lr: Vec<f64>,
    /// Seed of the learner.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainArgs {
    fn spec(&self) -> CliResult<ClassifierSpec> {
        let gbm = GbmConfig {
            rounds: self.rounds,
            max_depth: self.depth,
            learning_rate: self.lr,
            min_leaf_count: self.min_leaf_count,
            subsample: self.subsample,
            seed: self.seed,
        };
        match (self.model, self.cv) {
            (ModelKind::Forest, 0) => {
                let cfg = ForestConfig {
                    n_trees: self.trees,
                    min_leaf_fraction: self.min_leaf,
                    features_per_split: self.max_features,
                    bootstrap: self.bootstrap,
                    seed: self.seed,
                };
                cfg.validate()?;
                Ok(ClassifierSpec::Forest(cfg))
            }
            (ModelKind::Forest, _) => Err(CliError::Usage("--cv applies to --model gbm only".into())),
            (ModelKind::Gbm, 0) => {
                gbm.validate()?;
                Ok(ClassifierSpec::Gbm(gbm))
            }
            (ModelKind::Gbm, 1) => Err(CliError::Usage("--cv needs at least 2 folds".into())),
            (ModelKind::Gbm, folds) => {
                let mut grid = Vec::new();
                for &rounds in &self.grid_rounds {
                    for &max_depth in &self.grid_depth {
                        for &learning_rate in &self.grid_lr {
                            let c = GbmConfig {
                                rounds,
                                max_depth,
                                learning_rate,
                                ..gbm.clone()
                            };
                            c.validate()?;
                            grid.push(c);
                        }
                    }
                }
                if grid.is_empty() {
                    return Err(CliError::Usage("empty CV grid".into()));
                }
                Ok(ClassifierSpec::GbmCv {
                    grid,
                    folds,
                    seed: self.seed,
                })
            }
        }
    }
}

fn input_matrix(
    features: &Option<PathBuf>,
    pairs: &Option<PathBuf>,
    meta: &Option<PathBuf>,
    basis: impl FnOnce() -> CliResult<(RffBasis, bool)>,
) -> CliResult<FeatureMatrix> {
    match (features, pairs) {
        (Some(f), None) => Ok(read_feature_matrix(f)?),
        (None, Some(dir)) => {
            let c = load_pairs(dir, meta)?;
            let (basis, standardize) = basis()?;
            Ok(featurize_collection(&c, &basis, standardize)?)
        }
        _ => Err(CliError::Usage("give exactly one of --features and --pairs".into())),
    }
}

pub fn train(a: &TrainArgs) -> CliResult {
    let spec = a.spec()?;
    let fm = input_matrix(&a.features, &a.pairs, &a.meta, || {
        let basis = RffBasis::from_spec(cepairs::rff::BasisSpec {
            gamma: a.gamma,
            m: a.m,
            seed: a.basis_seed,
        })?;
        Ok((basis, a.standardize))
    })?;
    let basis = RffBasis::from_spec(fm.basis)?;
    let (model, report) = match a.task {
        Task::Direction => {
            let (m, r) = train_direction_model(&fm, &basis, &spec)?;
            (Model::Direction(m), r)
        }
        Task::Causation => {
            let (m, r) = train_causation_model(&fm, &basis, &spec)?;
            (Model::Causation(m), r)
        }
    };
    for cv in &report.cv {
        log::info!(
            "cv: best config {} of {} (mean auc {:.4})",
            cv.best_index,
            cv.grid.len(),
            cv.mean_scores[cv.best_index]
        );
    }
    save_model(&a.out, &model, Some(&report))?;
    write_resolved(&with_suffix(&a.out, ".conf"), "train", a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Igci,
}

/// Pairs or feature rows to score, with their labels and weights.
struct Scored {
    rows: Vec<ScoredPair>,
    labels: Vec<Option<CausalLabel>>,
    weights: Vec<f64>,
    pairs: Option<Vec<CausalPair>>,
}

fn score_input(
    model: &Model,
    features: &Option<PathBuf>,
    pairs: &Option<PathBuf>,
    meta: &Option<PathBuf>,
) -> CliResult<Scored> {
    match (features, pairs) {
        (Some(f), None) => {
            let fm = read_feature_matrix(f)?;
            if fm.digest() != model.basis().digest() {
                return Err(Error::BasisMismatch {
                    expected: model.basis().digest(),
                    found: fm.digest(),
                }
                .into());
            }
            if fm.standardized != model.standardize() {
                return Err(CliError::Data(format!(
                    "feature matrix standardized={} but the model expects standardized={}",
                    fm.standardized,
                    model.standardize()
                )));
            }
            let rows = (0..fm.rows.len())
                .into_par_iter()
                .map(|i| model.score_features(&fm.rows[i].id, &fm.vector(i)))
                .collect::<cepairs::Result<Vec<_>>>()?;
            Ok(Scored {
                rows,
                labels: fm.rows.iter().map(|r| r.label).collect(),
                weights: fm.rows.iter().map(|r| r.weight).collect(),
                pairs: None,
            })
        }
        (None, Some(dir)) => {
            let c = load_pairs(dir, meta)?;
            let rows = c
                .pairs()
                .par_iter()
                .map(|p| model.score_pair(p))
                .collect::<cepairs::Result<Vec<_>>>()?;
            Ok(Scored {
                rows,
                labels: c.iter().map(|p| p.label()).collect(),
                weights: c.iter().map(|p| p.weight()).collect(),
                pairs: Some(c.into_pairs()),
            })
        }
        _ => Err(CliError::Usage("give exactly one of --features and --pairs".into())),
    }
}

fn igci_all(pairs: &Option<Vec<CausalPair>>, margin: f64) -> CliResult<Vec<Option<IgciDecision>>> {
    let Some(pairs) = pairs else {
        return Err(CliError::Usage("--baseline igci needs --pairs input".into()));
    };
    pairs
        .par_iter()
        .map(|p| match igci_decide(p, margin) {
            Ok(d) => Ok(Some(d)),
            Err(Error::IgciUndefined(msg)) => {
                log::warn!("igci undefined for {}: {msg}", p.id());
                Ok(None)
            }
            Err(e) => Err(e.into()),
        })
        .collect()
}

fn verdict_text(d: &Option<IgciDecision>) -> &'static str {
    match d.map(|d| d.value) {
        Some(IgciVerdict::XtoY) => "x->y",
        Some(IgciVerdict::YtoX) => "y->x",
        Some(IgciVerdict::Abstain) => "abstain",
        None => "undefined",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn score_csv(rows: &[ScoredPair], igci: Option<&[Option<IgciDecision>]>) -> String {
    let mut out = String::from("id,score,p1,p2,confidence");
    if igci.is_some() {
        out.push_str(",igci_s_xy,igci_s_yx,igci_decision");
    }
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let _ = write!(out, "{},{},{},{},{}", r.id, r.score, r.p1, r.p2, r.confidence);
        if let Some(ig) = igci {
            let d = &ig[i];
            let _ = write!(
                out,
                ",{},{},{}",
                fmt_opt(d.map(|d| d.s_xy)),
                fmt_opt(d.map(|d| d.s_yx)),
                verdict_text(d)
            );
        }
        out.push('\n');
    }
    out
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(group(ArgGroup::new("input").required(true).args(["features", "pairs"])))]
pub struct ScoreArgs {
    /// Model file from `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Score file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Add baseline columns.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// IGCI abstains unless the two slope scores differ by more than this.
    #[arg(long, default_value_t = 0.0)]
    pub igci_margin: f64,
}

pub fn score(a: &ScoreArgs) -> CliResult {
    let (model, _) = load_model(&a.model)?;
    let s = score_input(&model, &a.features, &a.pairs, &a.meta)?;
    let igci = match a.baseline {
        Some(Baseline::Igci) => Some(igci_all(&s.pairs, a.igci_margin)?),
        None => None,
    };
    write_text(&a.out, &score_csv(&s.rows, igci.as_deref()))?;
    write_resolved(&with_suffix(&a.out, ".conf"), "score", a)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(group(ArgGroup::new("input").required(true).args(["features", "pairs"])))]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Directory for report.json, curve CSVs and scores.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Decision rates of the accuracy curve.
    #[arg(
        long,
        action = ArgAction::Set,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"
    )]
    pub rates: Vec<f64>,
    /// Significance level of the reported accuracy threshold.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[arg(long, default_value_t = 0.0)]
    pub igci_margin: f64,
}

fn igci_row(id: &str, label: CausalLabel, weight: f64, d: &Option<IgciDecision>) -> EvalRow {
    let (score, predicted, confidence) = match d {
        Some(d) => {
            let gap = d.s_yx - d.s_xy;
            match d.value {
                IgciVerdict::XtoY => (gap, CausalLabel::XcausesY, 0.5 + 0.5 * gap.abs().tanh()),
                IgciVerdict::YtoX => (gap, CausalLabel::YcausesX, 0.5 + 0.5 * gap.abs().tanh()),
                IgciVerdict::Abstain => (gap, CausalLabel::NonCausal, 0.5),
            }
        }
        None => (0.0, CausalLabel::NonCausal, 0.5),
    };
    EvalRow {
        id: id.to_string(),
        label,
        weight,
        score,
        predicted,
        confidence,
    }
}

pub fn eval(a: &EvalArgs) -> CliResult {
    let (model, _) = load_model(&a.model)?;
    let s = score_input(&model, &a.features, &a.pairs, &a.meta)?;
    let labels = s
        .labels
        .iter()
        .zip(&s.rows)
        .map(|(l, r)| l.ok_or_else(|| Error::MissingLabel(r.id.clone())))
        .collect::<cepairs::Result<Vec<_>>>()?;
    let rows: Vec<EvalRow> = s
        .rows
        .iter()
        .zip(&labels)
        .zip(&s.weights)
        .map(|((r, &label), &weight)| EvalRow {
            id: r.id.clone(),
            label,
            weight,
            score: r.score,
            predicted: r.predicted_direction(),
            confidence: r.confidence,
        })
        .collect();
    let mut methods = vec![method_report("model", &rows, &a.rates)?];
    let igci = match a.baseline {
        Some(Baseline::Igci) => Some(igci_all(&s.pairs, a.igci_margin)?),
        None => None,
    };
    if let Some(ig) = &igci {
        let igci_rows: Vec<EvalRow> = (0..rows.len())
            .map(|i| igci_row(&rows[i].id, labels[i], s.weights[i], &ig[i]))
            .collect();
        methods.push(method_report("igci", &igci_rows, &a.rates)?);
    }
    let report = EvalReport {
        n_pairs: rows.len(),
        significance_threshold: significance_band(methods[0].n_decisions, a.alpha),
        methods,
        rows,
    };
    create_dir(&a.out)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?;
    write_text(&a.out.join("report.json"), &(json + "\n"))?;
    for m in &report.methods {
        let stem = if m.method == "model" {
            "curve".to_string()
        } else {
            format!("curve_{}", m.method)
        };
        write_text(&a.out.join(format!("{stem}.csv")), &m.curve.to_csv())?;
        write_text(&a.out.join(format!("{stem}_weighted.csv")), &m.curve_weighted.to_csv())?;
    }
    write_text(&a.out.join("scores.csv"), &score_csv(&s.rows, igci.as_deref()))?;
    let m = &report.methods[0];
    log::info!(
        "accuracy {:.4} on {} causal pairs (significant above {:.4})",
        m.accuracy_full,
        m.n_decisions,
        report.significance_threshold
    );
    write_resolved(&a.out.join("eval.conf"), "eval", a)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct IgciArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// CSV of id,s_xy,s_yx,decision to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Abstain unless the two slope scores differ by more than this.
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
}

pub fn igci(a: &IgciArgs) -> CliResult {
    let c = load_pairs(&a.pairs, &a.meta)?;
    let decisions = igci_all(&Some(c.pairs().to_vec()), a.margin)?;
    let mut out = String::from("id,s_xy,s_yx,decision\n");
    for (p, d) in c.iter().zip(&decisions) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.id(),
            fmt_opt(d.map(|d| d.s_xy)),
            fmt_opt(d.map(|d| d.s_yx)),
            verdict_text(d)
        );
    }
    write_text(&a.out, &out)?;
    write_resolved(&with_suffix(&a.out, ".conf"), "igci", a)
}
