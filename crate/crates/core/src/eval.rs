//! Evaluation metrics: ROC AUC, bidirectional AUC, accuracy as a function
//! of decision rate, and the binomial significance threshold.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::CausalLabel;
use crate::error::{Error, Result};

/// Area under the ROC curve via the Mann-Whitney statistic, counting tied
/// positive/negative pairs as one half. O(n log n).
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            positives.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateClasses(format!(
            "AUC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives, with mid-ranks for ties; stays integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the mid-rank (i + j + 2) / 2.
        let pos_in_tie = order[i..=j].iter().filter(|&&k| positives[k]).count() as u128;
        twice_rank_sum += pos_in_tie * (i + j + 2) as u128;
        i = j + 1;
    }
    let p = n_pos as u128;
    // 2U = 2 R - P (P + 1)
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

/// Mean of the AUCs of "X->Y vs rest" (on `scores`) and "Y->X vs rest"
/// (on `-scores`).
pub fn bidirectional_auc(scores: &[f64], labels: &[CausalLabel]) -> Result<f64> {
    for class in [CausalLabel::XcausesY, CausalLabel::YcausesX] {
        if !labels.contains(&class) {
            return Err(Error::DegenerateClasses(format!("no pairs labelled {class}")));
        }
    }
    let xy: Vec<bool> = labels.iter().map(|&l| l == CausalLabel::XcausesY).collect();
    let yx: Vec<bool> = labels.iter().map(|&l| l == CausalLabel::YcausesX).collect();
    let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
    Ok(0.5 * (roc_auc(scores, &xy)? + roc_auc(&neg, &yx)?))
}

/// One scored test pair for [`decision_rate_accuracy`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub id: String,
    pub predicted: CausalLabel,
    /// In `[0.5, 1]`.
    pub confidence: f64,
    pub truth: CausalLabel,
    pub weight: f64,
}

impl Decision {
    pub fn correct(&self) -> bool {
        self.predicted == self.truth
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRateCurve {
    pub rates: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub n_selected: Vec<usize>,
    pub weights_used: bool,
}

impl DecisionRateCurve {
    /// `rate,accuracy,n_selected` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rate,accuracy,n_selected\n");
        for ((r, a), n) in self.rates.iter().zip(&self.accuracies).zip(&self.n_selected) {
            writeln!(out, "{r},{a},{n}").expect("writing to a String");
        }
        out
    }
}

/// Default rate grid 0.1, 0.2, ..., 1.0.
pub fn default_rates() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// For every rate `r`, the accuracy over the `ceil(r n)` most confident
/// decisions (ties broken by id). With `weighted`, accuracy is normalized
/// by the selected pairs' total weight; a zero total falls back to counts.
pub fn decision_rate_accuracy(decisions: &[Decision], rates: &[f64], weighted: bool) -> Result<DecisionRateCurve> {
    if decisions.is_empty() {
        return Err(Error::EmptySample);
    }
    if rates.is_empty() || rates.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidConfig("rates must lie in (0, 1]".into()));
    }
    if rates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("rates must be strictly increasing".into()));
    }
    if let Some(d) = decisions.iter().find(|d| !(0.5..=1.0).contains(&d.confidence)) {
        return Err(Error::InvalidConfig(format!(
            "confidence of {} is {}, outside [0.5, 1]",
            d.id, d.confidence
        )));
    }
    let mut order: Vec<&Decision> = decisions.iter().collect();
    order.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    let n = order.len();
    let mut accuracies = Vec::with_capacity(rates.len());
    let mut n_selected = Vec::with_capacity(rates.len());
    for &r in rates {
        let k = ((r * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
        let top = &order[..k];
        let total_w: f64 = top.iter().map(|d| d.weight).sum();
        let acc = if weighted && total_w > 0.0 {
            top.iter().filter(|d| d.correct()).map(|d| d.weight).sum::<f64>() / total_w
        } else {
            top.iter().filter(|d| d.correct()).count() as f64 / k as f64
        };
        accuracies.push(acc);
        n_selected.push(k);
    }
    Ok(DecisionRateCurve {
        rates: rates.to_vec(),
        accuracies,
        n_selected,
        weights_used: weighted,
    })
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`, for every `k` in `0..=n+1`.
fn upper_tails(n: usize) -> Vec<f64> {
    let mut log_fact = vec![0.0; n + 1];
    for i in 1..=n {
        log_fact[i] = log_fact[i - 1] + (i as f64).ln();
    }
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut tails = vec![0.0; n + 2];
    for k in (0..=n).rev() {
        let pmf = (log_fact[n] - log_fact[k] - log_fact[n - k] - ln2n).exp();
        tails[k] = tails[k + 1] + pmf;
    }
    tails
}

/// Smallest accuracy `k / n` above chance whose one-sided exact binomial
/// p-value against 1/2 is below `alpha`; 1.0 when no such `k` exists.
/// Accuracies below the returned value are not significant.
pub fn significance_band(n: usize, alpha: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let tails = upper_tails(n);
    (n / 2 + 1..=n)
        .find(|&k| tails[k] < alpha)
        .map_or(1.0, |k| k as f64 / n as f64)
}

/// One evaluated pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub label: CausalLabel,
    pub weight: f64,
    pub score: f64,
    pub predicted: CausalLabel,
    pub confidence: f64,
}

/// Metrics for one method on one labelled collection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    /// Causal-labelled rows entering the accuracy curves.
    pub n_decisions: usize,
    pub accuracy_full: f64,
    pub accuracy_full_weighted: f64,
    /// Absent when one of the two causal classes is missing.
    pub auc_bidirectional: Option<f64>,
    pub curve: DecisionRateCurve,
    pub curve_weighted: DecisionRateCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_pairs: usize,
    /// Accuracy below which a result over `n_pairs` is not significant (alpha = 0.05).
    pub significance_threshold: f64,
    pub methods: Vec<MethodReport>,
    pub rows: Vec<EvalRow>,
}

/// Builds the metrics for rows produced by one method. Accuracy curves use
/// the causal-labelled rows only; the bidirectional AUC uses every row.
pub fn method_report(method: &str, rows: &[EvalRow], rates: &[f64]) -> Result<MethodReport> {
    let decisions: Vec<Decision> = rows
        .iter()
        .filter(|r| r.label.is_causal())
        .map(|r| Decision {
            id: r.id.clone(),
            predicted: r.predicted,
            confidence: r.confidence,
            truth: r.label,
            weight: r.weight,
        })
        .collect();
    let curve = decision_rate_accuracy(&decisions, rates, false)?;
    let curve_weighted = decision_rate_accuracy(&decisions, rates, true)?;
    let full = decision_rate_accuracy(&decisions, &[1.0], false)?.accuracies[0];
    let full_w = decision_rate_accuracy(&decisions, &[1.0], true)?.accuracies[0];
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let labels: Vec<CausalLabel> = rows.iter().map(|r| r.label).collect();
    let auc = match bidirectional_auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::DegenerateClasses(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MethodReport {
        method: method.to_string(),
        n_decisions: decisions.len(),
        accuracy_full: full,
        accuracy_full_weighted: full_w,
        auc_bidirectional: auc,
        curve,
        curve_weighted,
    })
}
