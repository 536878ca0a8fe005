//! Evaluation metrics and diagnostic tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::pearson;
use crate::model::metric_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelReport {
    pub hamming_loss: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Fraction of instances whose label vector is not reproduced exactly.
    pub subset_01: f64,
    pub instances: usize,
    pub labels: usize,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Hamming loss, micro/macro F1 and subset 0/1 loss. A label with no
/// positives in either prediction or truth contributes an F1 of 0.
pub fn multilabel_metrics(pred: &[Vec<u8>], truth: &[Vec<u8>]) -> Result<MultiLabelReport> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ground-truth instances",
            pred.len(),
            truth.len()
        )));
    }
    let Some(first) = truth.first() else {
        return Err(Error::invalid("metrics of an empty prediction set"));
    };
    let l = first.len();
    if l == 0 || pred.iter().chain(truth).any(|v| v.len() != l) {
        return Err(Error::invalid("label vectors must share a nonzero arity"));
    }
    let mut tp = vec![0usize; l];
    let mut fp = vec![0usize; l];
    let mut fn_ = vec![0usize; l];
    let mut wrong = 0usize;
    let mut mismatched = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        let mut exact = true;
        for j in 0..l {
            match (p[j] != 0, t[j] != 0) {
                (true, true) => tp[j] += 1,
                (true, false) => fp[j] += 1,
                (false, true) => fn_[j] += 1,
                (false, false) => {}
            }
            if (p[j] != 0) != (t[j] != 0) {
                wrong += 1;
                exact = false;
            }
        }
        mismatched += usize::from(!exact);
    }
    let m = truth.len();
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let macro_ = (0..l).map(|j| f1(tp[j], fp[j], fn_[j])).sum::<f64>() / l as f64;
    Ok(MultiLabelReport {
        hamming_loss: wrong as f64 / (m * l) as f64,
        micro_f1: micro,
        macro_f1: macro_,
        subset_01: mismatched as f64 / m as f64,
        instances: m,
        labels: l,
    })
}

/// `1 − HL` of a single label vector.
pub fn vector_accuracy(pred: &[u8], truth: &[u8]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let agree = pred.iter().zip(truth).filter(|(p, t)| (**p != 0) == (**t != 0)).count();
    agree as f64 / truth.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthErrorReport {
    /// Relative error in percent; `None` where the true rate is zero.
    pub per_step: Vec<Option<f64>>,
    pub mean: f64,
    pub excluded: usize,
}

/// `|v − v̂| / |v| · 100` per step, skipping steps with `v = 0`.
pub fn growth_error(pred: &[f64], truth: &[f64]) -> Result<GrowthErrorReport> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!("{} growth predictions for {} targets", pred.len(), truth.len())));
    }
    let per_step: Vec<Option<f64>> = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (*t != 0.0).then(|| (t - p).abs() / t.abs() * 100.0))
        .collect();
    let kept: Vec<f64> = per_step.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::invalid("every growth step has a zero true rate"));
    }
    Ok(GrowthErrorReport {
        mean: kept.iter().sum::<f64>() / kept.len() as f64,
        excluded: per_step.len() - kept.len(),
        per_step,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("AUC score".into()));
    }
    let pos = labels.iter().filter(|&&y| y != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k] != 0).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean Euclidean and mean metric distance from each member row to the
/// center row, both in spacetime coordinates.
pub fn intra_cluster_distances(members: &[Vec<f64>], center: &[f64], g_inv: &[f64]) -> Option<(f64, f64)> {
    if members.is_empty() {
        return None;
    }
    let ones = vec![1.0; g_inv.len()];
    let k = members.len() as f64;
    // Euclidean uses the metric formula with unit metric so both sums round
    // identically term by term.
    let e = members.iter().map(|m| metric_distance(&ones, m, center)).sum::<f64>() / k;
    let g = members.iter().map(|m| metric_distance(g_inv, m, center)).sum::<f64>() / k;
    Some((e, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityRow {
    pub discussion: String,
    pub step: usize,
    pub entropy: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub discussion: String,
    pub step: usize,
    pub v_true: f64,
    pub error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub discussion: String,
    pub step: usize,
    pub cluster: usize,
    pub euclidean: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub homogeneity: Vec<HomogeneityRow>,
    pub growth: Vec<GrowthRow>,
    pub distances: Vec<DistanceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub homogeneity_pearson: Option<f64>,
    pub growth_pearson: Option<f64>,
    pub distance_rows: usize,
    /// Rows where the metric distance is below the Euclidean one.
    pub distance_violations: usize,
}

impl Diagnostics {
    pub fn summary(&self) -> DiagnosticsSummary {
        let (h, a): (Vec<f64>, Vec<f64>) = self.homogeneity.iter().map(|r| (r.entropy, r.accuracy)).unzip();
        let (v, e): (Vec<f64>, Vec<f64>) = self.growth.iter().map(|r| (r.v_true, r.error_pct)).unzip();
        DiagnosticsSummary {
            homogeneity_pearson: pearson(&h, &a),
            growth_pearson: pearson(&v, &e),
            distance_rows: self.distances.len(),
            distance_violations: self.distances.iter().filter(|r| r.metric < r.euclidean).count(),
        }
    }

    /// Entropy against per-window accuracy, where accuracy is `1 − HL` of
    /// the step's label vector.
    pub fn homogeneity_csv(&self) -> String {
        let mut s = String::from("discussion,step,entropy,accuracy_1_minus_hamming\n");
        for r in &self.homogeneity {
            let _ = writeln!(s, "{},{},{},{}", r.discussion, r.step, r.entropy, r.accuracy);
        }
        s
    }

    pub fn growth_csv(&self) -> String {
        let mut s = String::from("discussion,step,v_true_shifted,error_pct\n");
        for r in &self.growth {
            let _ = writeln!(s, "{},{},{},{}", r.discussion, r.step, r.v_true, r.error_pct);
        }
        s
    }

    pub fn distances_csv(&self) -> String {
        let mut s = String::from("discussion,step,cluster,mean_euclidean,mean_metric\n");
        for r in &self.distances {
            let _ = writeln!(s, "{},{},{},{},{}", r.discussion, r.step, r.cluster, r.euclidean, r.metric);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_predictions() {
        let t = vec![vec![1, 0, 1], vec![0, 1, 1]];
        let r = multilabel_metrics(&t, &t).unwrap();
        assert_eq!(r.hamming_loss, 0.0);
        assert_eq!(r.micro_f1, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.subset_01, 0.0);
    }

    #[test]
    fn worked_examples() {
        let r = multilabel_metrics(&[vec![1, 1, 0, 0]], &[vec![1, 0, 1, 0]]).unwrap();
        assert_eq!(r.hamming_loss, 0.5);
        assert_eq!(r.subset_01, 1.0);
        let r = multilabel_metrics(&[vec![1, 0], vec![0, 1]], &[vec![1, 1], vec![0, 1]]).unwrap();
        assert!((r.micro_f1 - 0.8).abs() < 1e-12);
        assert!(multilabel_metrics(&[vec![1]], &[]).is_err());
    }

    #[test]
    fn macro_treats_empty_label_as_zero() {
        let r = multilabel_metrics(&[vec![1, 0]], &[vec![1, 0]]).unwrap();
        assert_eq!(r.macro_f1, 0.5);
    }

    #[test]
    fn growth_examples() {
        assert_eq!(growth_error(&[1.5], &[1.5]).unwrap().mean, 0.0);
        assert!((growth_error(&[1.8], &[2.0]).unwrap().mean - 10.0).abs() < 1e-9);
        let r = growth_error(&[1.0, 1.8], &[0.0, 2.0]).unwrap();
        assert_eq!(r.excluded, 1);
        assert_eq!(r.per_step[0], None);
        assert!(growth_error(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0]).unwrap(), 0.75);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 5], &[0, 1, 0, 1, 1]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn metric_distance_dominates_for_contracting_metric() {
        let members = vec![vec![0.0, 1.0, 2.0], vec![0.0, -1.0, 0.5]];
        let (e, g) = intra_cluster_distances(&members, &[0.0, 0.0, 0.0], &[0.3, 0.9, 0.5]).unwrap();
        assert!(g >= e);
        assert!(intra_cluster_distances(&[], &[0.0], &[0.5]).is_none());
    }

    #[test]
    fn summary_pearson_linear() {
        let d = Diagnostics {
            homogeneity: (0..4)
                .map(|i| HomogeneityRow {
                    discussion: "d".into(),
                    step: i,
                    entropy: i as f64,
                    accuracy: 2.0 * i as f64,
                })
                .collect(),
            ..Diagnostics::default()
        };
        assert!((d.summary().homogeneity_pearson.unwrap() - 1.0).abs() < 1e-12);
        assert!(d.homogeneity_csv().starts_with("discussion,step,entropy"));
    }
}
