//! Confusion matrix and fact-checking metrics against gold labels.
//!
//! The positive class is `Supported`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::checks::VerificationReport;
use crate::propmodel::{Label, PropositionId, Verdict};
use crate::rational::{self, Rational};
use crate::simcorpus::ExpectedFault;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Adds one prediction/gold pair.
    pub fn record(&mut self, predicted: Label, gold: Label) {
        match (predicted.is_supported(), gold.is_supported()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// Positive and negative classes exchanged.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix::new(self.tn, self.fn_, self.fp, self.tp)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub id: PropositionId,
    pub gold: Label,
}

/// Gold labels for one summary. `expected` lists the injected faults of a
/// synthetic document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldFile {
    pub doc_id: String,
    pub labels: Vec<GoldLabel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<ExpectedFault>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("{predicted} predictions but {gold} gold labels")]
    LengthMismatch { predicted: usize, gold: usize },
    #[error("position {index}: prediction for {predicted} but gold label for {gold}")]
    IdMismatch {
        index: usize,
        predicted: PropositionId,
        gold: PropositionId,
    },
    #[error("no verdict for gold proposition {0}")]
    MissingVerdict(PropositionId),
    #[error("no report for gold document `{0}`")]
    MissingReport(String),
}

/// Counts over id-aligned lists.
pub fn confusion(predicted: &[Verdict], gold: &[GoldLabel]) -> Result<ConfusionMatrix, MetricsError> {
    if predicted.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (index, (p, g)) in predicted.iter().zip(gold).enumerate() {
        if p.proposition_id != g.id {
            return Err(MetricsError::IdMismatch {
                index,
                predicted: p.proposition_id.clone(),
                gold: g.id.clone(),
            });
        }
        cm.record(p.label, g.gold);
    }
    Ok(cm)
}

/// A predicted probability of `Supported` and the gold outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredItem {
    pub confidence: f64,
    pub gold: Label,
}

/// Exact ratios; `None` where the denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratios {
    pub precision: Option<Rational>,
    pub recall: Option<Rational>,
    pub f1: Option<Rational>,
    pub accuracy: Option<Rational>,
    pub specificity: Option<Rational>,
    pub fdr: Option<Rational>,
}

fn ratio(num: u64, den: u64) -> Option<Rational> {
    (den != 0).then(|| Rational::new(i128::from(num), i128::from(den)))
}

impl Ratios {
    pub fn of(cm: &ConfusionMatrix) -> Self {
        let ConfusionMatrix { tp, fp, fn_, tn } = *cm;
        Ratios {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            accuracy: ratio(tp + tn, cm.total()),
            specificity: ratio(tn, tn + fp),
            fdr: ratio(fp, tp + fp),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub confusion: ConfusionMatrix,
    pub n: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub specificity: f64,
    pub mcc: f64,
    pub balanced_accuracy: f64,
    pub fdr: f64,
    pub log_loss: Option<f64>,
    /// Metrics whose denominator was zero; they are reported as 0.
    pub degenerate: Vec<String>,
}

pub const LOG_LOSS_CLIP: (f64, f64) = (0.01, 0.99);

/// Mean binary cross-entropy of `P(Supported)`, clipped to `[0.01, 0.99]`.
pub fn log_loss(items: &[ScoredItem]) -> Option<f64> {
    if items.is_empty() {
        return None;
    }
    let total: f64 = items
        .iter()
        .map(|it| {
            let c = it.confidence.clamp(LOG_LOSS_CLIP.0, LOG_LOSS_CLIP.1);
            if it.gold.is_supported() {
                -libm::log(c)
            } else {
                -libm::log(1.0 - c)
            }
        })
        .sum();
    Some(total / items.len() as f64)
}

pub fn mcc(cm: &ConfusionMatrix) -> Option<f64> {
    let ConfusionMatrix { tp, fp, fn_, tn } = *cm;
    let num = i128::from(tp) * i128::from(tn) - i128::from(fp) * i128::from(fn_);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0) {
        return None;
    }
    let den = libm::sqrt(factors[0] as f64 * factors[1] as f64) * libm::sqrt(factors[2] as f64 * factors[3] as f64);
    Some(num as f64 / den)
}

pub fn compute_metrics(cm: &ConfusionMatrix, scored: Option<&[ScoredItem]>) -> MetricReport {
    let r = Ratios::of(cm);
    let mut degenerate = Vec::new();
    let mut val = |name: &str, v: Option<Rational>| match v {
        Some(x) => rational::to_f64(&x),
        None => {
            degenerate.push(String::from(name));
            0.0
        }
    };
    let precision = val("precision", r.precision);
    let recall = val("recall", r.recall);
    let f1 = val("f1", r.f1);
    let accuracy = val("accuracy", r.accuracy);
    let specificity = val("specificity", r.specificity);
    let fdr = val("fdr", r.fdr);
    let balanced = match (r.recall, r.specificity) {
        (Some(a), Some(b)) => rational::to_f64(&((a + b) / rational::int(2))),
        _ => {
            degenerate.push("balanced_accuracy".into());
            (recall + specificity) / 2.0
        }
    };
    let mcc = mcc(cm).unwrap_or_else(|| {
        degenerate.push("mcc".into());
        0.0
    });
    MetricReport {
        confusion: *cm,
        n: cm.total(),
        precision,
        recall,
        f1,
        accuracy,
        specificity,
        mcc,
        balanced_accuracy: balanced,
        fdr,
        log_loss: scored.and_then(log_loss),
        degenerate,
    }
}

/// Pairs every gold label with the verdict of the same id, across
/// documents, and computes the metric report.
pub fn evaluate(reports: &[VerificationReport], golds: &[GoldFile]) -> Result<MetricReport, MetricsError> {
    let by_doc: BTreeMap<&str, &VerificationReport> = reports.iter().map(|r| (r.doc_id.as_str(), r)).collect();
    let mut cm = ConfusionMatrix::default();
    let mut scored = Vec::new();
    for g in golds {
        let report = by_doc
            .get(g.doc_id.as_str())
            .ok_or_else(|| MetricsError::MissingReport(g.doc_id.clone()))?;
        let verdicts: BTreeMap<&PropositionId, &Verdict> =
            report.verdicts.iter().map(|v| (&v.proposition_id, v)).collect();
        for label in &g.labels {
            let v = verdicts
                .get(&label.id)
                .ok_or_else(|| MetricsError::MissingVerdict(label.id.clone()))?;
            cm.record(v.label, label.gold);
            scored.push(ScoredItem {
                confidence: v.confidence,
                gold: label.gold,
            });
        }
    }
    Ok(compute_metrics(&cm, Some(&scored)))
}

/// Two aligned columns, metric names left and values right.
pub fn render_table(m: &MetricReport) -> String {
    let c = &m.confusion;
    let mut rows: Vec<(&str, String)> = alloc::vec![
        ("TP", format!("{}", c.tp)),
        ("FP", format!("{}", c.fp)),
        ("FN", format!("{}", c.fn_)),
        ("TN", format!("{}", c.tn)),
        ("N", format!("{}", m.n)),
        ("Precision", format!("{:.4}", m.precision)),
        ("Recall", format!("{:.4}", m.recall)),
        ("F1", format!("{:.4}", m.f1)),
        ("Accuracy", format!("{:.4}", m.accuracy)),
        ("Specificity", format!("{:.4}", m.specificity)),
        ("MCC", format!("{:.4}", m.mcc)),
        ("Balanced accuracy", format!("{:.4}", m.balanced_accuracy)),
        ("FDR", format!("{:.4}", m.fdr)),
    ];
    if let Some(l) = m.log_loss {
        rows.push(("Log loss", format!("{l:.4}")));
    }
    let name_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let val_w = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (name, value) in rows {
        let _ = writeln!(out, "{name:<name_w$}  {value:>val_w$}");
    }
    if !m.degenerate.is_empty() {
        let _ = writeln!(out, "degenerate: {}", m.degenerate.join(", "));
    }
    out
}

#[cfg(test)]
mod tests;
