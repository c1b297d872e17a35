use super::*;
use alloc::collections::BTreeSet;
use alloc::vec;
use proptest::prelude::*;

use crate::propmodel::FailureCode;

const PUBLISHED: [(&str, f64); 8] = [
    ("precision", 0.8904),
    ("recall", 0.8234),
    ("f1", 0.8556),
    ("accuracy", 0.7913),
    ("specificity", 0.6949),
    ("balanced_accuracy", 0.7591),
    ("mcc", 0.4866),
    ("fdr", 0.1096),
];

fn field(m: &MetricReport, name: &str) -> f64 {
    match name {
        "precision" => m.precision,
        "recall" => m.recall,
        "f1" => m.f1,
        "accuracy" => m.accuracy,
        "specificity" => m.specificity,
        "balanced_accuracy" => m.balanced_accuracy,
        "mcc" => m.mcc,
        "fdr" => m.fdr,
        _ => unreachable!(),
    }
}

fn round4(x: f64) -> f64 {
    libm::round(x * 1e4) / 1e4
}

/// Solves the counts from rounded precision, recall and accuracy over `n`
/// items: tp + tn = A·n, fp = tp(1/P - 1), fn = tp(1/R - 1). Candidates
/// near the real-valued solution are kept when they reproduce all three
/// rounded ratios.
fn invert(p: f64, r: f64, a: f64, n: u64) -> Vec<ConfusionMatrix> {
    let nf = n as f64;
    let tp0 = nf * (1.0 - a) / ((1.0 / p - 1.0) + (1.0 / r - 1.0));
    let mut out = Vec::new();
    let lo = (tp0 as i64 - 20).max(0) as u64;
    for tp in lo..(tp0 as u64 + 20) {
        for fp in 0..n.saturating_sub(tp) {
            let prec = tp as f64 / (tp + fp) as f64;
            if round4(prec) != p {
                continue;
            }
            for fn_ in 0..n.saturating_sub(tp + fp) {
                let tn = n - tp - fp - fn_;
                let rec = tp as f64 / (tp + fn_) as f64;
                let acc = (tp + tn) as f64 / nf;
                if round4(rec) == r && round4(acc) == a {
                    out.push(ConfusionMatrix::new(tp, fp, fn_, tn));
                }
            }
        }
    }
    out
}

#[test]
fn inversion_recovers_published_counts() {
    let found = invert(0.8904, 0.8234, 0.7913, 3786);
    assert_eq!(found, vec![ConfusionMatrix::new(2340, 288, 502, 656)]);
}

#[test]
fn published_table_values_reproduce() {
    let m = compute_metrics(&ConfusionMatrix::new(2340, 288, 502, 656), None);
    for (name, want) in PUBLISHED {
        let got = field(&m, name);
        assert!((got - want).abs() <= 5e-4, "{name}: {got} vs {want}");
    }
    assert_eq!(m.n, 3786);
    assert!(m.degenerate.is_empty());
    assert_eq!(m.log_loss, None);
}

#[test]
fn hand_formulas_on_small_matrix() {
    // tp=3 fp=1 fn=2 tn=4
    let m = compute_metrics(&ConfusionMatrix::new(3, 1, 2, 4), None);
    assert_eq!(m.precision, 0.75);
    assert_eq!(m.recall, 0.6);
    assert!((m.f1 - 6.0 / 9.0).abs() < 1e-15);
    assert_eq!(m.accuracy, 0.7);
    assert_eq!(m.specificity, 0.8);
    assert!((m.balanced_accuracy - 0.7).abs() < 1e-15);
    assert_eq!(m.fdr, 0.25);
    let want_mcc = (12.0 - 2.0) / (4.0f64 * 5.0 * 5.0 * 6.0).sqrt();
    assert!((m.mcc - want_mcc).abs() < 1e-15);
}

#[test]
fn log_loss_near_perfect() {
    let items = [
        ScoredItem {
            confidence: 0.99,
            gold: Label::Supported,
        },
        ScoredItem {
            confidence: 0.01,
            gold: Label::NotSupported,
        },
    ];
    let m = compute_metrics(&ConfusionMatrix::new(1, 0, 0, 1), Some(&items));
    let l = m.log_loss.unwrap();
    assert!((l - 0.01005).abs() < 1e-5, "{l}");
}

#[test]
fn log_loss_clips_extreme_confidence() {
    let wrong = [ScoredItem {
        confidence: 0.0,
        gold: Label::Supported,
    }];
    assert!((log_loss(&wrong).unwrap() - (-libm::log(0.01))).abs() < 1e-12);
    assert_eq!(log_loss(&[]), None);
}

#[test]
fn zero_denominators_are_flagged() {
    let m = compute_metrics(&ConfusionMatrix::new(0, 0, 0, 5), None);
    assert_eq!(m.precision, 0.0);
    assert_eq!(m.recall, 0.0);
    assert_eq!(m.specificity, 1.0);
    for name in ["precision", "recall", "f1", "fdr", "mcc", "balanced_accuracy"] {
        assert!(m.degenerate.iter().any(|d| d == name), "{name}");
    }
    assert!(!m.degenerate.iter().any(|d| d == "accuracy"));
    let empty = compute_metrics(&ConfusionMatrix::default(), None);
    assert!(empty.degenerate.iter().any(|d| d == "accuracy"));
}

fn verdict(doc: &str, idx: u32, label: Label) -> Verdict {
    let mut codes = BTreeSet::new();
    if !label.is_supported() {
        codes.insert(FailureCode::Numerical);
    }
    Verdict {
        proposition_id: PropositionId::new(doc, idx),
        label,
        confidence: 0.5,
        failure_codes: codes,
        matched_ehr_id: None,
        similarity: 0.5,
    }
}

fn gold(doc: &str, idx: u32, label: Label) -> GoldLabel {
    GoldLabel {
        id: PropositionId::new(doc, idx),
        gold: label,
    }
}

#[test]
fn misaligned_ids_are_rejected() {
    let p = [verdict("s", 0, Label::Supported), verdict("s", 1, Label::Supported)];
    let g = [gold("s", 0, Label::Supported), gold("s", 2, Label::Supported)];
    assert!(matches!(confusion(&p, &g), Err(MetricsError::IdMismatch { index: 1, .. })));
    assert!(matches!(
        confusion(&p[..1], &g),
        Err(MetricsError::LengthMismatch { predicted: 1, gold: 2 })
    ));
}

#[test]
fn evaluate_joins_by_id() {
    let report = VerificationReport {
        doc_id: "s".into(),
        verdicts: vec![verdict("s", 1, Label::NotSupported), verdict("s", 0, Label::Supported)],
        omissions: vec![],
        warnings: vec![],
        params: crate::checks::ReportParams {
            tau_match: 0.5,
            tau_num: 1e-9,
            embedder: "x".into(),
        },
    };
    let g = GoldFile {
        doc_id: "s".into(),
        labels: vec![gold("s", 0, Label::Supported), gold("s", 1, Label::Supported)],
        expected: vec![],
    };
    let m = evaluate(&[report.clone()], &[g.clone()]).unwrap();
    assert_eq!(m.confusion, ConfusionMatrix::new(1, 0, 1, 0));
    let mut other = g.clone();
    other.doc_id = "t".into();
    assert!(matches!(evaluate(&[report.clone()], &[other]), Err(MetricsError::MissingReport(_))));
    let mut extra = g;
    extra.labels.push(gold("s", 7, Label::Supported));
    assert!(matches!(evaluate(&[report], &[extra]), Err(MetricsError::MissingVerdict(_))));
}

#[test]
fn table_columns_align() {
    let m = compute_metrics(&ConfusionMatrix::new(2340, 288, 502, 656), None);
    let t = render_table(&m);
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines.len(), 13);
    let width = lines[0].len();
    assert!(lines.iter().all(|l| l.len() == width));
    assert!(t.contains("Precision") && t.contains("0.8904"));
}

#[test]
fn report_json_uses_fn_key() {
    let v = serde_json::to_value(ConfusionMatrix::new(1, 2, 3, 4)).unwrap();
    assert_eq!(v, serde_json::json!({"tp": 1, "fp": 2, "fn": 3, "tn": 4}));
}

fn label_of(b: bool) -> Label {
    if b {
        Label::Supported
    } else {
        Label::NotSupported
    }
}

proptest! {
    #[test]
    fn counts_match_brute_force(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..200)) {
        let p: Vec<Verdict> = pairs.iter().enumerate().map(|(i, (a, _))| verdict("d", i as u32, label_of(*a))).collect();
        let g: Vec<GoldLabel> = pairs.iter().enumerate().map(|(i, (_, b))| gold("d", i as u32, label_of(*b))).collect();
        let cm = confusion(&p, &g).unwrap();
        let count = |x: bool, y: bool| pairs.iter().filter(|(a, b)| *a == x && *b == y).count() as u64;
        prop_assert_eq!(cm, ConfusionMatrix::new(count(true, true), count(true, false), count(false, true), count(false, false)));
    }

    #[test]
    fn fdr_complements_precision(tp in 0u64..5000, fp in 0u64..5000, fn_ in 0u64..5000, tn in 0u64..5000) {
        let r = Ratios::of(&ConfusionMatrix::new(tp, fp, fn_, tn));
        if let (Some(p), Some(f)) = (r.precision, r.fdr) {
            prop_assert_eq!(p + f, rational::int(1));
        } else {
            prop_assert_eq!(tp + fp, 0);
        }
    }

    #[test]
    fn mcc_is_class_symmetric(tp in 0u64..5000, fp in 0u64..5000, fn_ in 0u64..5000, tn in 0u64..5000) {
        let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
        let a = compute_metrics(&cm, None).mcc;
        let b = compute_metrics(&cm.swapped(), None).mcc;
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn balanced_accuracy_between_components(tp in 0u64..5000, fp in 0u64..5000, fn_ in 0u64..5000, tn in 0u64..5000) {
        let m = compute_metrics(&ConfusionMatrix::new(tp, fp, fn_, tn), None);
        let lo = m.recall.min(m.specificity);
        let hi = m.recall.max(m.specificity);
        prop_assert!(m.balanced_accuracy >= lo - 1e-15 && m.balanced_accuracy <= hi + 1e-15);
    }
}
