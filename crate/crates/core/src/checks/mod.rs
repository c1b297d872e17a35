//! The six consistency checks and the verdict rule.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::align::MatchResult;
use crate::kb::KnowledgeBase;
use crate::propmodel::{
    AttributeKind, ConceptId, FailureCode, Label, Proposition, PropositionId, PropositionSet, Value, Verdict,
};
use crate::rational::{self, Rational};

/// Default relative tolerance for numeric comparison.
pub const DEFAULT_TAU_NUM: f64 = 1e-9;

/// Warning code for an implication whose consequent the record never
/// mentions either.
pub const IMPLICATION_UNGROUNDED: &str = "IMPLICATION_UNGROUNDED";

pub const CONFIDENCE_MIN: f64 = 0.01;
pub const CONFIDENCE_MAX: f64 = 0.99;

#[derive(Clone, Copy, Debug)]
pub struct CheckContext<'a> {
    pub summary: &'a PropositionSet,
    pub ehr: &'a PropositionSet,
    /// One result per summary proposition, in summary order.
    pub matches: &'a [MatchResult],
    pub kb: &'a KnowledgeBase,
    pub tau_num: f64,
}

/// A key record fact with no summary counterpart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Omission {
    pub ehr_id: PropositionId,
    pub entity: ConceptId,
    pub attribute: AttributeKind,
    pub code: FailureCode,
}

/// A failure attached to one summary proposition.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Finding {
    pub proposition: PropositionId,
    pub code: FailureCode,
}

/// A non-verdict observation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub proposition_id: PropositionId,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub tau_match: f64,
    pub tau_num: f64,
    pub embedder: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub doc_id: String,
    pub verdicts: Vec<Verdict>,
    pub omissions: Vec<Omission>,
    #[serde(default)]
    pub warnings: Vec<Warning>,
    pub params: ReportParams,
}

/// Output of [`assign_verdicts`].
#[derive(Clone, Debug, PartialEq)]
pub struct Assessment {
    pub verdicts: Vec<Verdict>,
    pub omissions: Vec<Omission>,
    pub warnings: Vec<Warning>,
}

pub fn check_negation(s: &Proposition, e: &Proposition) -> Option<FailureCode> {
    (s.key() == e.key() && s.negated != e.negated).then_some(FailureCode::Negation)
}

/// `|a - b| ≤ tau · max(|a|, |b|)`, with exact equality always passing.
fn within(a: &Rational, b: &Rational, tau: f64) -> bool {
    let diff = (a - b).abs();
    if diff == rational::int(0) {
        return true;
    }
    let scale = if a.abs() > b.abs() { a.abs() } else { b.abs() };
    rational::to_f64(&diff) <= tau * rational::to_f64(&scale)
}

/// Occurrences per day, when `per` is a time unit.
fn rate(count: &Rational, per: &str, kb: &KnowledgeBase) -> Option<Rational> {
    kb.units()
        .get(per)
        .filter(|d| d.dimension == "time")
        .map(|d| count / d.factor_to_base)
}

pub fn check_numerical(s: &Proposition, e: &Proposition, kb: &KnowledgeBase, tau_num: f64) -> Option<FailureCode> {
    if s.key() != e.key() || !s.value.is_value_bearing() || !e.value.is_value_bearing() {
        return None;
    }
    let convert = |m: &Rational, from: &str, to: &str| {
        if from == to {
            Some(*m)
        } else {
            kb.convert_unit(*m, from, to).ok()
        }
    };
    let ok = match (&s.value, &e.value) {
        (Value::Quantity { magnitude: a, unit: ua }, Value::Quantity { magnitude: b, unit: ub }) => {
            convert(a, ua, ub).is_some_and(|a| within(&a, b, tau_num))
        }
        (
            Value::QuantityPair { first: a1, second: a2, unit: ua },
            Value::QuantityPair { first: b1, second: b2, unit: ub },
        ) => {
            convert(a1, ua, ub).is_some_and(|a| within(&a, b1, tau_num))
                && convert(a2, ua, ub).is_some_and(|a| within(&a, b2, tau_num))
        }
        (Value::Frequency { count: a, per: pa }, Value::Frequency { count: b, per: pb }) => {
            match (rate(a, pa, kb), rate(b, pb, kb)) {
                (Some(ra), Some(rb)) => within(&ra, &rb, tau_num),
                _ => pa == pb && within(a, b, tau_num),
            }
        }
        (Value::Qualitative { label: a }, Value::Qualitative { label: b }) => {
            kb.normalize_concept(a) == kb.normalize_concept(b)
        }
        _ => false,
    };
    (!ok).then_some(FailureCode::Numerical)
}

/// Fires when the summary asserts an antecedent, never mentions its
/// consequent (at any polarity), and the record asserts the consequent.
/// Rules whose consequent the record lacks too become warnings.
pub fn check_implication(summary: &PropositionSet, ehr: &PropositionSet, kb: &KnowledgeBase) -> (Vec<Finding>, Vec<Warning>) {
    let mut findings = Vec::new();
    let mut warnings = Vec::new();
    for rule in kb.implications() {
        let mentioned = summary.items.iter().any(|p| kb.is_member(&p.entity, &rule.consequent));
        if mentioned {
            continue;
        }
        let grounded = ehr
            .items
            .iter()
            .any(|p| !p.negated && kb.is_member(&p.entity, &rule.consequent));
        for p in summary.items.iter().filter(|p| !p.negated && kb.is_member(&p.entity, &rule.antecedent)) {
            if grounded {
                findings.push(Finding {
                    proposition: p.id.clone(),
                    code: FailureCode::Implication,
                });
            } else {
                warnings.push(Warning {
                    code: IMPLICATION_UNGROUNDED.into(),
                    proposition_id: p.id.clone(),
                    message: format!(
                        "{} implies {}, which neither document mentions",
                        rule.antecedent, rule.consequent
                    ),
                });
            }
        }
    }
    (findings, warnings)
}

/// Every pair of matched summary propositions whose four times are known
/// must order the same way in both documents. Only decidable orderings
/// are compared; a violation marks both propositions.
pub fn check_temporal(summary: &PropositionSet, ehr: &PropositionSet, matches: &[MatchResult]) -> Vec<Finding> {
    let (ts, te) = (summary.timeline(), ehr.timeline());
    let pairs: Vec<(&Proposition, &Proposition)> = matches
        .iter()
        .filter(|m| m.matched)
        .filter_map(|m| Some((summary.get(&m.summary_id)?, ehr.get(m.ehr_id.as_ref()?)?)))
        .filter(|(s, e)| s.time.is_known() && e.time.is_known())
        .collect();
    let mut out = Vec::new();
    for (i, (si, ei)) in pairs.iter().enumerate() {
        for (sj, ej) in &pairs[i + 1..] {
            if ei.id == ej.id {
                continue;
            }
            let disagree = |a: Option<bool>, b: Option<bool>| matches!((a, b), (Some(x), Some(y)) if x != y);
            if disagree(ts.precedes(&si.time, &sj.time), te.precedes(&ei.time, &ej.time))
                || disagree(ts.precedes(&sj.time, &si.time), te.precedes(&ej.time, &ei.time))
            {
                for p in [si, sj] {
                    out.push(Finding {
                        proposition: p.id.clone(),
                        code: FailureCode::Temporal,
                    });
                }
            }
        }
    }
    out
}

/// Asserted summary states registered as mutually exclusive that hold at
/// the same time.
pub fn check_exclusivity(summary: &PropositionSet, kb: &KnowledgeBase) -> Vec<Finding> {
    let tl = summary.timeline();
    let asserted: Vec<&Proposition> = summary.items.iter().filter(|p| !p.negated).collect();
    let mut out = Vec::new();
    for (i, a) in asserted.iter().enumerate() {
        for b in &asserted[i + 1..] {
            let together = tl.compare(&a.time, &b.time) == Some(core::cmp::Ordering::Equal) || tl.overlaps(&a.time, &b.time);
            if together && kb.are_exclusive(&a.entity, &b.entity) {
                for p in [a, b] {
                    out.push(Finding {
                        proposition: p.id.clone(),
                        code: FailureCode::Exclusivity,
                    });
                }
            }
        }
    }
    out
}

/// Same concept, or one a member of the other when the class is not a
/// whole category such as `medication`.
pub fn equivalent_entities(a: &ConceptId, b: &ConceptId, kb: &KnowledgeBase) -> bool {
    a == b
        || (kb.is_member(a, b) && !kb.is_category_root(b))
        || (kb.is_member(b, a) && !kb.is_category_root(a))
}

/// Asserted key facts of the record with no summary mention of the same
/// kind and an equivalent entity.
pub fn check_presence(summary: &PropositionSet, ehr: &PropositionSet, kb: &KnowledgeBase) -> Vec<Omission> {
    ehr.items
        .iter()
        .filter(|e| !e.negated && e.attribute.kind.is_key())
        .filter(|e| {
            !summary
                .items
                .iter()
                .any(|s| s.attribute.kind == e.attribute.kind && equivalent_entities(&s.entity, &e.entity, kb))
        })
        .map(|e| Omission {
            ehr_id: e.id.clone(),
            entity: e.entity.clone(),
            attribute: e.attribute.kind,
            code: FailureCode::Presence,
        })
        .collect()
}

pub fn confidence(label: Label, score: f64, codes: usize) -> f64 {
    let raw = match label {
        Label::Supported => score,
        Label::NotSupported => score * libm::pow(0.5, codes as f64),
    };
    raw.clamp(CONFIDENCE_MIN, CONFIDENCE_MAX)
}

/// Runs every check and labels each summary proposition.
pub fn assign_verdicts(ctx: &CheckContext<'_>) -> Assessment {
    let CheckContext {
        summary,
        ehr,
        matches,
        kb,
        tau_num,
    } = *ctx;
    let mut codes: BTreeMap<PropositionId, BTreeSet<FailureCode>> = BTreeMap::new();
    let (implication, warnings) = check_implication(summary, ehr, kb);
    let findings = implication
        .into_iter()
        .chain(check_exclusivity(summary, kb))
        .chain(check_temporal(summary, ehr, matches));
    for f in findings {
        codes.entry(f.proposition).or_default().insert(f.code);
    }

    let by_id: BTreeMap<&PropositionId, &MatchResult> = matches.iter().map(|m| (&m.summary_id, m)).collect();
    let mut verdicts = Vec::with_capacity(summary.items.len());
    for s in &summary.items {
        let m = by_id.get(&s.id);
        let counterpart = m.filter(|m| m.matched).and_then(|m| ehr.get(m.ehr_id.as_ref()?));
        let mut set = codes.remove(&s.id).unwrap_or_default();
        match counterpart {
            Some(e) => {
                set.extend(check_negation(s, e));
                set.extend(check_numerical(s, e, kb, tau_num));
            }
            None => {
                set.insert(FailureCode::NoEvidence);
            }
        }
        let label = if set.is_empty() { Label::Supported } else { Label::NotSupported };
        let score = m.map_or(0.0, |m| m.score);
        verdicts.push(Verdict {
            proposition_id: s.id.clone(),
            label,
            confidence: confidence(label, score, set.len()),
            failure_codes: set,
            matched_ehr_id: counterpart.map(|e| e.id.clone()),
            similarity: score,
        });
    }
    Assessment {
        verdicts,
        omissions: check_presence(summary, ehr, kb),
        warnings,
    }
}
