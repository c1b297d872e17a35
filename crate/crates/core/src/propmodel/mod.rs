//! Proposition data model shared by every stage of the pipeline.

mod time;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rational::{self, Rational};

pub use time::{Anchor, Endpoint, TimePoint, TimeRef, Timeline};

/// Canonical concept token: lowercase, no whitespace, words joined by `_`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    /// Normalizes `raw` into a concept token. Never fails; the result may be
    /// empty when `raw` holds no word characters.
    pub fn normalized(raw: &str) -> Self {
        ConceptId(normalize_token(raw))
    }

    /// Wraps an already-normalized token. Callers are expected to hold the
    /// normalization invariant; `validate` reports violations.
    pub fn from_normalized(token: String) -> Self {
        ConceptId(token)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Surface rendering with underscores turned back into spaces.
    pub fn surface(&self) -> String {
        self.0.replace('_', " ")
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lowercases, treats whitespace, `-`, `/` and `_` as word separators,
/// drops other punctuation and joins the words with `_`.
pub fn normalize_token(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for ch in raw.chars() {
        if ch.is_whitespace() || matches!(ch, '-' | '/' | '_') {
            pending_sep = !out.is_empty();
        } else if ch.is_alphanumeric() {
            for lc in ch.to_lowercase().filter(|c| c.is_alphanumeric()) {
                if pending_sep {
                    out.push('_');
                    pending_sep = false;
                }
                out.push(lc);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Diagnosis,
    Medication,
    Dosage,
    LabValue,
    Procedure,
    Treatment,
    Status,
    Event,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 8] = [
        AttributeKind::Diagnosis,
        AttributeKind::Medication,
        AttributeKind::Dosage,
        AttributeKind::LabValue,
        AttributeKind::Procedure,
        AttributeKind::Treatment,
        AttributeKind::Status,
        AttributeKind::Event,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::Diagnosis => "diagnosis",
            AttributeKind::Medication => "medication",
            AttributeKind::Dosage => "dosage",
            AttributeKind::LabValue => "lab_value",
            AttributeKind::Procedure => "procedure",
            AttributeKind::Treatment => "treatment",
            AttributeKind::Status => "status",
            AttributeKind::Event => "event",
        }
    }

    /// Kinds whose absence from a summary counts as an omission.
    pub fn is_key(self) -> bool {
        matches!(
            self,
            AttributeKind::Diagnosis
                | AttributeKind::Treatment
                | AttributeKind::Procedure
                | AttributeKind::Medication
        )
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown attribute kind `{0}`")]
pub struct UnknownAttributeKind(pub String);

impl FromStr for AttributeKind {
    type Err = UnknownAttributeKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = normalize_token(s);
        AttributeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| UnknownAttributeKind(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attribute {
    #[serde(rename = "attribute")]
    pub kind: AttributeKind,
    /// Phrase that triggered the attribute; empty for structured entries.
    #[serde(rename = "cue")]
    pub raw_cue: String,
}

impl Attribute {
    pub fn new(kind: AttributeKind, raw_cue: impl Into<String>) -> Self {
        Attribute {
            kind,
            raw_cue: raw_cue.into(),
        }
    }

    pub fn bare(kind: AttributeKind) -> Self {
        Attribute::new(kind, "")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Value {
    Quantity {
        #[serde(with = "rational::serde_str")]
        magnitude: Rational,
        unit: String,
    },
    /// Composite reading such as a blood pressure `120/80`.
    QuantityPair {
        #[serde(with = "rational::serde_str")]
        first: Rational,
        #[serde(with = "rational::serde_str")]
        second: Rational,
        unit: String,
    },
    Qualitative {
        label: String,
    },
    /// `count` occurrences per one `per` time unit.
    Frequency {
        #[serde(with = "rational::serde_str")]
        count: Rational,
        per: String,
    },
    Present {
        flag: bool,
    },
}

impl Value {
    pub fn present() -> Self {
        Value::Present { flag: true }
    }

    pub fn quantity(magnitude: Rational, unit: impl Into<String>) -> Self {
        Value::Quantity {
            magnitude,
            unit: unit.into(),
        }
    }

    pub fn is_value_bearing(&self) -> bool {
        !matches!(self, Value::Present { .. })
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Value::Quantity { .. } => "quantity",
            Value::QuantityPair { .. } => "quantity_pair",
            Value::Qualitative { .. } => "qualitative",
            Value::Frequency { .. } => "frequency",
            Value::Present { .. } => "present",
        }
    }
}

/// `(document id, index)` of a proposition; serialized as a two-element array.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, u32)", into = "(String, u32)")]
pub struct PropositionId {
    pub doc: String,
    pub index: u32,
}

impl PropositionId {
    pub fn new(doc: impl Into<String>, index: u32) -> Self {
        PropositionId {
            doc: doc.into(),
            index,
        }
    }
}

impl From<(String, u32)> for PropositionId {
    fn from((doc, index): (String, u32)) -> Self {
        PropositionId { doc, index }
    }
}

impl From<PropositionId> for (String, u32) {
    fn from(id: PropositionId) -> Self {
        (id.doc, id.index)
    }
}

impl fmt::Display for PropositionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc, self.index)
    }
}

/// `(sentence index, char start, char end)` in the source text. Structured
/// entries use their entry index and an empty character range.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(u32, u32, u32)", into = "(u32, u32, u32)")]
pub struct SourceSpan {
    pub sentence: u32,
    pub start: u32,
    pub end: u32,
}

impl From<(u32, u32, u32)> for SourceSpan {
    fn from((sentence, start, end): (u32, u32, u32)) -> Self {
        SourceSpan {
            sentence,
            start,
            end,
        }
    }
}

impl From<SourceSpan> for (u32, u32, u32) {
    fn from(s: SourceSpan) -> Self {
        (s.sentence, s.start, s.end)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Proposition {
    pub id: PropositionId,
    pub entity: ConceptId,
    #[serde(flatten)]
    pub attribute: Attribute,
    pub value: Value,
    pub time: TimeRef,
    #[serde(default)]
    pub negated: bool,
    pub span: SourceSpan,
}

impl Proposition {
    /// A non-negated proposition with a placeholder id and an empty span.
    pub fn new(entity: ConceptId, kind: AttributeKind, value: Value, time: TimeRef) -> Self {
        Proposition {
            id: PropositionId::new("", 0),
            entity,
            attribute: Attribute::bare(kind),
            value,
            time,
            negated: false,
            span: SourceSpan::default(),
        }
    }

    pub fn with_negated(mut self, negated: bool) -> Self {
        self.negated = negated;
        self
    }

    /// The `(entity, attribute kind)` pair the negation and presence checks
    /// compare on; ignores value, time and polarity.
    pub fn key(&self) -> (&ConceptId, AttributeKind) {
        (&self.entity, self.attribute.kind)
    }
}

pub fn proposition_key(p: &Proposition) -> (ConceptId, AttributeKind) {
    (p.entity.clone(), p.attribute.kind)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Summary,
    Ehr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropositionSet {
    pub doc_id: String,
    pub kind: DocKind,
    /// Length of stay in days when the document states both anchors.
    #[serde(default, with = "opt_rational")]
    pub discharge_day: Option<Rational>,
    pub items: Vec<Proposition>,
}

impl PropositionSet {
    /// A set whose ids are assigned in item order.
    pub fn new(doc_id: impl Into<String>, kind: DocKind, items: Vec<Proposition>) -> Self {
        let mut set = PropositionSet {
            doc_id: doc_id.into(),
            kind,
            discharge_day: None,
            items,
        };
        set.reindex();
        set
    }

    pub fn timeline(&self) -> Timeline {
        Timeline {
            discharge: self.discharge_day,
        }
    }

    pub fn get(&self, id: &PropositionId) -> Option<&Proposition> {
        if id.doc != self.doc_id {
            return None;
        }
        self.items
            .get(id.index as usize)
            .filter(|p| p.id.index == id.index)
    }

    /// Reassigns ids so they are contiguous from 0 under this set's doc id.
    pub fn reindex(&mut self) {
        for (i, p) in self.items.iter_mut().enumerate() {
            p.id = PropositionId::new(self.doc_id.clone(), i as u32);
        }
    }
}

mod opt_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_some(&rational::to_decimal_string(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "rational::serde_str")] Rational);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureCode {
    #[serde(rename = "NEGATION_FAIL")]
    Negation,
    #[serde(rename = "IMPLICATION_FAIL")]
    Implication,
    #[serde(rename = "TEMPORAL_FAIL")]
    Temporal,
    #[serde(rename = "EXCLUSIVITY_FAIL")]
    Exclusivity,
    #[serde(rename = "NUMERICAL_FAIL")]
    Numerical,
    #[serde(rename = "NO_EVIDENCE")]
    NoEvidence,
    /// Document-level omission code; never part of a verdict.
    #[serde(rename = "PRESENCE_FAIL")]
    Presence,
}

impl FailureCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureCode::Negation => "NEGATION_FAIL",
            FailureCode::Implication => "IMPLICATION_FAIL",
            FailureCode::Temporal => "TEMPORAL_FAIL",
            FailureCode::Exclusivity => "EXCLUSIVITY_FAIL",
            FailureCode::Numerical => "NUMERICAL_FAIL",
            FailureCode::NoEvidence => "NO_EVIDENCE",
            FailureCode::Presence => "PRESENCE_FAIL",
        }
    }
}

impl fmt::Display for FailureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Supported,
    NotSupported,
}

impl Label {
    pub fn is_supported(self) -> bool {
        self == Label::Supported
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(rename = "id")]
    pub proposition_id: PropositionId,
    pub label: Label,
    pub failure_codes: BTreeSet<FailureCode>,
    pub matched_ehr_id: Option<PropositionId>,
    pub similarity: f64,
    pub confidence: f64,
}

/// A broken invariant, rendered as `field.rule`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.field, self.rule)
    }
}

const fn violation(field: &'static str, rule: &'static str) -> Violation {
    Violation { field, rule }
}

/// Lists every type invariant `p` breaks; empty when well-formed.
pub fn validate(p: &Proposition) -> Vec<Violation> {
    let mut out = Vec::new();
    if p.id.doc.is_empty() {
        out.push(violation("id", "doc_nonempty"));
    }
    if p.entity.is_empty() {
        out.push(violation("entity", "nonempty"));
    } else if normalize_token(p.entity.as_str()) != p.entity.as_str() {
        out.push(violation("entity", "normalized"));
    }
    match &p.value {
        Value::Quantity { unit, .. } | Value::QuantityPair { unit, .. } if unit.trim() != unit => {
            out.push(violation("value", "unit_trimmed"));
        }
        Value::Qualitative { label } if label.trim().is_empty() => {
            out.push(violation("value", "label_nonempty"));
        }
        Value::Frequency { count, per } => {
            if *count <= rational::int(0) {
                out.push(violation("value", "frequency_positive"));
            }
            if per.trim().is_empty() {
                out.push(violation("value", "frequency_unit_nonempty"));
            }
        }
        _ => {}
    }
    if let TimeRef::Interval { start, end } = &p.time {
        if !time::interval_ordered(start, end) {
            out.push(violation("time", "interval_order"));
        }
    }
    if p.span.start > p.span.end {
        out.push(violation("span", "order"));
    }
    out
}

/// Set-level invariants: shared doc id, contiguous indices, valid members.
pub fn validate_set(set: &PropositionSet) -> Vec<(u32, Violation)> {
    let mut out = Vec::new();
    for (i, p) in set.items.iter().enumerate() {
        let i = i as u32;
        if p.id.doc != set.doc_id {
            out.push((i, violation("id", "shared_doc")));
        }
        if p.id.index != i {
            out.push((i, violation("id", "contiguous")));
        }
        out.extend(validate(p).into_iter().map(|v| (i, v)));
    }
    out
}
