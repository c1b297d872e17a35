//! Rule-based decomposition of documents into atomic propositions.
//!
//! Free text runs sentence segmentation, a longest-match lexicon scan for
//! entities, cue-based attribute inference, value parsing, time
//! normalization and negation detection. Structured entries map one to one
//! onto propositions.

mod segment;
mod time;
mod tokens;
mod values;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use segment::{segment_sentences, Sentence};
pub use time::{normalize_time, time_phrase, TimeContext};
pub use values::DEFAULT_PAIR_UNIT;

use crate::kb::{EntityCategory, KnowledgeBase};
use crate::propmodel::{
    Attribute, AttributeKind, ConceptId, DocKind, Proposition, PropositionId, PropositionSet,
    SourceSpan, TimeRef, Value,
};
use crate::rational::{self, Rational};
use tokens::{joinable_gap, tokenize, Tok, Token};
use values::{scan_values, Class, ValueExpr};

/// Input document: free text, structured entries, or both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub kind: DocKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured: Option<Vec<StructuredEntry>>,
    /// ISO date of admission.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admission: Option<String>,
    /// ISO date of discharge, or the length of stay in days.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discharge: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredEntry {
    pub entity: String,
    pub attribute: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<RawValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<RawTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negated: Option<bool>,
}

/// A structured value: a phrase (`"20 mg"`, `"120/80"`, `"twice daily"`,
/// `"positive"`), a bare number, or a tagged value object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Text(String),
    Number(f64),
    Tagged(Value),
}

/// A structured time: a phrase understood by [`normalize_time`] (plus the
/// bare words `admission`, `discharge`, `unknown`) or a tagged time object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawTime {
    Text(String),
    Tagged(TimeRef),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("document `{doc_id}` has neither text nor structured entries")]
    EmptyDocument { doc_id: String },
    #[error("document `{doc_id}`, entry {index}: {reason}")]
    InvalidEntry {
        doc_id: String,
        index: usize,
        reason: String,
    },
    #[error("document `{doc_id}`: invalid {field} `{value}`")]
    InvalidDate {
        doc_id: String,
        field: &'static str,
        value: String,
    },
}

impl Document {
    pub fn from_text(doc_id: impl Into<String>, kind: DocKind, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            kind,
            text: Some(text.into()),
            structured: None,
            admission: None,
            discharge: None,
        }
    }

    pub fn from_entries(doc_id: impl Into<String>, kind: DocKind, entries: Vec<StructuredEntry>) -> Self {
        Document {
            doc_id: doc_id.into(),
            kind,
            text: None,
            structured: Some(entries),
            admission: None,
            discharge: None,
        }
    }

    fn admission_date(&self) -> Result<Option<NaiveDate>, ExtractError> {
        self.admission
            .as_deref()
            .map(|s| {
                NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| ExtractError::InvalidDate {
                    doc_id: self.doc_id.clone(),
                    field: "admission",
                    value: s.to_string(),
                })
            })
            .transpose()
    }

    /// Length of stay in days: a date difference, or a plain number.
    fn discharge_day(&self, admission: Option<NaiveDate>) -> Result<Option<Rational>, ExtractError> {
        let Some(raw) = self.discharge.as_deref() else {
            return Ok(None);
        };
        let raw = raw.trim();
        let err = || ExtractError::InvalidDate {
            doc_id: self.doc_id.clone(),
            field: "discharge",
            value: raw.to_string(),
        };
        if let Ok(date) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
            return match admission {
                Some(adm) if date >= adm => Ok(Some(rational::int(i128::from((date - adm).num_days())))),
                Some(_) => Err(err()),
                None => Ok(None),
            };
        }
        match rational::parse(raw) {
            Some(d) if d >= rational::int(0) => Ok(Some(d)),
            _ => Err(err()),
        }
    }
}

impl StructuredEntry {
    pub fn new(entity: &str, attribute: AttributeKind) -> Self {
        StructuredEntry {
            entity: entity.to_string(),
            attribute: attribute.as_str().to_string(),
            value: None,
            unit: None,
            time: None,
            negated: None,
        }
    }

    pub fn value(mut self, v: &str) -> Self {
        self.value = Some(RawValue::Text(v.to_string()));
        self
    }

    pub fn time(mut self, t: &str) -> Self {
        self.time = Some(RawTime::Text(t.to_string()));
        self
    }

    pub fn negated(mut self, n: bool) -> Self {
        self.negated = Some(n);
        self
    }
}

/// Decomposes a document into its proposition set. Structured entries come
/// first, in entry order, followed by propositions from the text in
/// sentence order.
pub fn extract_propositions(doc: &Document, kb: &KnowledgeBase) -> Result<PropositionSet, ExtractError> {
    let has_text = doc.text.as_deref().is_some_and(|t| !t.trim().is_empty());
    let has_entries = doc.structured.as_ref().is_some_and(|e| !e.is_empty());
    if !has_text && !has_entries {
        return Err(ExtractError::EmptyDocument {
            doc_id: doc.doc_id.clone(),
        });
    }
    let admission = doc.admission_date()?;
    let ctx = TimeContext { admission };
    let mut set = PropositionSet {
        doc_id: doc.doc_id.clone(),
        kind: doc.kind,
        discharge_day: doc.discharge_day(admission)?,
        items: Vec::new(),
    };
    for (index, entry) in doc.structured.iter().flatten().enumerate() {
        let props = from_entry(entry, index, kb, &ctx).map_err(|reason| ExtractError::InvalidEntry {
            doc_id: doc.doc_id.clone(),
            index,
            reason,
        })?;
        set.items.extend(props);
    }
    if let Some(text) = doc.text.as_deref() {
        extract_text(text, kb, &ctx, &mut set.items);
    }
    set.reindex();
    Ok(set)
}

/// One proposition per atomic reading of the entry's value, so
/// `"20 mg daily"` yields a dose and a frequency.
fn from_entry(e: &StructuredEntry, index: usize, kb: &KnowledgeBase, ctx: &TimeContext) -> Result<Vec<Proposition>, String> {
    let entity = kb.normalize_concept(&e.entity);
    if entity.is_empty() {
        return Err(format!("entity `{}` has no word characters", e.entity));
    }
    let kind: AttributeKind = e.attribute.parse().map_err(|err| format!("{err}"))?;
    let unit = e.unit.as_deref().map(str::trim);
    let values = match &e.value {
        None => alloc::vec![Value::present()],
        Some(RawValue::Tagged(v)) => alloc::vec![v.clone()],
        Some(RawValue::Number(x)) => {
            let m = rational::from_f64(*x).ok_or_else(|| format!("non-finite value {x}"))?;
            alloc::vec![Value::quantity(m, unit.unwrap_or(""))]
        }
        Some(RawValue::Text(s)) => parse_value_phrase(s, unit, kb),
    };
    let time = match &e.time {
        None => TimeRef::Unknown,
        Some(RawTime::Tagged(t)) => t.clone(),
        Some(RawTime::Text(s)) => parse_time_phrase(s, ctx)?,
    };
    let negated = e.negated.unwrap_or(false);
    Ok(values
        .into_iter()
        .map(|value| Proposition {
            id: PropositionId::new("", 0),
            entity: entity.clone(),
            attribute: Attribute::bare(kind),
            value,
            time: time.clone(),
            negated,
            span: SourceSpan {
                sentence: index as u32,
                start: 0,
                end: 0,
            },
        })
        .collect())
}

/// Parses a structured value phrase into its atomic readings: the leading
/// quantity or pair and the leading frequency, else a single qualitative
/// label or presence flag. A separate `unit` applies to bare numbers and
/// pairs.
pub fn parse_value_phrase(s: &str, unit: Option<&str>, kb: &KnowledgeBase) -> Vec<Value> {
    let trimmed = s.trim();
    match trimmed.to_lowercase().as_str() {
        "" | "present" | "yes" | "true" => return alloc::vec![Value::present()],
        "absent" | "no" | "false" => return alloc::vec![Value::Present { flag: false }],
        _ => {}
    }
    let toks = tokenize(trimmed);
    let taken = alloc::vec![false; toks.len()];
    let exprs = scan_values(trimmed, &toks, &taken, kb);
    let quant = exprs.iter().find(|e| matches!(e.class, Class::Pair | Class::Quantity));
    let freq = exprs.iter().find(|e| e.class == Class::Frequency);
    let mut out = Vec::new();
    if let Some(q) = quant {
        let mut v = q.value.clone();
        if let Some(u) = unit.filter(|u| !u.is_empty()) {
            match &mut v {
                Value::Quantity { unit: slot, .. } if slot.is_empty() => *slot = u.to_string(),
                Value::QuantityPair { unit: slot, .. } if q.last == q.first + 2 => *slot = u.to_string(),
                _ => {}
            }
        }
        out.push(v);
    }
    out.extend(freq.map(|f| f.value.clone()));
    if out.is_empty() {
        out.push(match exprs.first() {
            Some(e) => e.value.clone(),
            None => Value::Qualitative {
                label: crate::propmodel::normalize_token(trimmed),
            },
        });
    }
    out
}

fn parse_time_phrase(s: &str, ctx: &TimeContext) -> Result<TimeRef, String> {
    let t = s.trim().to_lowercase();
    match t.as_str() {
        "" | "unknown" => return Ok(TimeRef::Unknown),
        "admission" => return Ok(TimeRef::Marker(crate::propmodel::Anchor::Admission)),
        "discharge" => return Ok(TimeRef::Marker(crate::propmodel::Anchor::Discharge)),
        _ => {}
    }
    match normalize_time(&t, ctx) {
        TimeRef::Unknown => Err(format!("unrecognized time `{s}`")),
        r => Ok(r),
    }
}

/// An entity mention: inclusive token range and its concept.
#[derive(Clone, Debug)]
struct Mention {
    first: usize,
    last: usize,
    concept: ConceptId,
}

/// Longest-match, left-to-right, non-overlapping lexicon scan.
fn scan_entities(text: &str, toks: &[Token], kb: &KnowledgeBase) -> Vec<Mention> {
    let mut out = Vec::new();
    let max = kb.max_entity_words();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].kind != Tok::Word {
            i += 1;
            continue;
        }
        // Word/number token indices reachable through joinable gaps.
        let mut run = alloc::vec![i];
        let mut j = i + 1;
        while run.len() < max && j < toks.len() {
            if toks[j].is_wordlike() && joinable_gap(&text[toks[*run.last().unwrap()].end..toks[j].start]) {
                run.push(j);
                j += 1;
            } else if toks[j].is_punct('-') || toks[j].is_punct('/') {
                j += 1;
            } else {
                break;
            }
        }
        let found = (1..=run.len()).rev().find_map(|n| {
            let last = run[n - 1];
            let key = crate::propmodel::normalize_token(&text[toks[i].start..toks[last].end]);
            kb.entity_form(&key).map(|c| (last, c.clone()))
        });
        match found {
            Some((last, concept)) => {
                out.push(Mention { first: i, last, concept });
                i = last + 1;
            }
            None => i += 1,
        }
    }
    out
}

/// A matched phrase: inclusive token range plus payload.
#[derive(Clone, Debug)]
struct Hit<T> {
    first: usize,
    last: usize,
    what: T,
}

/// Longest phrase occurrences among untaken word tokens, left to right.
fn scan_phrases<'k, T: Copy>(toks: &[Token], taken: &[bool], phrases: &'k [(Vec<String>, T)]) -> Vec<Hit<T>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let hit = phrases.iter().find(|(words, _)| {
            words.iter().enumerate().all(|(k, w)| {
                toks.get(i + k)
                    .is_some_and(|t| !taken[i + k] && t.kind == Tok::Word && t.norm == *w)
            })
        });
        match hit {
            Some((words, what)) => {
                out.push(Hit {
                    first: i,
                    last: i + words.len() - 1,
                    what: *what,
                });
                i += words.len();
            }
            None => i += 1,
        }
    }
    out
}

const SCOPE_BREAKERS: [&str; 11] = [
    "but", "however", "although", "though", "except", "yet", "which", "who", "whereas", "while", "then",
];

fn breaks_scope(t: &Token) -> bool {
    (t.kind == Tok::Punct && matches!(t.norm.as_str(), ";" | ":" | "." | "(" | ")"))
        || (t.kind == Tok::Word && SCOPE_BREAKERS.contains(&t.norm.as_str()))
}

/// Words after which a preceding attribute cue no longer applies:
/// `given aspirin for fever`.
fn ends_cue_scope(t: &Token) -> bool {
    breaks_scope(t)
        || (t.kind == Tok::Word
            && matches!(t.norm.as_str(), "for" | "due" | "because" | "secondary" | "after" | "with"))
}

const NEGATION_WINDOW: usize = 5;

/// Negation of the mention at tokens `first..=last`: a cue within the five
/// word tokens before it (stopping at scope breakers and attribute cues),
/// or a trailing `was not` / `ruled out`.
fn negated(toks: &[Token], first: usize, last: usize, cue_tokens: &[bool], kb: &KnowledgeBase) -> bool {
    let mut window: Vec<&str> = Vec::new();
    let mut i = first;
    while i > 0 && window.len() < NEGATION_WINDOW {
        i -= 1;
        let t = &toks[i];
        if breaks_scope(t) || cue_tokens[i] {
            break;
        }
        if t.kind == Tok::Word {
            window.push(&t.norm);
        }
    }
    window.reverse();
    let pre = kb.cues().negation.iter().any(|cue| {
        !cue.is_empty() && window.windows(cue.len()).any(|w| w.iter().zip(cue).all(|(a, b)| *a == b.as_str()))
    });
    if pre {
        return true;
    }
    let mut after: Vec<&str> = Vec::new();
    for t in toks.iter().skip(last + 1) {
        if after.len() >= 4 || breaks_scope(t) || t.is_punct(',') {
            break;
        }
        if t.kind == Tok::Word {
            after.push(&t.norm);
        }
    }
    after.contains(&"not") || after.windows(2).any(|w| w == ["ruled", "out"])
}

/// Negation of the entity at byte range `entity_span` of `sentence`.
pub fn detect_negation(sentence: &str, entity_span: Range<usize>, kb: &KnowledgeBase) -> bool {
    let toks = tokenize(sentence);
    let Some((first, last)) = token_range(&toks, &entity_span) else {
        return false;
    };
    let cues = attribute_cues(&toks, &alloc::vec![false; toks.len()], kb);
    let mut cue_tokens = alloc::vec![false; toks.len()];
    for h in &cues {
        cue_tokens[h.first..=h.last].fill(true);
    }
    negated(&toks, first, last, &cue_tokens, kb)
}

fn token_range(toks: &[Token], span: &Range<usize>) -> Option<(usize, usize)> {
    let first = toks.iter().position(|t| t.end > span.start && t.start < span.end)?;
    let last = toks.iter().rposition(|t| t.end > span.start && t.start < span.end)?;
    Some((first, last))
}

fn attribute_cues(toks: &[Token], taken: &[bool], kb: &KnowledgeBase) -> Vec<Hit<AttributeKind>> {
    scan_phrases(toks, taken, &kb.cues().attribute)
}

/// Kinds a cue may assign to an entity of the given category.
fn cue_applies(cat: Option<EntityCategory>, kind: AttributeKind) -> bool {
    use AttributeKind as K;
    match cat {
        None => true,
        Some(EntityCategory::Diagnosis) => kind == K::Diagnosis,
        Some(EntityCategory::Medication) => matches!(kind, K::Medication | K::Treatment | K::Dosage),
        Some(EntityCategory::Lab | EntityCategory::Vital) => kind == K::LabValue,
        Some(EntityCategory::Procedure) => matches!(kind, K::Procedure | K::Treatment | K::Event),
        Some(EntityCategory::Status) => matches!(kind, K::Status | K::Treatment | K::Procedure | K::Event),
        Some(EntityCategory::Event) => matches!(kind, K::Event | K::Procedure),
    }
}

fn default_kind(cat: Option<EntityCategory>) -> AttributeKind {
    match cat {
        Some(EntityCategory::Diagnosis) => AttributeKind::Diagnosis,
        Some(EntityCategory::Medication) => AttributeKind::Treatment,
        Some(EntityCategory::Lab | EntityCategory::Vital) => AttributeKind::LabValue,
        Some(EntityCategory::Procedure) => AttributeKind::Procedure,
        Some(EntityCategory::Event) => AttributeKind::Event,
        Some(EntityCategory::Status) | None => AttributeKind::Status,
    }
}

/// Tokens between a value expression and a mention, not counting tokens
/// of other value expressions (`aspirin 81 mg daily`), plus one.
fn distance(e: &ValueExpr, m: &Mention, in_value: &[bool]) -> usize {
    let between = if e.last < m.first {
        e.last + 1..m.first
    } else {
        m.last + 1..e.first
    };
    1 + in_value[between].iter().filter(|v| !**v).count()
}

fn value_mask(n: usize, exprs: &[ValueExpr]) -> Vec<bool> {
    let mut mask = alloc::vec![false; n];
    for e in exprs {
        mask[e.first..=e.last].fill(true);
    }
    mask
}

/// The value the extractor would attach to the entity at byte range
/// `entity_span`: the nearest expression by precedence QuantityPair >
/// Quantity > Frequency > Qualitative, else `Present(true)`.
pub fn parse_value(sentence: &str, entity_span: Range<usize>, kb: &KnowledgeBase) -> Value {
    let toks = tokenize(sentence);
    let Some((first, last)) = token_range(&toks, &entity_span) else {
        return Value::present();
    };
    let mentions = scan_entities(sentence, &toks, kb);
    let mut taken = alloc::vec![false; toks.len()];
    taken[first..=last].fill(true);
    for m in &mentions {
        taken[m.first..=m.last].fill(true);
    }
    for i in time::find_time(&toks, &taken, &TimeContext::default()).consumed {
        taken[i] = true;
    }
    let target = Mention {
        first,
        last,
        concept: ConceptId::from_normalized(String::new()),
    };
    let mut all: Vec<Mention> = mentions.into_iter().filter(|m| m.last < first || m.first > last).collect();
    all.push(target.clone());
    all.sort_by_key(|m| m.first);
    let exprs = scan_values(sentence, &toks, &taken, kb);
    let mask = value_mask(toks.len(), &exprs);
    exprs
        .iter()
        .filter(|e| owner(e, &all, &mask).is_some_and(|m| m.first == first))
        .min_by_key(|e| (e.class, distance(e, &target, &mask)))
        .map_or_else(Value::present, |e| e.value.clone())
}

/// Nearest mention to an expression; ties go to the mention on the left.
fn owner<'m>(e: &ValueExpr, mentions: &'m [Mention], in_value: &[bool]) -> Option<&'m Mention> {
    mentions.iter().min_by_key(|m| (distance(e, m, in_value), m.first))
}

fn extract_text(text: &str, kb: &KnowledgeBase, ctx: &TimeContext, out: &mut Vec<Proposition>) {
    let sentences = segment_sentences(text, &kb.cues().abbreviations);
    for (si, sent) in sentences.iter().enumerate() {
        extract_sentence(si as u32, sent, kb, ctx, out);
    }
}

fn extract_sentence(si: u32, sent: &Sentence<'_>, kb: &KnowledgeBase, ctx: &TimeContext, out: &mut Vec<Proposition>) {
    let s = sent.text;
    let toks = tokenize(s);
    let mentions = scan_entities(s, &toks, kb);
    if mentions.is_empty() {
        return;
    }
    let mut taken = alloc::vec![false; toks.len()];
    for m in &mentions {
        taken[m.first..=m.last].fill(true);
    }
    let cues = attribute_cues(&toks, &taken, kb);
    let mut cue_tokens = alloc::vec![false; toks.len()];
    for h in &cues {
        cue_tokens[h.first..=h.last].fill(true);
    }
    for (t, c) in taken.iter_mut().zip(&cue_tokens) {
        *t |= *c;
    }
    let time = time::find_time(&toks, &taken, ctx);
    for &i in &time.consumed {
        taken[i] = true;
    }
    let exprs = scan_values(s, &toks, &taken, kb);
    let mask = value_mask(toks.len(), &exprs);

    let char_of = |byte: usize| (sent.char_start + s[..byte].chars().count()) as u32;
    let mut seen: BTreeSet<(ConceptId, AttributeKind, String, bool)> = BTreeSet::new();
    for m in &mentions {
        let cat = kb.category(&m.concept);
        let mine: Vec<&ValueExpr> = exprs
            .iter()
            .filter(|e| owner(e, &mentions, &mask).is_some_and(|o| o.first == m.first))
            .collect();
        let nearest = |pred: &dyn Fn(Class) -> bool| {
            mine.iter()
                .filter(|e| pred(e.class))
                .min_by_key(|e| (e.class, distance(e, m, &mask)))
                .copied()
        };
        let mut picked: Vec<Option<&ValueExpr>> = Vec::new();
        let quant = nearest(&|c| matches!(c, Class::Pair | Class::Quantity));
        let freq = nearest(&|c| c == Class::Frequency);
        if quant.is_some() || freq.is_some() {
            picked.extend([quant, freq].into_iter().filter(Option::is_some));
        } else {
            picked.push(nearest(&|c| c == Class::Qualitative));
        }

        let cue = cues
            .iter()
            .rev()
            .find(|h| h.last < m.first)
            .filter(|h| cue_applies(cat, h.what))
            .filter(|h| !toks[h.last + 1..m.first].iter().any(ends_cue_scope));
        let neg = negated(&toks, m.first, m.last, &cue_tokens, kb);
        let span_text = |a: usize, b: usize| &s[toks[a].start..toks[b].end];
        for expr in picked {
            let value = expr.map_or_else(Value::present, |e| e.value.clone());
            let (kind, raw_cue) = match (cat, expr) {
                (Some(EntityCategory::Lab | EntityCategory::Vital), _) => (
                    AttributeKind::LabValue,
                    cue.map_or_else(|| span_text(m.first, m.last), |h| span_text(h.first, h.last)),
                ),
                (Some(EntityCategory::Medication), Some(e)) if e.class != Class::Qualitative => {
                    (AttributeKind::Dosage, span_text(e.first, e.last))
                }
                _ => match cue {
                    Some(h) => (h.what, span_text(h.first, h.last)),
                    None => (default_kind(cat), span_text(m.first, m.last)),
                },
            };
            let key = (m.concept.clone(), kind, format!("{value:?}"), neg);
            if !seen.insert(key) {
                continue;
            }
            out.push(Proposition {
                id: PropositionId::new("", 0),
                entity: m.concept.clone(),
                attribute: Attribute::new(kind, raw_cue),
                value,
                time: time.time.clone(),
                negated: neg,
                span: SourceSpan {
                    sentence: si,
                    start: char_of(toks[m.first].start),
                    end: char_of(toks[m.last].end),
                },
            });
        }
    }
}

/// Renders a value as a phrase that [`parse_value_phrase`] reads back as
/// that single value.
pub fn value_phrase(v: &Value) -> String {
    let num = rational::to_decimal_string;
    match v {
        Value::Quantity { magnitude, unit } if unit.is_empty() => num(magnitude),
        Value::Quantity { magnitude, unit } => format!("{} {unit}", num(magnitude)),
        Value::QuantityPair { first, second, unit } => format!("{}/{} {unit}", num(first), num(second)),
        Value::Qualitative { label } => label.clone(),
        Value::Frequency { count, per } => frequency_phrase(count, per),
        Value::Present { flag: true } => "present".into(),
        Value::Present { flag: false } => "absent".into(),
    }
}

fn frequency_phrase(count: &Rational, per: &str) -> String {
    let one = rational::int(1);
    if *count == one {
        return match per {
            "day" => "daily".into(),
            "week" => "weekly".into(),
            "hour" => "hourly".into(),
            other => format!("once per {other}"),
        };
    }
    if *count == rational::int(2) && per == "day" {
        return "twice daily".into();
    }
    if count.is_integer() {
        return format!("{} times per {per}", count.numer());
    }
    if *count.numer() == 1 {
        return format!("every {} {per}s", count.denom());
    }
    format!("{} times per {per}", rational::to_decimal_string(count))
}

#[cfg(test)]
mod tests;
