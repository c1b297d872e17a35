//! Synthetic record/summary pairs with controlled fault injection.
//!
//! A patient is a list of facts. The record renders every fact as a
//! structured entry; the faithful summary renders every key fact plus a
//! random subset of the rest as one sentence each, with synonyms and
//! equivalent units. Faults edit the summary sentences and report the
//! proposition ids they touch.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::{parse_value_phrase, time_phrase, value_phrase, Document, RawTime, StructuredEntry};
use crate::kb::{EntityCategory, KnowledgeBase};
use crate::metrics::{GoldFile, GoldLabel};
use crate::propmodel::{
    Anchor, AttributeKind, ConceptId, DocKind, Endpoint, FailureCode, Label, PropositionId, TimeRef, Timeline, Value,
};
use crate::rational::{self, Rational};

#[cfg(test)]
mod tests;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    ValuePerturb,
    UnitSwap,
    NegationFlip,
    TemporalSwap,
    ExclusivityInsert,
    Fabrication,
    Omission,
    ImplicationBreak,
}

impl FaultKind {
    pub const ALL: [FaultKind; 8] = [
        FaultKind::ValuePerturb,
        FaultKind::UnitSwap,
        FaultKind::NegationFlip,
        FaultKind::TemporalSwap,
        FaultKind::ExclusivityInsert,
        FaultKind::Fabrication,
        FaultKind::Omission,
        FaultKind::ImplicationBreak,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::ValuePerturb => "value_perturb",
            FaultKind::UnitSwap => "unit_swap",
            FaultKind::NegationFlip => "negation_flip",
            FaultKind::TemporalSwap => "temporal_swap",
            FaultKind::ExclusivityInsert => "exclusivity_insert",
            FaultKind::Fabrication => "fabrication",
            FaultKind::Omission => "omission",
            FaultKind::ImplicationBreak => "implication_break",
        }
    }

    /// The failure code the checks should raise for this fault.
    pub fn expected_code(self) -> FailureCode {
        match self {
            FaultKind::ValuePerturb | FaultKind::UnitSwap => FailureCode::Numerical,
            FaultKind::NegationFlip => FailureCode::Negation,
            FaultKind::TemporalSwap => FailureCode::Temporal,
            FaultKind::ExclusivityInsert => FailureCode::Exclusivity,
            FaultKind::Fabrication => FailureCode::NoEvidence,
            FaultKind::Omission => FailureCode::Presence,
            FaultKind::ImplicationBreak => FailureCode::Implication,
        }
    }
}

impl core::fmt::Display for FaultKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    /// Probability that a corpus document receives this fault.
    #[serde(with = "rational::serde_str")]
    pub rate: Rational,
    pub seed: u64,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, rate: Rational, seed: u64) -> Self {
        FaultSpec { kind, rate, seed }
    }
}

/// One injected fault: the summary propositions it falsifies and the
/// record propositions it leaves without a summary counterpart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedFault {
    pub kind: FaultKind,
    pub code: FailureCode,
    pub sites: Vec<PropositionId>,
    #[serde(default)]
    pub omissions: Vec<PropositionId>,
}

/// Bounds on the number of record propositions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeParams {
    pub min_props: usize,
    pub max_props: usize,
}

impl Default for SizeParams {
    fn default() -> Self {
        SizeParams {
            min_props: 10,
            max_props: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("knowledge base too small: {reason}")]
    KbTooSmall { reason: String },
    #[error("no eligible site for fault `{0}`")]
    NoEligibleSite(FaultKind),
    #[error("invalid fault rates: {0}")]
    InvalidRates(String),
    #[error("invalid size bounds {min}..={max}")]
    InvalidSize { min: usize, max: usize },
}

/// A record fact. Each value becomes one proposition.
#[derive(Clone, Debug, PartialEq)]
struct Fact {
    entity: ConceptId,
    kind: AttributeKind,
    values: Vec<Value>,
    time: TimeRef,
}

impl Fact {
    fn props(&self) -> usize {
        self.values.len()
    }
}

/// One summary sentence.
#[derive(Clone, Debug, PartialEq)]
struct Line {
    /// Index of the record fact it restates; `None` for inserted lines.
    origin: Option<usize>,
    entity: ConceptId,
    surface: String,
    kind: AttributeKind,
    values: Vec<Value>,
    time: TimeRef,
    negated: bool,
    removed: bool,
}

/// A generated patient: the record facts and the summary sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct PatientPair {
    pub id: String,
    pub seed: u64,
    admission: NaiveDate,
    los: u32,
    record: Vec<Fact>,
    lines: Vec<Line>,
}

/// Output of [`inject_faults`].
#[derive(Clone, Debug, PartialEq)]
pub struct InjectedPair {
    pub ehr: Document,
    pub summary: Document,
    pub gold: GoldFile,
}

// Lab and vital value ranges: unit, low, high, decimal places.
const QUANTITY_RANGES: &[(&str, &str, i64, i64, u32)] = &[
    ("creatinine", "mg/dL", 5, 30, 1),
    ("hemoglobin", "g/dL", 70, 160, 1),
    ("potassium", "mmol/L", 30, 60, 1),
    ("sodium", "mmol/L", 128, 148, 0),
    ("glucose", "mg/dL", 70, 300, 0),
    ("white_blood_cell_count", "K/uL", 30, 200, 1),
    ("troponin", "ng/mL", 1, 200, 2),
    ("lactate", "mmol/L", 5, 60, 1),
    ("platelet_count", "K/uL", 100, 400, 0),
    ("bnp", "pg/mL", 50, 2000, 0),
    ("hba1c", "%", 50, 120, 1),
    ("heart_rate", "bpm", 50, 130, 0),
    ("temperature", "°C", 360, 400, 1),
    ("oxygen_saturation", "%", 85, 100, 0),
    ("respiratory_rate", "breaths/min", 12, 30, 0),
];

const CULTURES: &[&str] = &["blood_culture", "urine_culture"];
const DOSES_MG: &[i64] = &[5, 10, 20, 25, 40, 50, 81, 100, 250, 500, 1000];
const FREQUENCIES: &[&str] = &["daily", "twice daily", "3 times per day", "every 8 hours", "every 12 hours"];
const PERTURB_FACTORS: [(i128, i128); 4] = [(1, 4), (1, 2), (2, 1), (4, 1)];
const KEEP_NON_KEY: f64 = 0.7;
const PARAPHRASE_UNIT: f64 = 0.3;

fn concept(s: &str) -> ConceptId {
    ConceptId::from_normalized(s.to_string())
}

/// Mixes a corpus seed and a document index into a document seed.
pub fn document_seed(corpus_seed: u64, index: u64) -> u64 {
    let mut z = corpus_seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> Option<&'a T> {
    (!items.is_empty()).then(|| &items[rng.random_range(0..items.len())])
}

fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Surface forms safe to render in a sentence: no digits and no words
/// that the time normalizer would read.
fn usable_surfaces(kb: &KnowledgeBase, c: &ConceptId) -> Vec<String> {
    kb.surface_forms(c)
        .map(|s| s.replace('_', " "))
        .filter(|s| !s.chars().any(|ch| ch.is_ascii_digit()))
        .filter(|s| !s.split(' ').any(|w| matches!(w, "admission" | "discharge" | "day" | "before" | "after")))
        .collect()
}

/// Leaf concepts of each category that can be rendered.
struct Vocabulary {
    by_category: Vec<(EntityCategory, Vec<ConceptId>)>,
}

impl Vocabulary {
    fn new(kb: &KnowledgeBase) -> Self {
        let concepts: Vec<&ConceptId> = kb.classes().concepts().collect();
        let is_leaf = |c: &ConceptId| !concepts.iter().any(|m| *m != c && kb.is_member(m, c));
        let by_category = EntityCategory::ALL
            .into_iter()
            .map(|cat| {
                let list = concepts
                    .iter()
                    .filter(|c| kb.category(c) == Some(cat) && !kb.is_category_root(c) && is_leaf(c))
                    .filter(|c| !usable_surfaces(kb, c).is_empty())
                    .map(|c| (*c).clone())
                    .collect();
                (cat, list)
            })
            .collect();
        Vocabulary { by_category }
    }

    fn of(&self, cat: EntityCategory) -> &[ConceptId] {
        self.by_category
            .iter()
            .find(|(c, _)| *c == cat)
            .map_or(&[], |(_, v)| v.as_slice())
    }

    fn leaf_members<'a>(&'a self, kb: &'a KnowledgeBase, class: &'a ConceptId) -> Vec<&'a ConceptId> {
        self.by_category
            .iter()
            .flat_map(|(_, v)| v.iter())
            .filter(|c| kb.is_member(c, class))
            .collect()
    }
}

/// True when the concept takes part in an implication rule or an
/// exclusivity pair.
fn in_rules(kb: &KnowledgeBase, c: &ConceptId) -> bool {
    kb.implications()
        .iter()
        .any(|r| kb.is_member(c, &r.antecedent) || kb.is_member(c, &r.consequent))
        || kb.exclusivity_pairs().any(|(a, b)| kb.is_member(c, a) || kb.is_member(c, b))
}

fn day(d: u32) -> TimeRef {
    TimeRef::Marker(Anchor::Day(d))
}

fn span(a: u32, b: u32) -> TimeRef {
    TimeRef::interval(Endpoint::day(i128::from(a)), Endpoint::day(i128::from(b)))
}

struct Builder<'a> {
    kb: &'a KnowledgeBase,
    vocab: &'a Vocabulary,
    rng: &'a mut ChaCha8Rng,
    los: u32,
    max: usize,
    facts: Vec<Fact>,
}

impl Builder<'_> {
    fn count(&self) -> usize {
        self.facts.iter().map(Fact::props).sum()
    }

    fn used(&self, c: &ConceptId) -> bool {
        self.facts.iter().any(|f| &f.entity == c)
    }

    fn day_time(&mut self) -> TimeRef {
        day(self.rng.random_range(0..self.los))
    }

    fn span_time(&mut self) -> TimeRef {
        let a = self.rng.random_range(0..self.los);
        let b = self.rng.random_range(a + 1..=self.los);
        span(a, b)
    }

    /// A fact for `c` in the shape its category takes.
    fn fact_for(&mut self, c: &ConceptId, cat: EntityCategory) -> Fact {
        let kb = self.kb;
        let (kind, values, time) = match cat {
            EntityCategory::Diagnosis => {
                let t = if self.rng.random_bool(0.6) {
                    TimeRef::Marker(Anchor::Admission)
                } else {
                    TimeRef::Unknown
                };
                (AttributeKind::Diagnosis, alloc::vec![Value::present()], t)
            }
            EntityCategory::Medication => {
                if self.rng.random_bool(0.6) {
                    let dose = DOSES_MG[self.rng.random_range(0..DOSES_MG.len())];
                    let freq = FREQUENCIES[self.rng.random_range(0..FREQUENCIES.len())];
                    let values = parse_value_phrase(&format!("{dose} mg {freq}"), None, kb);
                    (AttributeKind::Dosage, values, TimeRef::Unknown)
                } else {
                    (AttributeKind::Medication, alloc::vec![Value::present()], TimeRef::Unknown)
                }
            }
            EntityCategory::Lab | EntityCategory::Vital => {
                let value = self.lab_value(c);
                let t = match self.rng.random_range(0..10) {
                    0 => TimeRef::Marker(Anchor::Admission),
                    1 => TimeRef::Marker(Anchor::Discharge),
                    _ => self.day_time(),
                };
                (AttributeKind::LabValue, alloc::vec![value], t)
            }
            EntityCategory::Procedure => (AttributeKind::Procedure, alloc::vec![Value::present()], self.day_time()),
            EntityCategory::Status => {
                let t = if self.rng.random_bool(0.5) {
                    self.day_time()
                } else {
                    self.span_time()
                };
                (AttributeKind::Status, alloc::vec![Value::present()], t)
            }
            EntityCategory::Event => (AttributeKind::Event, alloc::vec![Value::present()], self.day_time()),
        };
        Fact {
            entity: c.clone(),
            kind,
            values,
            time,
        }
    }

    fn lab_value(&mut self, c: &ConceptId) -> Value {
        if let Some(&(_, unit, lo, hi, dec)) = QUANTITY_RANGES.iter().find(|r| r.0 == c.as_str()) {
            let n = self.rng.random_range(lo..=hi);
            return Value::quantity(Rational::new(i128::from(n), 10i128.pow(dec)), unit);
        }
        if c.as_str() == "blood_pressure" {
            let sys = self.rng.random_range(95..=170);
            let dia = self.rng.random_range(55..=(sys - 30).min(100));
            return Value::QuantityPair {
                first: rational::int(sys),
                second: rational::int(dia),
                unit: "mmHg".into(),
            };
        }
        let labels: &[&str] = if CULTURES.contains(&c.as_str()) {
            &["positive", "negative"]
        } else {
            &["normal", "abnormal"]
        };
        Value::Qualitative {
            label: labels[self.rng.random_range(0..labels.len())].into(),
        }
    }

    /// The fact plus the consequents its implication rules demand.
    fn closure(&mut self, fact: Fact) -> Option<Vec<Fact>> {
        let kb = self.kb;
        let mut out = alloc::vec![fact];
        let mut i = 0;
        while i < out.len() {
            let entity = out[i].entity.clone();
            for rule in kb.implications() {
                if !kb.is_member(&entity, &rule.antecedent) {
                    continue;
                }
                let have = self.facts.iter().chain(&out).any(|f| kb.is_member(&f.entity, &rule.consequent));
                if have {
                    continue;
                }
                let members: Vec<ConceptId> = self
                    .vocab
                    .leaf_members(kb, &rule.consequent)
                    .into_iter()
                    .filter(|m| !self.used(m) && !out.iter().any(|f| &f.entity == *m))
                    .cloned()
                    .collect();
                let c = pick(self.rng, &members)?.clone();
                let cat = kb.category(&c)?;
                let mut f = self.fact_for(&c, cat);
                if cat == EntityCategory::Medication {
                    f.kind = AttributeKind::Treatment;
                    f.values = alloc::vec![Value::present()];
                    f.time = self.span_time();
                }
                out.push(f);
            }
            i += 1;
        }
        Some(out)
    }

    /// Adds `c` with its consequents unless it is used, conflicts with an
    /// existing state, or would exceed the size bound.
    fn try_add(&mut self, c: &ConceptId) -> bool {
        let kb = self.kb;
        if self.used(c) {
            return false;
        }
        let Some(cat) = kb.category(c) else { return false };
        let fact = self.fact_for(c, cat);
        let Some(group) = self.closure(fact) else { return false };
        let conflict = group.iter().enumerate().any(|(i, f)| {
            self.facts.iter().chain(&group[..i]).any(|g| kb.are_exclusive(&f.entity, &g.entity))
        });
        let cost: usize = group.iter().map(Fact::props).sum();
        if conflict || self.count() + cost > self.max {
            return false;
        }
        self.facts.extend(group);
        true
    }

    fn try_add_from(&mut self, cat: EntityCategory) -> bool {
        let pool: Vec<ConceptId> = self.vocab.of(cat).iter().filter(|c| !self.used(c)).cloned().collect();
        match pick(self.rng, &pool) {
            Some(c) => {
                let c = c.clone();
                self.try_add(&c)
            }
            None => false,
        }
    }
}

/// Generates one patient, deterministic in `seed`.
pub fn generate_patient(seed: u64, kb: &KnowledgeBase, size: SizeParams) -> Result<PatientPair, GenError> {
    if size.min_props == 0 || size.min_props > size.max_props {
        return Err(GenError::InvalidSize {
            min: size.min_props,
            max: size.max_props,
        });
    }
    let vocab = Vocabulary::new(kb);
    if vocab.of(EntityCategory::Diagnosis).is_empty() {
        return Err(GenError::KbTooSmall {
            reason: "no diagnoses".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let los = rng.random_range(4..=10u32);
    let base = NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date");
    let admission = base + Days::new(rng.random_range(0..1000));
    let target = rng.random_range(size.min_props..=size.max_props);

    let mut b = Builder {
        kb,
        vocab: &vocab,
        rng: &mut rng,
        los,
        max: size.max_props,
        facts: Vec::new(),
    };
    // One diagnosis that triggers a rule, one exclusive state, two labs.
    let ruled: Vec<ConceptId> = vocab
        .of(EntityCategory::Diagnosis)
        .iter()
        .filter(|c| kb.implications().iter().any(|r| kb.is_member(c, &r.antecedent)))
        .cloned()
        .collect();
    if let Some(c) = pick(b.rng, &ruled).cloned() {
        b.try_add(&c);
    }
    let states: Vec<ConceptId> = vocab
        .of(EntityCategory::Status)
        .iter()
        .filter(|c| kb.exclusivity_pairs().any(|(x, y)| kb.is_member(c, x) || kb.is_member(c, y)))
        .cloned()
        .collect();
    if let Some(c) = pick(b.rng, &states).cloned() {
        b.try_add(&c);
    }
    let quantified: Vec<ConceptId> = QUANTITY_RANGES
        .iter()
        .map(|r| concept(r.0))
        .filter(|c| vocab.of(EntityCategory::Lab).contains(c) || vocab.of(EntityCategory::Vital).contains(c))
        .collect();
    for _ in 0..2 {
        if let Some(c) = pick(b.rng, &quantified).cloned() {
            b.try_add(&c);
        }
    }
    const FILL: [EntityCategory; 9] = [
        EntityCategory::Diagnosis,
        EntityCategory::Medication,
        EntityCategory::Medication,
        EntityCategory::Lab,
        EntityCategory::Lab,
        EntityCategory::Vital,
        EntityCategory::Procedure,
        EntityCategory::Status,
        EntityCategory::Event,
    ];
    let mut attempts = 0;
    while b.count() < target && attempts < 400 {
        let cat = FILL[b.rng.random_range(0..FILL.len())];
        b.try_add_from(cat);
        attempts += 1;
    }
    let count = b.count();
    if count < size.min_props {
        return Err(GenError::KbTooSmall {
            reason: format!("reached {count} propositions, need {}", size.min_props),
        });
    }
    let record = b.facts;
    let lines = summary_lines(&record, kb, &mut rng);
    Ok(PatientPair {
        id: format!("pt{seed:016x}"),
        seed,
        admission,
        los,
        record,
        lines,
    })
}

/// Every key fact, a random share of the others, closed under the
/// consequents of selected antecedents; shuffled and paraphrased.
fn summary_lines(record: &[Fact], kb: &KnowledgeBase, rng: &mut ChaCha8Rng) -> Vec<Line> {
    let mut keep: Vec<bool> = record
        .iter()
        .map(|f| f.kind.is_key() || rng.random_bool(KEEP_NON_KEY))
        .collect();
    let quantity = |f: &Fact| f.values.iter().any(|v| matches!(v, Value::Quantity { .. }));
    if !record.iter().zip(&keep).any(|(f, k)| *k && quantity(f)) {
        if let Some(i) = record.iter().position(quantity) {
            keep[i] = true;
        }
    }
    loop {
        let mut changed = false;
        for rule in kb.implications() {
            let fired = record.iter().zip(&keep).any(|(f, k)| *k && kb.is_member(&f.entity, &rule.antecedent));
            if !fired {
                continue;
            }
            for (f, k) in record.iter().zip(keep.iter_mut()) {
                if !*k && kb.is_member(&f.entity, &rule.consequent) {
                    *k = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut lines: Vec<Line> = record
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(i, f)| {
            let surfaces = usable_surfaces(kb, &f.entity);
            let surface = pick(rng, &surfaces).cloned().unwrap_or_else(|| f.entity.surface());
            let values = f
                .values
                .iter()
                .map(|v| {
                    if rng.random_bool(PARAPHRASE_UNIT) {
                        paraphrase_unit(v, kb, rng).unwrap_or_else(|| v.clone())
                    } else {
                        v.clone()
                    }
                })
                .collect();
            Line {
                origin: Some(i),
                entity: f.entity.clone(),
                surface,
                kind: f.kind,
                values,
                time: f.time.clone(),
                negated: false,
                removed: false,
            }
        })
        .collect();
    shuffle(rng, &mut lines);
    lines
}

/// Units of the same dimension with a different scale.
fn sibling_units<'a>(kb: &'a KnowledgeBase, unit: &str) -> Vec<&'a str> {
    let Some(def) = kb.units().get(unit) else {
        return Vec::new();
    };
    kb.units()
        .iter()
        .filter(|d| d.dimension == def.dimension && d.unit != def.unit && d.factor_to_base != def.factor_to_base)
        .filter(|d| d.dimension != "time")
        .map(|d| d.unit.as_str())
        .collect()
}

/// Short terminating decimals only, so the rendered text stays readable.
fn renderable(m: &Rational) -> bool {
    let s = rational::to_decimal_string(m);
    !s.contains('/') && s.split('.').nth(1).map_or(0, str::len) <= 4 && s.len() <= 9
}

/// The same quantity in another unit of its dimension.
fn paraphrase_unit(v: &Value, kb: &KnowledgeBase, rng: &mut ChaCha8Rng) -> Option<Value> {
    let Value::Quantity { magnitude, unit } = v else {
        return None;
    };
    let options: Vec<(Rational, &str)> = sibling_units(kb, unit)
        .into_iter()
        .filter_map(|u| kb.convert_unit(*magnitude, unit, u).ok().map(|m| (m, u)))
        .filter(|(m, _)| renderable(m))
        .collect();
    let (m, u) = pick(rng, &options)?;
    Some(Value::quantity(*m, *u))
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn time_suffix(t: &TimeRef) -> String {
    match time_phrase(t) {
        Some(p) if !p.is_empty() => format!(" {p}"),
        _ => String::new(),
    }
}

fn values_text(values: &[Value]) -> Option<String> {
    let parts: Vec<String> = values
        .iter()
        .filter(|v| !matches!(v, Value::Present { flag: true }))
        .map(value_phrase)
        .collect();
    (!parts.is_empty()).then(|| parts.join(" "))
}

fn sentence(line: &Line) -> String {
    let s = &line.surface;
    let t = time_suffix(&line.time);
    let v = values_text(&line.values).map(|v| format!(" {v}")).unwrap_or_default();
    let neg = line.negated;
    match line.kind {
        AttributeKind::Diagnosis if neg => format!("No evidence of {s}{t}."),
        AttributeKind::Diagnosis => format!("Diagnosed with {s}{t}."),
        AttributeKind::Treatment if neg => format!("Received no {s}{t}."),
        AttributeKind::Treatment => format!("Received {s}{t}."),
        AttributeKind::Medication if neg => format!("Home medications include no {s}{t}."),
        AttributeKind::Medication => format!("Home medications include {s}{t}."),
        AttributeKind::Procedure if neg => format!("No {s}{t}."),
        AttributeKind::Procedure => format!("Underwent {s}{t}."),
        AttributeKind::Status | AttributeKind::Event if neg => format!("No {s}{t}."),
        AttributeKind::Dosage | AttributeKind::LabValue | AttributeKind::Status | AttributeKind::Event => {
            format!("{}{v}{t}.", capitalize(s))
        }
    }
}

fn entry(f: &Fact) -> StructuredEntry {
    let mut e = StructuredEntry::new(&f.entity.surface(), f.kind);
    if let Some(v) = values_text(&f.values) {
        e = e.value(&v);
    }
    match time_phrase(&f.time) {
        Some(p) if p.is_empty() => {}
        Some(p) => e = e.time(p.trim_start_matches("on ").trim_start_matches("at ")),
        None => e.time = Some(RawTime::Tagged(f.time.clone())),
    }
    e
}

fn iso(d: NaiveDate) -> String {
    format!("{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
}

impl PatientPair {
    pub fn ehr_id(&self) -> String {
        format!("{}-ehr", self.id)
    }

    pub fn summary_id(&self) -> String {
        format!("{}-summary", self.id)
    }

    /// Renames both documents.
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn dates(&self, doc: &mut Document) {
        doc.admission = Some(iso(self.admission));
        doc.discharge = Some(iso(self.admission + Days::new(u64::from(self.los))));
    }

    pub fn ehr(&self) -> Document {
        let mut d = Document::from_entries(self.ehr_id(), DocKind::Ehr, self.record.iter().map(entry).collect());
        self.dates(&mut d);
        d
    }

    fn render_summary(&self, lines: &[Line]) -> Document {
        let text: Vec<String> = lines.iter().filter(|l| !l.removed).map(sentence).collect();
        let mut d = Document::from_text(self.summary_id(), DocKind::Summary, text.join(" "));
        self.dates(&mut d);
        d
    }

    pub fn summary(&self) -> Document {
        self.render_summary(&self.lines)
    }

    /// `(ehr, faithful summary)`.
    pub fn documents(&self) -> (Document, Document) {
        (self.ehr(), self.summary())
    }

    /// Number of record propositions.
    pub fn record_props(&self) -> usize {
        self.record.iter().map(Fact::props).sum()
    }

    fn timeline(&self) -> Timeline {
        Timeline::with_discharge(rational::int(i128::from(self.los)))
    }

    fn ehr_ids(&self, fact: usize) -> Vec<PropositionId> {
        let start: usize = self.record[..fact].iter().map(Fact::props).sum();
        (start..start + self.record[fact].props())
            .map(|i| PropositionId::new(self.ehr_id(), i as u32))
            .collect()
    }
}

/// A summary proposition addressed by line and value index.
type Site = (usize, usize);

struct Injection {
    kind: FaultKind,
    sites: Vec<Site>,
    omitted_facts: Vec<usize>,
}

struct Injector<'a> {
    pair: &'a PatientPair,
    kb: &'a KnowledgeBase,
    lines: Vec<Line>,
    touched: BTreeSet<usize>,
}

impl Injector<'_> {
    fn free(&self) -> impl Iterator<Item = (usize, &Line)> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(i, l)| !l.removed && !self.touched.contains(i))
    }

    fn live(&self) -> impl Iterator<Item = (usize, &Line)> {
        self.lines.iter().enumerate().filter(|(_, l)| !l.removed)
    }

    fn present_single(l: &Line) -> bool {
        l.values.len() == 1 && l.values[0] == Value::present()
    }

    fn apply(&mut self, kind: FaultKind, rng: &mut ChaCha8Rng) -> Result<Injection, GenError> {
        let none = || GenError::NoEligibleSite(kind);
        let kb = self.kb;
        let mut omitted_facts = Vec::new();
        let sites: Vec<Site> = match kind {
            FaultKind::ValuePerturb => {
                let options = self.quantity_sites();
                let &(li, vi) = pick(rng, &options).ok_or_else(none)?;
                let (n, d) = PERTURB_FACTORS[rng.random_range(0..PERTURB_FACTORS.len())];
                if let Value::Quantity { magnitude, .. } = &mut self.lines[li].values[vi] {
                    *magnitude *= Rational::new(n, d);
                }
                alloc::vec![(li, vi)]
            }
            FaultKind::UnitSwap => {
                let options: Vec<(Site, Vec<&str>)> = self
                    .quantity_sites()
                    .into_iter()
                    .filter_map(|(li, vi)| {
                        let Value::Quantity { unit, magnitude } = &self.lines[li].values[vi] else {
                            return None;
                        };
                        let units = sibling_units(kb, unit);
                        (!units.is_empty() && renderable(magnitude)).then_some(((li, vi), units))
                    })
                    .collect();
                let ((li, vi), units) = pick(rng, &options).ok_or_else(none)?;
                let u = *pick(rng, units).ok_or_else(none)?;
                let (li, vi) = (*li, *vi);
                if let Value::Quantity { unit, .. } = &mut self.lines[li].values[vi] {
                    *unit = u.to_string();
                }
                alloc::vec![(li, vi)]
            }
            FaultKind::NegationFlip => {
                let options: Vec<usize> = self
                    .free()
                    .filter(|(_, l)| !l.negated && Self::present_single(l) && l.origin.is_some())
                    .map(|(i, _)| i)
                    .collect();
                let &li = pick(rng, &options).ok_or_else(none)?;
                self.lines[li].negated = true;
                alloc::vec![(li, 0)]
            }
            FaultKind::TemporalSwap => {
                let options = self.order_reversals();
                let (a, time, b) = pick(rng, &options).ok_or_else(none)?.clone();
                self.lines[a].time = time;
                alloc::vec![(a, 0), (b, 0)]
            }
            FaultKind::ExclusivityInsert => {
                let options = self.exclusive_partners();
                let (li, partner) = pick(rng, &options).ok_or_else(none)?.clone();
                let surfaces = usable_surfaces(kb, &partner);
                let surface = pick(rng, &surfaces).ok_or_else(none)?.clone();
                let time = self.lines[li].time.clone();
                self.lines.push(Line {
                    origin: None,
                    entity: partner,
                    surface,
                    kind: AttributeKind::Status,
                    values: alloc::vec![Value::present()],
                    time,
                    negated: false,
                    removed: false,
                });
                alloc::vec![(li, 0), (self.lines.len() - 1, 0)]
            }
            FaultKind::Fabrication => {
                let vocab = Vocabulary::new(kb);
                let mut options: Vec<(ConceptId, AttributeKind)> = Vec::new();
                for (cat, kind) in [
                    (EntityCategory::Diagnosis, AttributeKind::Diagnosis),
                    (EntityCategory::Procedure, AttributeKind::Procedure),
                ] {
                    options.extend(
                        vocab
                            .of(cat)
                            .iter()
                            .filter(|c| !in_rules(kb, c))
                            .filter(|c| !self.pair.record.iter().any(|f| &f.entity == *c))
                            .filter(|c| !self.lines.iter().any(|l| &l.entity == *c))
                            .map(|c| (c.clone(), kind)),
                    );
                }
                let (entity, akind) = pick(rng, &options).ok_or_else(none)?.clone();
                let surfaces = usable_surfaces(kb, &entity);
                let surface = pick(rng, &surfaces).ok_or_else(none)?.clone();
                self.lines.push(Line {
                    origin: None,
                    entity,
                    surface,
                    kind: akind,
                    values: alloc::vec![Value::present()],
                    time: TimeRef::Unknown,
                    negated: false,
                    removed: false,
                });
                alloc::vec![(self.lines.len() - 1, 0)]
            }
            FaultKind::Omission => {
                let options: Vec<usize> = self
                    .free()
                    .filter(|(_, l)| l.kind.is_key() && l.origin.is_some())
                    .filter(|(_, l)| !self.needed_consequent(&l.entity))
                    .map(|(i, _)| i)
                    .collect();
                let &li = pick(rng, &options).ok_or_else(none)?;
                self.lines[li].removed = true;
                self.touched.insert(li);
                omitted_facts.extend(self.lines[li].origin);
                Vec::new()
            }
            FaultKind::ImplicationBreak => {
                let before = self.implication_sites();
                let options: Vec<Vec<usize>> = kb
                    .implications()
                    .iter()
                    .filter_map(|r| {
                        let antecedent = self
                            .free()
                            .any(|(_, l)| !l.negated && kb.is_member(&l.entity, &r.antecedent));
                        let consequents: Vec<usize> = self
                            .live()
                            .filter(|(_, l)| kb.is_member(&l.entity, &r.consequent))
                            .map(|(i, _)| i)
                            .collect();
                        let clean = consequents
                            .iter()
                            .all(|i| !self.touched.contains(i) && self.lines[*i].origin.is_some());
                        (antecedent && !consequents.is_empty() && clean).then_some(consequents)
                    })
                    .collect();
                let removed = pick(rng, &options).ok_or_else(none)?.clone();
                for &i in &removed {
                    self.lines[i].removed = true;
                    self.touched.insert(i);
                    let origin = self.lines[i].origin.expect("checked above");
                    if self.pair.record[origin].kind.is_key() {
                        omitted_facts.push(origin);
                    }
                }
                let after = self.implication_sites();
                let new: Vec<usize> = after.into_iter().filter(|i| !before.contains(i)).collect();
                if new.is_empty() || new.iter().any(|i| self.touched.contains(i)) {
                    return Err(none());
                }
                new.into_iter().map(|i| (i, 0)).collect()
            }
        };
        for &(li, _) in &sites {
            self.touched.insert(li);
        }
        Ok(Injection {
            kind,
            sites,
            omitted_facts,
        })
    }

    fn quantity_sites(&self) -> Vec<Site> {
        self.free()
            .filter(|(_, l)| !l.negated && l.origin.is_some())
            .flat_map(|(i, l)| {
                l.values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| matches!(v, Value::Quantity { .. }))
                    .map(move |(j, _)| (i, j))
            })
            .collect()
    }

    /// A live line whose entity belongs to the consequent of a rule
    /// whose antecedent the summary asserts.
    fn needed_consequent(&self, entity: &ConceptId) -> bool {
        let kb = self.kb;
        kb.implications().iter().any(|r| {
            kb.is_member(entity, &r.consequent)
                && self
                    .live()
                    .any(|(_, l)| !l.negated && kb.is_member(&l.entity, &r.antecedent))
        })
    }

    /// Lines asserting an antecedent whose consequent the summary omits
    /// and the record states.
    fn implication_sites(&self) -> BTreeSet<usize> {
        let kb = self.kb;
        let mut out = BTreeSet::new();
        for r in kb.implications() {
            if self.live().any(|(_, l)| kb.is_member(&l.entity, &r.consequent)) {
                continue;
            }
            if !self.pair.record.iter().any(|f| kb.is_member(&f.entity, &r.consequent)) {
                continue;
            }
            out.extend(
                self.live()
                    .filter(|(_, l)| !l.negated && kb.is_member(&l.entity, &r.antecedent))
                    .map(|(i, _)| i),
            );
        }
        out
    }

    /// Moves of a dated line to a half day that reverse its order with
    /// exactly one other line: `(moved, new time, partner)`.
    fn order_reversals(&self) -> Vec<(usize, TimeRef, usize)> {
        let kb = self.kb;
        let tl = self.pair.timeline();
        let clash = |a: Option<bool>, b: Option<bool>| matches!((a, b), (Some(x), Some(y)) if x != y);
        let movable = |l: &Line| {
            l.values.len() == 1
                && l.origin.is_some()
                && l.time.is_known()
                && !kb.exclusivity_pairs().any(|(x, y)| kb.is_member(&l.entity, x) || kb.is_member(&l.entity, y))
        };
        let mut out = Vec::new();
        for (a, la) in self.free().filter(|(_, l)| movable(l)) {
            if !matches!(la.time, TimeRef::Marker(Anchor::Day(_))) {
                continue;
            }
            for half in 0..self.pair.los {
                let moved = TimeRef::Offset(Rational::new(2 * i128::from(half) + 1, 2));
                let flipped: Vec<usize> = self
                    .live()
                    .filter(|(k, l)| *k != a && l.time.is_known())
                    .filter(|(_, l)| {
                        clash(tl.precedes(&moved, &l.time), tl.precedes(&la.time, &l.time))
                            || clash(tl.precedes(&l.time, &moved), tl.precedes(&l.time, &la.time))
                    })
                    .map(|(k, _)| k)
                    .collect();
                if let [b] = flipped[..] {
                    if !self.touched.contains(&b) && movable(&self.lines[b]) {
                        out.push((a, moved.clone(), b));
                    }
                }
            }
        }
        out
    }

    /// Dated state lines and a state, absent from both documents, that
    /// excludes them and no other asserted line at that time.
    fn exclusive_partners(&self) -> Vec<(usize, ConceptId)> {
        let kb = self.kb;
        let tl = self.pair.timeline();
        let vocab = Vocabulary::new(kb);
        let states = vocab.of(EntityCategory::Status);
        let mut out = Vec::new();
        for (i, l) in self.free() {
            if l.negated || !l.time.is_known() || l.kind != AttributeKind::Status || l.origin.is_none() {
                continue;
            }
            for partner in states.iter().filter(|s| kb.are_exclusive(&l.entity, s)) {
                let absent = !self.pair.record.iter().any(|f| &f.entity == partner)
                    && !self.lines.iter().any(|x| &x.entity == partner);
                let alone = self.live().filter(|(k, _)| *k != i).all(|(_, x)| {
                    x.negated
                        || !kb.are_exclusive(partner, &x.entity)
                        || !(tl.compare(&x.time, &l.time) == Some(core::cmp::Ordering::Equal)
                            || tl.overlaps(&x.time, &l.time))
                });
                if absent && alone {
                    out.push((i, partner.clone()));
                }
            }
        }
        out
    }
}

/// Applies each fault to its own randomly chosen sites and labels the
/// corrupted summary. Faults are site-disjoint.
pub fn inject_faults(pair: &PatientPair, faults: &[FaultSpec], kb: &KnowledgeBase) -> Result<InjectedPair, GenError> {
    let mut inj = Injector {
        pair,
        kb,
        lines: pair.lines.clone(),
        touched: BTreeSet::new(),
    };
    let mut applied = Vec::new();
    for f in faults {
        let mut rng = ChaCha8Rng::seed_from_u64(document_seed(pair.seed, f.seed));
        applied.push(inj.apply(f.kind, &mut rng)?);
    }
    // Summary proposition ids follow the live lines in order.
    let summary_id = pair.summary_id();
    let mut first_id = alloc::vec![0u32; inj.lines.len()];
    let mut next = 0u32;
    for (i, l) in inj.lines.iter().enumerate() {
        first_id[i] = next;
        if !l.removed {
            next += l.values.len() as u32;
        }
    }
    let id_of = |(li, vi): Site| PropositionId::new(summary_id.clone(), first_id[li] + vi as u32);
    let mut bad: BTreeSet<PropositionId> = BTreeSet::new();
    let expected: Vec<ExpectedFault> = applied
        .into_iter()
        .map(|a| {
            let sites: Vec<PropositionId> = a.sites.iter().map(|s| id_of(*s)).collect();
            bad.extend(sites.iter().cloned());
            let mut omissions: Vec<PropositionId> = a.omitted_facts.iter().flat_map(|f| pair.ehr_ids(*f)).collect();
            omissions.sort();
            ExpectedFault {
                kind: a.kind,
                code: a.kind.expected_code(),
                sites,
                omissions,
            }
        })
        .collect();
    let labels = (0..next)
        .map(|i| {
            let id = PropositionId::new(summary_id.clone(), i);
            let gold = if bad.contains(&id) { Label::NotSupported } else { Label::Supported };
            GoldLabel { id, gold }
        })
        .collect();
    Ok(InjectedPair {
        ehr: pair.ehr(),
        summary: pair.render_summary(&inj.lines),
        gold: GoldFile {
            doc_id: summary_id,
            labels,
            expected,
        },
    })
}

/// Checks that every rate lies in `[0, 1]` and that they sum to at most 1.
pub fn validate_faults(faults: &[FaultSpec]) -> Result<(), GenError> {
    let zero = rational::int(0);
    let one = rational::int(1);
    let mut sum = zero;
    for f in faults {
        if f.rate < zero || f.rate > one {
            return Err(GenError::InvalidRates(format!("{} has rate {}", f.kind, f.rate)));
        }
        sum += f.rate;
    }
    if sum > one {
        return Err(GenError::InvalidRates(format!("rates sum to {sum}")));
    }
    Ok(())
}

/// One corpus document. `applied` is empty when no fault was drawn or the
/// drawn fault had no eligible site.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusDoc {
    pub index: usize,
    pub seed: u64,
    pub ehr: Document,
    pub summary: Document,
    pub gold: GoldFile,
    pub applied: Vec<FaultKind>,
}

/// Draws at most one fault per document with the given rates.
pub fn generate_document(
    corpus_seed: u64,
    index: usize,
    faults: &[FaultSpec],
    kb: &KnowledgeBase,
    size: SizeParams,
) -> Result<CorpusDoc, GenError> {
    let seed = document_seed(corpus_seed, index as u64);
    let pair = generate_patient(seed, kb, size)?.with_id(format!("doc{index:04}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6661_756c_7473);
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let drawn = faults.iter().find(|f| {
        cum += rational::to_f64(&f.rate);
        u < cum
    });
    let (injected, applied) = match drawn {
        Some(f) => match inject_faults(&pair, core::slice::from_ref(f), kb) {
            Ok(i) => (i, alloc::vec![f.kind]),
            Err(GenError::NoEligibleSite(_)) => (inject_faults(&pair, &[], kb)?, Vec::new()),
            Err(e) => return Err(e),
        },
        None => (inject_faults(&pair, &[], kb)?, Vec::new()),
    };
    Ok(CorpusDoc {
        index,
        seed,
        ehr: injected.ehr,
        summary: injected.summary,
        gold: injected.gold,
        applied,
    })
}

pub fn generate_corpus(
    corpus_seed: u64,
    docs: usize,
    faults: &[FaultSpec],
    kb: &KnowledgeBase,
    size: SizeParams,
) -> Result<Vec<CorpusDoc>, GenError> {
    validate_faults(faults)?;
    (0..docs)
        .map(|i| generate_document(corpus_seed, i, faults, kb, size))
        .collect()
}
