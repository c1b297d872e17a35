//! Immutable knowledge base: synonym lexicon, concept classes, implication
//! rules, exclusivity pairs, unit table and cue lists.
//!
//! A bundle is five tab-separated files (`synonyms.tsv`, `classes.tsv`,
//! `implications.tsv`, `exclusivity.tsv`, `units.tsv`) plus an optional
//! `cues.tsv`. [`KnowledgeBase::builtin`] embeds the bundle shipped in
//! `crates/core/kb/`.

mod classes;
mod cues;
mod tsv;
mod units;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use classes::ConceptClassGraph;
pub use cues::CueLists;
pub use units::{UnitDef, UnitTable};

use crate::propmodel::{normalize_token, ConceptId};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum KbError {
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("is-a cycle: {}", DisplayPath(path))]
    Cycle { path: Vec<ConceptId> },
    #[error("duplicate surface form `{form}`")]
    DuplicateSurfaceForm { form: String },
}

impl KbError {
    pub(crate) fn parse(file: &str, line: usize, reason: impl Into<String>) -> Self {
        KbError::Parse {
            file: file.to_string(),
            line,
            reason: reason.into(),
        }
    }
}

struct DisplayPath<'a>(&'a [ConceptId]);

impl fmt::Display for DisplayPath<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" -> ")?;
            }
            f.write_str(c.as_str())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConvertError {
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("cannot convert `{from}` to `{to}`: different dimensions")]
    DimensionMismatch { from: String, to: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImplicationRule {
    pub antecedent: ConceptId,
    /// A concept or a class resolved through the class graph.
    pub consequent: ConceptId,
}

/// Coarse entity category, read from the category roots of the class graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EntityCategory {
    Diagnosis,
    Medication,
    Lab,
    Vital,
    Procedure,
    Status,
    Event,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 7] = [
        EntityCategory::Diagnosis,
        EntityCategory::Medication,
        EntityCategory::Lab,
        EntityCategory::Vital,
        EntityCategory::Procedure,
        EntityCategory::Status,
        EntityCategory::Event,
    ];

    pub fn root(self) -> &'static str {
        match self {
            EntityCategory::Diagnosis => "diagnosis",
            EntityCategory::Medication => "medication",
            EntityCategory::Lab => "lab",
            EntityCategory::Vital => "vital",
            EntityCategory::Procedure => "procedure",
            EntityCategory::Status => "status",
            EntityCategory::Event => "event",
        }
    }
}

/// Raw file contents of a bundle.
#[derive(Clone, Copy, Debug)]
pub struct KbSources<'a> {
    pub synonyms: &'a str,
    pub classes: &'a str,
    pub implications: &'a str,
    pub exclusivity: &'a str,
    pub units: &'a str,
    pub cues: Option<&'a str>,
}

impl KbSources<'static> {
    pub const BUILTIN: KbSources<'static> = KbSources {
        synonyms: include_str!("../../kb/synonyms.tsv"),
        classes: include_str!("../../kb/classes.tsv"),
        implications: include_str!("../../kb/implications.tsv"),
        exclusivity: include_str!("../../kb/exclusivity.tsv"),
        units: include_str!("../../kb/units.tsv"),
        cues: Some(include_str!("../../kb/cues.tsv")),
    };
}

const BUILTIN_CUES: &str = include_str!("../../kb/cues.tsv");

#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    /// Registered surface key → concept.
    lexicon: BTreeMap<String, ConceptId>,
    /// Entity vocabulary for text scanning: the lexicon plus every non-root
    /// concept id mentioned anywhere in the bundle.
    entity_forms: BTreeMap<String, ConceptId>,
    max_form_words: usize,
    classes: ConceptClassGraph,
    implications: Vec<ImplicationRule>,
    exclusivity: BTreeSet<(ConceptId, ConceptId)>,
    units: UnitTable,
    cues: CueLists,
}

impl KnowledgeBase {
    pub fn builtin() -> Self {
        Self::from_sources(KbSources::BUILTIN).expect("built-in knowledge base is valid")
    }

    /// Parses and validates a bundle. Cue rows, when given, are added to the
    /// built-in cue lists.
    pub fn from_sources(src: KbSources<'_>) -> Result<Self, KbError> {
        let mut lexicon = BTreeMap::new();
        let mut lexicon_lines = BTreeMap::new();
        for row in tsv::rows("synonyms.tsv", src.synonyms, 2, 2)? {
            let key = normalize_token(row.fields[0]);
            if key.is_empty() {
                return Err(KbError::parse("synonyms.tsv", row.line, "surface form has no word characters"));
            }
            let concept = concept("synonyms.tsv", row.line, row.fields[1])?;
            if lexicon.insert(key.clone(), concept).is_some() {
                return Err(KbError::DuplicateSurfaceForm {
                    form: row.fields[0].to_string(),
                });
            }
            lexicon_lines.insert(key, row.line);
        }

        let mut edges = Vec::new();
        for row in tsv::rows("classes.tsv", src.classes, 2, 2)? {
            let member = concept("classes.tsv", row.line, row.fields[0])?;
            let class = concept("classes.tsv", row.line, row.fields[1])?;
            edges.push((member, class));
        }
        let classes = ConceptClassGraph::from_edges(edges)?;

        let mut implications = Vec::new();
        for row in tsv::rows("implications.tsv", src.implications, 2, 2)? {
            let antecedent = concept("implications.tsv", row.line, row.fields[0])?;
            let consequent = concept("implications.tsv", row.line, row.fields[1])?;
            if antecedent == consequent {
                return Err(KbError::parse("implications.tsv", row.line, "antecedent equals consequent"));
            }
            implications.push(ImplicationRule {
                antecedent,
                consequent,
            });
        }

        let mut exclusivity = BTreeSet::new();
        for row in tsv::rows("exclusivity.tsv", src.exclusivity, 2, 2)? {
            let a = concept("exclusivity.tsv", row.line, row.fields[0])?;
            let b = concept("exclusivity.tsv", row.line, row.fields[1])?;
            if a == b {
                return Err(KbError::parse("exclusivity.tsv", row.line, "pair members must differ"));
            }
            exclusivity.insert(if a < b { (a, b) } else { (b, a) });
        }

        let units = UnitTable::parse(src.units)?;

        let mut cues = CueLists::default();
        cues.extend_from_tsv(BUILTIN_CUES)?;
        if let Some(extra) = src.cues {
            cues.extend_from_tsv(extra)?;
        }

        let mut mentioned: BTreeSet<ConceptId> = lexicon.values().cloned().collect();
        mentioned.extend(classes.concepts().cloned());
        for r in &implications {
            mentioned.insert(r.antecedent.clone());
            mentioned.insert(r.consequent.clone());
        }
        for (a, b) in &exclusivity {
            mentioned.insert(a.clone());
            mentioned.insert(b.clone());
        }
        // Concept ids must not be registered as surface forms of another
        // concept, or normalization would not be idempotent.
        for c in &mentioned {
            if let Some(target) = lexicon.get(c.as_str()) {
                if target != c {
                    return Err(KbError::parse(
                        "synonyms.tsv",
                        lexicon_lines[c.as_str()],
                        alloc::format!("surface `{c}` is also a concept id but maps to `{target}`"),
                    ));
                }
            }
        }

        let mut entity_forms = lexicon.clone();
        for c in &mentioned {
            if !classes.is_root(c) {
                entity_forms
                    .entry(c.as_str().to_string())
                    .or_insert_with(|| c.clone());
            }
        }
        let max_form_words = entity_forms
            .keys()
            .map(|k| k.split('_').count())
            .max()
            .unwrap_or(1);

        Ok(KnowledgeBase {
            lexicon,
            entity_forms,
            max_form_words,
            classes,
            implications,
            exclusivity,
            units,
            cues,
        })
    }

    /// Maps a surface form to its concept: registered forms through the
    /// lexicon, anything else to its normalized token. Idempotent.
    pub fn normalize_concept(&self, surface: &str) -> ConceptId {
        let key = normalize_token(surface);
        match self.lexicon.get(&key) {
            Some(c) => c.clone(),
            None => ConceptId::from_normalized(key),
        }
    }

    pub fn lexicon(&self) -> impl Iterator<Item = (&str, &ConceptId)> {
        self.lexicon.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Entity lookup by normalized surface key, for text scanning.
    pub fn entity_form(&self, key: &str) -> Option<&ConceptId> {
        self.entity_forms.get(key)
    }

    pub fn max_entity_words(&self) -> usize {
        self.max_form_words
    }

    /// Surface forms (normalized keys) that resolve to `concept`, the
    /// concept id itself first when it is a form.
    pub fn surface_forms<'a>(&'a self, concept: &'a ConceptId) -> impl Iterator<Item = &'a str> + 'a {
        let own = self
            .entity_forms
            .get(concept.as_str())
            .filter(|c| *c == concept)
            .map(|_| concept.as_str());
        own.into_iter().chain(
            self.lexicon
                .iter()
                .filter(move |(k, v)| *v == concept && k.as_str() != concept.as_str())
                .map(|(k, _)| k.as_str()),
        )
    }

    pub fn classes(&self) -> &ConceptClassGraph {
        &self.classes
    }

    pub fn is_member(&self, concept: &ConceptId, class: &ConceptId) -> bool {
        self.classes.is_member(concept, class)
    }

    pub fn category(&self, concept: &ConceptId) -> Option<EntityCategory> {
        EntityCategory::ALL.into_iter().find(|cat| {
            let root = ConceptId::from_normalized(cat.root().to_string());
            self.classes.is_member(concept, &root)
        })
    }

    /// True for the category roots themselves (e.g. `medication`).
    pub fn is_category_root(&self, concept: &ConceptId) -> bool {
        EntityCategory::ALL
            .iter()
            .any(|cat| cat.root() == concept.as_str())
    }

    pub fn implications(&self) -> &[ImplicationRule] {
        &self.implications
    }

    pub fn exclusivity_pairs(&self) -> impl Iterator<Item = (&ConceptId, &ConceptId)> {
        self.exclusivity.iter().map(|(a, b)| (a, b))
    }

    /// Symmetric: true when some registered pair `(x, y)` has `a` in `x`
    /// and `b` in `y` (either orientation), after class resolution.
    pub fn are_exclusive(&self, a: &ConceptId, b: &ConceptId) -> bool {
        self.exclusivity.iter().any(|(x, y)| {
            (self.is_member(a, x) && self.is_member(b, y)) || (self.is_member(a, y) && self.is_member(b, x))
        })
    }

    pub fn units(&self) -> &UnitTable {
        &self.units
    }

    pub fn convert_unit(&self, magnitude: Rational, from: &str, to: &str) -> Result<Rational, ConvertError> {
        self.units.convert(magnitude, from, to)
    }

    pub fn cues(&self) -> &CueLists {
        &self.cues
    }
}

fn concept(file: &str, line: usize, raw: &str) -> Result<ConceptId, KbError> {
    let c = ConceptId::normalized(raw);
    if c.is_empty() {
        return Err(KbError::parse(file, line, alloc::format!("invalid concept `{raw}`")));
    }
    Ok(c)
}
