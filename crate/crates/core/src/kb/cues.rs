use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::tsv;
use super::KbError;
use crate::propmodel::{normalize_token, AttributeKind};

/// Lexical cue lists driving negation, attribute inference, qualitative
/// labels and sentence segmentation. Phrases are stored as normalized word
/// sequences.
#[derive(Clone, Debug, Default)]
pub struct CueLists {
    pub negation: Vec<Vec<String>>,
    pub attribute: Vec<(Vec<String>, AttributeKind)>,
    pub qualitative: BTreeSet<String>,
    /// Lowercase abbreviations including their trailing period (`e.g.`).
    pub abbreviations: BTreeSet<String>,
}

pub(crate) fn words(phrase: &str) -> Vec<String> {
    normalize_token(phrase)
        .split('_')
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

impl CueLists {
    pub(crate) fn extend_from_tsv(&mut self, text: &str) -> Result<(), KbError> {
        const FILE: &str = "cues.tsv";
        for row in tsv::rows(FILE, text, 2, 3)? {
            let phrase = row.fields[1];
            match (row.fields[0], row.fields.get(2)) {
                ("negation", None) => push_unique(&mut self.negation, words(phrase)),
                ("attribute", Some(kind)) => {
                    let kind: AttributeKind = kind
                        .parse()
                        .map_err(|e| KbError::parse(FILE, row.line, alloc::format!("{e}")))?;
                    let w = words(phrase);
                    if !self.attribute.iter().any(|(p, _)| *p == w) {
                        self.attribute.push((w, kind));
                    }
                }
                ("qualitative", None) => {
                    self.qualitative.insert(normalize_token(phrase));
                }
                ("abbreviation", None) => {
                    self.abbreviations.insert(phrase.to_lowercase());
                }
                (other, _) => {
                    return Err(KbError::parse(
                        FILE,
                        row.line,
                        alloc::format!("unknown cue row kind `{other}` or wrong field count"),
                    ))
                }
            }
        }
        // Longer phrases first so `no evidence of` wins over `no`.
        self.negation.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        self.attribute
            .sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(())
    }
}

fn push_unique(list: &mut Vec<Vec<String>>, w: Vec<String>) {
    if !w.is_empty() && !list.contains(&w) {
        list.push(w);
    }
}
