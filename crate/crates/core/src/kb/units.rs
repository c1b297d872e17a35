use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Zero;

use super::tsv;
use super::{ConvertError, KbError};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitDef {
    pub unit: String,
    pub dimension: String,
    pub factor_to_base: Rational,
}

/// Unit table: every dimension has exactly one base unit of factor 1.
#[derive(Clone, Debug, Default)]
pub struct UnitTable {
    units: BTreeMap<String, UnitDef>,
    /// Lowercased spelling → canonical spelling.
    folded: BTreeMap<String, String>,
    /// Canonical spellings, longest first, for prefix matching in text.
    by_length: Vec<String>,
}

impl UnitTable {
    pub(crate) fn parse(text: &str) -> Result<Self, KbError> {
        const FILE: &str = "units.tsv";
        let mut table = UnitTable::default();
        let mut bases: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for row in tsv::rows(FILE, text, 3, 3)? {
            let (unit, dimension, factor) = (row.fields[0], row.fields[1], row.fields[2]);
            let factor = rational::parse(factor).ok_or_else(|| {
                KbError::parse(FILE, row.line, alloc::format!("invalid factor `{factor}`"))
            })?;
            if factor <= Rational::zero() {
                return Err(KbError::parse(FILE, row.line, "factor must be positive"));
            }
            if table.units.contains_key(unit) {
                return Err(KbError::parse(
                    FILE,
                    row.line,
                    alloc::format!("duplicate unit `{unit}`"),
                ));
            }
            let folded = unit.to_lowercase();
            if let Some(prev) = table.folded.get(&folded) {
                return Err(KbError::parse(
                    FILE,
                    row.line,
                    alloc::format!("unit `{unit}` differs from `{prev}` only by case"),
                ));
            }
            if factor == rational::int(1) {
                bases
                    .entry(dimension.to_string())
                    .or_default()
                    .push(unit.to_string());
            } else {
                bases.entry(dimension.to_string()).or_default();
            }
            table.folded.insert(folded, unit.to_string());
            table.units.insert(
                unit.to_string(),
                UnitDef {
                    unit: unit.to_string(),
                    dimension: dimension.to_string(),
                    factor_to_base: factor,
                },
            );
        }
        for (dimension, base_units) in &bases {
            if base_units.len() != 1 {
                return Err(KbError::parse(
                    FILE,
                    0,
                    alloc::format!(
                        "dimension `{dimension}` has {} base units of factor 1, expected exactly one",
                        base_units.len()
                    ),
                ));
            }
        }
        table.by_length = table.units.keys().cloned().collect();
        table
            .by_length
            .sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Ok(table)
    }

    /// Looks a unit up exactly, then case-insensitively.
    pub fn get(&self, unit: &str) -> Option<&UnitDef> {
        self.units.get(unit).or_else(|| {
            self.folded
                .get(&unit.to_lowercase())
                .and_then(|c| self.units.get(c))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &UnitDef> {
        self.units.values()
    }

    /// Longest registered unit that prefixes `text` (case-insensitively) and
    /// ends at a non-alphanumeric boundary. Returns the canonical spelling
    /// and the matched byte length.
    pub fn match_prefix(&self, text: &str) -> Option<(&str, usize)> {
        self.by_length.iter().find_map(|unit| {
            let n = unit.len();
            let head = text.get(..n)?;
            if !head.eq_ignore_ascii_case(unit) && head != unit.as_str() {
                return None;
            }
            let boundary = text[n..]
                .chars()
                .next()
                .is_none_or(|c| !c.is_alphanumeric());
            boundary.then_some((unit.as_str(), n))
        })
    }

    pub fn convert(&self, magnitude: Rational, from: &str, to: &str) -> Result<Rational, ConvertError> {
        let src = self
            .get(from)
            .ok_or_else(|| ConvertError::UnknownUnit(from.to_string()))?;
        let dst = self
            .get(to)
            .ok_or_else(|| ConvertError::UnknownUnit(to.to_string()))?;
        if src.dimension != dst.dimension {
            return Err(ConvertError::DimensionMismatch {
                from: src.unit.clone(),
                to: dst.unit.clone(),
            });
        }
        Ok(magnitude * src.factor_to_base / dst.factor_to_base)
    }

    /// Expresses a magnitude in its dimension's base unit.
    pub fn to_base(&self, magnitude: Rational, unit: &str) -> Option<(Rational, &str)> {
        let def = self.get(unit)?;
        Some((magnitude * def.factor_to_base, def.dimension.as_str()))
    }
}
