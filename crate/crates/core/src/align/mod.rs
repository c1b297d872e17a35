//! Proposition embeddings, cosine similarity and best-counterpart matching.

mod hashed;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use hashed::{HashedEmbedder, HASH_DIM, HASH_SEED};

use crate::propmodel::{Proposition, PropositionId, PropositionSet};

/// Default similarity threshold for a match.
pub const DEFAULT_TAU_MATCH: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("cosine of a zero vector")]
    ZeroVector,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no embedding for proposition {0}")]
    MissingEmbedding(PropositionId),
    #[error("embedding component {index} is {value}; components must be finite and non-negative")]
    InvalidComponent { index: usize, value: f64 },
}

/// A non-negative vector of fixed dimension, stored as sorted
/// `(index, value)` pairs with zero components omitted.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl Embedding {
    pub fn from_dense(values: &[f64]) -> Result<Self, AlignError> {
        let mut entries = Vec::new();
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(AlignError::InvalidComponent { index, value });
            }
            if value > 0.0 {
                entries.push((index as u32, value));
            }
        }
        Ok(Embedding {
            dim: values.len(),
            entries,
        })
    }

    /// Sums duplicate indices. Indices must be below `dim`.
    pub(crate) fn from_counts(dim: usize, mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|e| e.1 > 0.0);
        Embedding { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nonzero(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|e| e.1 * e.1).sum())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// This vector divided by its L2 norm; zero vectors stay zero.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for e in &mut self.entries {
                e.1 /= n;
            }
        }
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        for e in &mut self.entries {
            e.1 *= c;
        }
        self
    }

    fn dot(&self, other: &Embedding) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// `u·v / (‖u‖‖v‖)`, clamped to `[0, 1]`.
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64, AlignError> {
    if u.dim != v.dim {
        return Err(AlignError::DimensionMismatch(u.dim, v.dim));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(AlignError::ZeroVector);
    }
    Ok((u.dot(v) / (nu * nv)).clamp(0.0, 1.0))
}

/// Maps propositions to vectors.
pub trait Embedder {
    fn embed(&self, p: &Proposition) -> Result<Embedding, AlignError>;

    /// Identifier recorded in verification reports.
    fn name(&self) -> &str;
}

/// Externally computed vectors keyed by proposition id.
#[derive(Clone, Debug, Default)]
pub struct PrecomputedEmbeddings {
    dim: Option<usize>,
    vectors: BTreeMap<PropositionId, Embedding>,
}

impl PrecomputedEmbeddings {
    pub fn insert(&mut self, id: PropositionId, vector: &[f64]) -> Result<(), AlignError> {
        let e = Embedding::from_dense(vector)?;
        match self.dim {
            Some(d) if d != e.dim => return Err(AlignError::DimensionMismatch(d, e.dim)),
            _ => self.dim = Some(e.dim),
        }
        self.vectors.insert(id, e);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Fails on the first proposition of `sets` without a vector.
    pub fn ensure_covers<'a>(&self, sets: impl IntoIterator<Item = &'a PropositionSet>) -> Result<(), AlignError> {
        for set in sets {
            for p in &set.items {
                if !self.vectors.contains_key(&p.id) {
                    return Err(AlignError::MissingEmbedding(p.id.clone()));
                }
            }
        }
        Ok(())
    }
}

impl Embedder for PrecomputedEmbeddings {
    fn embed(&self, p: &Proposition) -> Result<Embedding, AlignError> {
        self.vectors
            .get(&p.id)
            .cloned()
            .ok_or_else(|| AlignError::MissingEmbedding(p.id.clone()))
    }

    fn name(&self) -> &str {
        "precomputed"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub summary_id: PropositionId,
    pub ehr_id: Option<PropositionId>,
    pub score: f64,
    pub matched: bool,
}

/// Index and value of the maximum; the first wins ties.
pub fn argmax_first(scores: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((j, s));
        }
    }
    best
}

/// Best record counterpart for each summary proposition, in summary order.
pub fn match_propositions(
    summary: &PropositionSet,
    ehr: &PropositionSet,
    embedder: &dyn Embedder,
    tau_match: f64,
) -> Result<Vec<MatchResult>, AlignError> {
    let ehr_vecs = ehr
        .items
        .iter()
        .map(|p| embedder.embed(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(summary.items.len());
    let mut scores = Vec::with_capacity(ehr_vecs.len());
    for p in &summary.items {
        let u = embedder.embed(p)?;
        scores.clear();
        for v in &ehr_vecs {
            scores.push(cosine(&u, v)?);
        }
        let (ehr_id, score) = match argmax_first(&scores) {
            Some((j, s)) => (Some(ehr.items[j].id.clone()), s),
            None => (None, 0.0),
        };
        out.push(MatchResult {
            summary_id: p.id.clone(),
            matched: ehr_id.is_some() && score >= tau_match,
            ehr_id,
            score,
        });
    }
    Ok(out)
}
