use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;

use super::{AlignError, Embedder, Embedding};
use crate::kb::KnowledgeBase;
use crate::propmodel::{Proposition, Value};
use crate::rational::Rational;

pub const HASH_DIM: usize = 4096;
/// Hashed ahead of every feature string.
pub const HASH_SEED: u64 = 0x5652_5052_4f50_0001;

const W_ENTITY: f64 = 6.0;
const W_ATTRIBUTE: f64 = 2.0;

/// Deterministic bag-of-features embedder: concept id, character
/// 3-grams of the concept id, attribute kind, unit-normalized value
/// tokens, time and polarity, hashed into 4096 buckets and L2-normalized.
#[derive(Clone, Copy, Debug)]
pub struct HashedEmbedder<'kb> {
    kb: &'kb KnowledgeBase,
}

fn bucket(feature: &str) -> u32 {
    let mut h = FnvHasher::default();
    h.write(&HASH_SEED.to_le_bytes());
    h.write(feature.as_bytes());
    (h.finish() % HASH_DIM as u64) as u32
}

impl<'kb> HashedEmbedder<'kb> {
    pub fn new(kb: &'kb KnowledgeBase) -> Self {
        HashedEmbedder { kb }
    }

    /// Rational in lowest terms, rendered `n` or `n/d`.
    fn exact(r: &Rational) -> String {
        format!("{r}")
    }

    fn value_features(&self, v: &Value, out: &mut Vec<(String, f64)>) {
        out.push((format!("v:{}", v.variant_name()), 1.0));
        let units = self.kb.units();
        let base = |mag: &Rational, unit: &str| match units.get(unit) {
            Some(def) => format!("{}:{}", def.dimension, Self::exact(&(mag * def.factor_to_base))),
            None => format!("vu:{unit}:{}", Self::exact(mag)),
        };
        match v {
            Value::Quantity { magnitude, unit } => out.push((format!("vq:{}", base(magnitude, unit)), 1.0)),
            Value::QuantityPair { first, second, unit } => {
                out.push((format!("vp1:{}", base(first, unit)), 1.0));
                out.push((format!("vp2:{}", base(second, unit)), 1.0));
            }
            Value::Frequency { count, per } => {
                let f = match units.get(per) {
                    Some(def) if def.dimension == "time" => format!("vf:{}", Self::exact(&(count / def.factor_to_base))),
                    _ => format!("vf:{}/{per}", Self::exact(count)),
                };
                out.push((f, 1.0));
            }
            Value::Qualitative { label } => {
                out.push((format!("vl:{}", self.kb.normalize_concept(label)), 1.0));
            }
            Value::Present { flag } => out.push((format!("vb:{flag}"), 1.0)),
        }
    }

    /// Weighted feature strings before hashing.
    pub fn features(&self, p: &Proposition) -> Vec<(String, f64)> {
        let id = p.entity.as_str();
        let mut out = Vec::new();
        out.push((format!("e:{id}"), W_ENTITY));
        let padded: Vec<char> = core::iter::once('#').chain(id.chars()).chain(core::iter::once('#')).collect();
        for w in padded.windows(3) {
            out.push((format!("g:{}{}{}", w[0], w[1], w[2]), 1.0));
        }
        out.push((format!("a:{}", p.attribute.kind), W_ATTRIBUTE));
        self.value_features(&p.value, &mut out);
        out.push((format!("t:{}", p.time), 1.0));
        out.push((format!("n:{}", p.negated), 1.0));
        out
    }
}

impl Embedder for HashedEmbedder<'_> {
    fn embed(&self, p: &Proposition) -> Result<Embedding, AlignError> {
        let pairs = self
            .features(p)
            .into_iter()
            .map(|(f, w)| (bucket(&f), w))
            .collect();
        Ok(Embedding::from_counts(HASH_DIM, pairs).normalized())
    }

    fn name(&self) -> &str {
        "hashed-4096-v1"
    }
}
