//! Deterministic, rule-based verification of clinical summaries against
//! their source records.
//!
//! Both documents are decomposed into atomic propositions
//! `(entity, attribute, value, time)`, summary propositions are aligned to
//! their most similar record proposition, and six discrete consistency
//! checks decide a per-proposition `Supported` / `NotSupported` verdict.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the corpus bundle
//! layout and the command-line driver live in the `veriprop` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod align;
pub mod checks;
pub mod extract;
pub mod kb;
pub mod lora;
pub mod metrics;
pub mod pipeline;
pub mod propmodel;
pub mod rational;
pub mod simcorpus;

pub use align::{cosine, match_propositions, Embedder, Embedding, HashedEmbedder, MatchResult};
pub use checks::{assign_verdicts, CheckContext, Omission, VerificationReport};
pub use extract::{extract_propositions, Document};
pub use kb::KnowledgeBase;
pub use pipeline::{verify_documents, VerifyParams};
pub use propmodel::{
    Attribute, AttributeKind, ConceptId, FailureCode, Label, Proposition, PropositionId,
    PropositionSet, TimeRef, Value, Verdict,
};
pub use rational::Rational;
