//! End-to-end verification of one summary against one record.

use alloc::string::ToString;

use crate::align::{match_propositions, AlignError, Embedder, HashedEmbedder, DEFAULT_TAU_MATCH};
use crate::checks::{assign_verdicts, CheckContext, ReportParams, VerificationReport, DEFAULT_TAU_NUM};
use crate::extract::{extract_propositions, Document, ExtractError};
use crate::kb::KnowledgeBase;
use crate::propmodel::PropositionSet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyParams {
    pub tau_match: f64,
    pub tau_num: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            tau_match: DEFAULT_TAU_MATCH,
            tau_num: DEFAULT_TAU_NUM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Align(#[from] AlignError),
}

/// Matches and checks two already extracted sets.
pub fn verify_sets(
    summary: &PropositionSet,
    ehr: &PropositionSet,
    kb: &KnowledgeBase,
    embedder: &dyn Embedder,
    params: &VerifyParams,
) -> Result<VerificationReport, AlignError> {
    let matches = match_propositions(summary, ehr, embedder, params.tau_match)?;
    let assessment = assign_verdicts(&CheckContext {
        summary,
        ehr,
        matches: &matches,
        kb,
        tau_num: params.tau_num,
    });
    Ok(VerificationReport {
        doc_id: summary.doc_id.clone(),
        verdicts: assessment.verdicts,
        omissions: assessment.omissions,
        warnings: assessment.warnings,
        params: ReportParams {
            tau_match: params.tau_match,
            tau_num: params.tau_num,
            embedder: embedder.name().to_string(),
        },
    })
}

/// Extracts both documents and verifies the summary. Without an embedder
/// the hashed embedder over `kb` is used.
pub fn verify_documents(
    summary: &Document,
    ehr: &Document,
    kb: &KnowledgeBase,
    embedder: Option<&dyn Embedder>,
    params: &VerifyParams,
) -> Result<VerificationReport, VerifyError> {
    let ps = extract_propositions(summary, kb)?;
    let pe = extract_propositions(ehr, kb)?;
    let hashed = HashedEmbedder::new(kb);
    let embedder = embedder.unwrap_or(&hashed);
    Ok(verify_sets(&ps, &pe, kb, embedder, params)?)
}
