//! The Arbitrator: authentication, ownership and approval checks.
//!
//! Verdicts are pure functions of the evidence, the registry and the ledger,
//! so they can be evaluated concurrently.

use serde::{Deserialize, Serialize};

use super::ReasonCode;
use crate::crypto::verify_recover_bytes;
use crate::identity::{
    verify_issuer_binding, verify_ownership, verify_proof, Did, OwnershipFailure, Registry, VerifiableCredential,
};
use crate::ledger::{Ledger, Query, TxKind};

/// How the authority's approval is proven.
#[derive(Debug, Clone, Copy)]
pub enum Approval<'a> {
    /// An endorsement transaction with `s = source`, `c = consumer`, issued by
    /// the credential's issuer. With `run` set, the endorsement must have been
    /// issued for that run; otherwise any earlier one counts.
    OnChain { ledger: &'a Ledger, run: Option<&'a str> },
    /// `Ω`, which must unwrap to `nonce` under the issuer's and then the
    /// source's authentication key.
    OffChain { omega: &'a [u8], nonce: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Evidence<'a> {
    pub source: &'a Did,
    pub consumer: &'a Did,
    /// `E_e(V_s, sk_auth_s)`, already decrypted with the consumer's key.
    pub signed_vc: &'a [u8],
    pub approval: Approval<'a>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    /// Failing checks in evaluation order; empty means accepted.
    pub failures: Vec<ReasonCode>,
    /// The credential, once authentication succeeded.
    pub vc: Option<VerifiableCredential>,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn reason(&self) -> Option<ReasonCode> {
        self.failures.first().copied()
    }
}

/// Authenticates the source, checks the credential's proof and issuer, and
/// checks the authority's approval.
///
/// The claim half of ownership needs the data, which is only fetched after a
/// positive verdict; see [`check_claim`].
pub fn arbitrate(evidence: &Evidence<'_>, registry: &Registry) -> Verdict {
    let Some(vc) = authenticate(evidence, registry) else {
        return Verdict { failures: vec![ReasonCode::AuthFail], vc: None };
    };
    let mut failures = Vec::new();
    if !(verify_proof(&vc) && verify_issuer_binding(&vc, registry)) {
        failures.push(ReasonCode::OwnProofInvalid);
    }
    if let Err(code) = check_approval(evidence, &vc, registry) {
        failures.push(code);
    }
    Verdict { failures, vc: Some(vc) }
}

fn authenticate(evidence: &Evidence<'_>, registry: &Registry) -> Option<VerifiableCredential> {
    let doc = registry.resolve(evidence.source).document()?;
    let pk = doc.auth_key()?;
    let plain = verify_recover_bytes(evidence.signed_vc, &pk).ok()?;
    let vc: VerifiableCredential = crate::canonical::from_slice(&plain).ok()?;
    (&vc.credential_subject.id == evidence.source).then_some(vc)
}

fn check_approval(evidence: &Evidence<'_>, vc: &VerifiableCredential, registry: &Registry) -> Result<(), ReasonCode> {
    match evidence.approval {
        Approval::OnChain { ledger, run } => {
            let mut q = Query::kind(TxKind::Endorsement)
                .text_eq("s", evidence.source.as_str())
                .text_eq("c", evidence.consumer.as_str())
                .text_eq("o", vc.issuer.as_str());
            if let Some(run) = run {
                q = q.text_eq("run", run);
            }
            ledger.latest(&q).map(|_| ()).ok_or(ReasonCode::ApprovalFail)
        }
        Approval::OffChain { omega, nonce } => {
            let issuer_auth = registry
                .resolve(&vc.issuer)
                .document()
                .and_then(|d| d.auth_key())
                .ok_or(ReasonCode::ApprovalFail)?;
            let source_auth = registry
                .resolve(evidence.source)
                .document()
                .and_then(|d| d.auth_key())
                .ok_or(ReasonCode::ApprovalFail)?;
            let inner = verify_recover_bytes(omega, &issuer_auth).map_err(|_| ReasonCode::ApprovalFail)?;
            let r = verify_recover_bytes(&inner, &source_auth).map_err(|_| ReasonCode::ApprovalFail)?;
            if r == nonce.to_be_bytes() {
                Ok(())
            } else {
                Err(ReasonCode::NonceMismatch)
            }
        }
    }
}

/// The claim half of ownership: `credentialSubject.claim = H(data)`.
pub fn check_claim(vc: &VerifiableCredential, source: &Did, data: &[u8]) -> Result<(), ReasonCode> {
    let check = verify_ownership(vc, source, data);
    match check.first_failure() {
        None => Ok(()),
        Some(OwnershipFailure::ClaimMismatch) => Err(ReasonCode::OwnClaimMismatch),
        Some(OwnershipFailure::SubjectMismatch) => Err(ReasonCode::OwnSubjectMismatch),
        Some(OwnershipFailure::ProofInvalid) => Err(ReasonCode::OwnProofInvalid),
    }
}
