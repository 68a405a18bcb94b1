use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::AggregatorError;
use crate::crypto::hash;
use crate::identity::{issue_vc, Did, Identity, Registry, VerifiableCredential};

/// Whom an authority refuses, both at endorsement and at authorization time.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApprovalPolicy {
    #[serde(default)]
    pub deny_sources: BTreeSet<Did>,
    #[serde(default)]
    pub deny_consumers: BTreeSet<Did>,
}

impl ApprovalPolicy {
    pub fn approves(&self, source: &Did, consumer: Option<&Did>) -> bool {
        !self.deny_sources.contains(source) && consumer.is_none_or(|c| !self.deny_consumers.contains(c))
    }
}

/// `V_s` together with who endorsed whom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndorsementRecord {
    pub source: Did,
    pub authority: Did,
    pub vc: VerifiableCredential,
}

/// An authority endorses `data` of `source` by issuing an ownership credential
/// whose claim is `H(data)`.
pub fn endorse_data(
    registry: &Registry,
    source: &Did,
    authority: &Identity,
    data: &[u8],
    policy: &ApprovalPolicy,
) -> Result<EndorsementRecord, AggregatorError> {
    for did in [source, &authority.did] {
        if registry.resolve(did).is_empty() {
            return Err(AggregatorError::UnresolvableDid(did.clone()));
        }
    }
    if !policy.approves(source, None) {
        return Err(AggregatorError::EndorsementRejected { authority: authority.did.clone(), source_did: source.clone() });
    }
    let vc = issue_vc(registry, authority, source, hash(data).as_bytes().to_vec())?;
    Ok(EndorsementRecord { source: source.clone(), authority: authority.did.clone(), vc })
}
