//! The aggregator client: Controller, Connector, Arbitrator, Processor and
//! Mediator, plus the source and authority roles of the acquisition
//! protocols.
//!
//! The role agents are transport-agnostic state machines. They react to
//! [`Message`]s and clock ticks through a [`Context`], which the network
//! simulator implements.

mod agents;
mod arbitrator;
mod endorsement;
mod protocol;
mod report;
mod transform;

pub use agents::{AuthorityAgent, CONSUMER_PATIENCE, SOURCE_PATIENCE, ConsumerClient, SourceAgent, SourceBehavior, SourceHoldings};
pub use arbitrator::{arbitrate, check_claim, Approval, Evidence, Verdict};
pub use endorsement::{endorse_data, ApprovalPolicy, EndorsementRecord};
pub use protocol::{Address, AuthEvidence, Context, Message, PayloadClass, RunId};
pub use report::{RunOutcome, RunReport, SourceReport, SourceStatus};
pub use transform::{process_transform, FieldMap, TransformSpec};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::identity::{Did, IdentityError, Registry};
use crate::ledger::LedgerError;
use crate::storage::StorageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    OnChain,
    OffChain,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OnChain => "onchain",
            Mode::OffChain => "offchain",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "onchain" | "on-chain" => Ok(Mode::OnChain),
            "offchain" | "off-chain" => Ok(Mode::OffChain),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Why a source was excluded from a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    /// The sealed credential does not open under the claimed source's
    /// authentication key, or names a different subject.
    AuthFail,
    OwnSubjectMismatch,
    OwnClaimMismatch,
    OwnProofInvalid,
    /// No endorsement transaction, or the approval was not signed by the
    /// credential's issuer.
    ApprovalFail,
    NonceMismatch,
    /// The authority refused to authorize the consumer.
    Rejected,
    AuthorityUnreachable,
    LocationUnreachable,
    StagingUnreachable,
    PortClosed,
    DecryptionFailure,
    LedgerRejection,
    MalformedData,
    Timeout,
    /// Strict termination: another source failed first.
    Terminated,
}

impl ReasonCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::AuthFail => "AUTH_FAIL",
            ReasonCode::OwnSubjectMismatch => "OWN_SUBJECT_MISMATCH",
            ReasonCode::OwnClaimMismatch => "OWN_CLAIM_MISMATCH",
            ReasonCode::OwnProofInvalid => "OWN_PROOF_INVALID",
            ReasonCode::ApprovalFail => "APPROVAL_FAIL",
            ReasonCode::NonceMismatch => "NONCE_MISMATCH",
            ReasonCode::Rejected => "REJECTED",
            ReasonCode::AuthorityUnreachable => "AUTHORITY_UNREACHABLE",
            ReasonCode::LocationUnreachable => "LOCATION_UNREACHABLE",
            ReasonCode::StagingUnreachable => "STAGING_UNREACHABLE",
            ReasonCode::PortClosed => "PORT_CLOSED",
            ReasonCode::DecryptionFailure => "DECRYPTION_FAILURE",
            ReasonCode::LedgerRejection => "LEDGER_REJECTION",
            ReasonCode::MalformedData => "MALFORMED_DATA",
            ReasonCode::Timeout => "TIMEOUT",
            ReasonCode::Terminated => "TERMINATED",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReasonCode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown reason code `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregatorError {
    #[error("an aggregation needs more than one source")]
    TooFewSources,
    #[error("source {0} is listed twice")]
    DuplicateSource(Did),
    #[error("{0} does not resolve")]
    UnresolvableDid(Did),
    #[error("off-chain acquisition needs a nonce")]
    MissingNonce,
    #[error("authority {authority} refused to endorse data of {source_did}")]
    EndorsementRejected { authority: Did, source_did: Did },
    #[error("no source passed verification")]
    AllSourcesRejected,
    #[error("terminated after {source_did} failed with {reason}")]
    Terminated { source_did: Did, reason: ReasonCode },
    #[error("transform references `{field}`, which source {source_index} does not have")]
    UnknownFieldInPsi { field: String, source_index: usize },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// A consumer's request to aggregate data from `sources` under `transform`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationRequest {
    pub consumer: Did,
    pub sources: Vec<Did>,
    pub transform: TransformSpec,
    pub mode: Mode,
    /// `r`, required for off-chain acquisition.
    pub nonce: Option<u64>,
    /// Stop the whole run at the first excluded source.
    #[serde(default)]
    pub strict: bool,
}

impl AggregationRequest {
    /// Controller-side checks: more than one distinct source, every DID
    /// propagated, and a nonce for off-chain runs.
    pub fn validate(&self, registry: &Registry) -> Result<(), AggregatorError> {
        if self.sources.len() < 2 {
            return Err(AggregatorError::TooFewSources);
        }
        let mut seen = BTreeSet::new();
        for s in &self.sources {
            if !seen.insert(s) {
                return Err(AggregatorError::DuplicateSource(s.clone()));
            }
        }
        for did in std::iter::once(&self.consumer).chain(&self.sources) {
            if registry.resolve(did).is_empty() {
                return Err(AggregatorError::UnresolvableDid(did.clone()));
            }
        }
        if self.mode == Mode::OffChain && self.nonce.is_none() {
            return Err(AggregatorError::MissingNonce);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
