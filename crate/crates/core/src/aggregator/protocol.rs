//! Wire messages and the execution context the role agents run in.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Mode, ReasonCode, RunOutcome};
use crate::crypto::CryptoProvider;
use crate::identity::{Did, Registry};
use crate::ledger::{FinalizationResult, Ledger, LedgerError, TxDraft, TxId};
use crate::storage::{ContentAddress, LocationHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunId(pub u64);

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run-{}", self.0)
    }
}

/// Network address of an actor: an entity DID, or a storage service.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub String);

impl Address {
    pub fn entity(did: &Did) -> Self {
        Address(did.as_str().to_string())
    }

    pub fn location(id: &str) -> Self {
        Address(format!("loc:{id}"))
    }

    pub fn staging(name: &str) -> Self {
        Address(format!("staging:{name}"))
    }

    pub fn host(name: &str) -> Self {
        Address(format!("host:{name}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// What a source shows its authority when asking it to authorize a consumer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuthEvidence {
    /// On-chain: the collection transaction naming the source.
    Collection { tx: TxId },
    /// Off-chain: `E_e(r, sk_auth_s)`.
    SignedNonce(Vec<u8>),
}

/// Every message exchanged during an acquisition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    /// Off-chain step 2: the nonce and the port to deliver to.
    Notify { run: RunId, consumer: Did, nonce: u64, port: String },
    AuthorizationRequest { run: RunId, mode: Mode, source: Did, consumer: Did, evidence: AuthEvidence },
    /// On-chain: the endorsement transaction; off-chain: `Ω`.
    AuthorizationGranted { run: RunId, endorsement: Option<TxId>, omega: Option<Vec<u8>> },
    AuthorizationDenied { run: RunId, reason: String },
    FetchPartition { run: RunId, index: usize, handle: LocationHandle },
    PartitionData { run: RunId, index: usize, bytes: Option<Vec<u8>>, sealed: bool },
    HostGet { run: RunId, key: String },
    HostData { run: RunId, key: String, bytes: Option<Vec<u8>> },
    StagePut { run: RunId, bytes: Vec<u8> },
    StageAck { run: RunId, address: Option<ContentAddress> },
    StageGet { run: RunId, source: Did, address: ContentAddress },
    StageData { run: RunId, source: Did, address: ContentAddress, bytes: Option<Vec<u8>> },
    /// Off-chain step 8, sent to port `z`: sealed credential, sealed `m`, `Ω`.
    Delivery { run: RunId, source: Did, vc: Vec<u8>, storage: Vec<u8>, omega: Vec<u8> },
    /// A source tells the consumer it dropped out, and why.
    Abort { run: RunId, source: Did, reason: ReasonCode },
}

/// How a wire payload is classified in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadClass {
    Ciphertext,
    PlaintextMetadata,
    /// Data partitions moved without at-rest encryption.
    PlaintextData,
}

impl PayloadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PayloadClass::Ciphertext => "ciphertext",
            PayloadClass::PlaintextMetadata => "plaintext-metadata",
            PayloadClass::PlaintextData => "plaintext-data",
        }
    }
}

impl std::str::FromStr for PayloadClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ciphertext" => Ok(PayloadClass::Ciphertext),
            "plaintext-metadata" | "plaintext" | "metadata" => Ok(PayloadClass::PlaintextMetadata),
            "plaintext-data" => Ok(PayloadClass::PlaintextData),
            other => Err(format!("unknown payload class `{other}`")),
        }
    }
}

impl Message {
    pub fn run(&self) -> RunId {
        match self {
            Message::Notify { run, .. }
            | Message::AuthorizationRequest { run, .. }
            | Message::AuthorizationGranted { run, .. }
            | Message::AuthorizationDenied { run, .. }
            | Message::FetchPartition { run, .. }
            | Message::PartitionData { run, .. }
            | Message::HostGet { run, .. }
            | Message::HostData { run, .. }
            | Message::StagePut { run, .. }
            | Message::StageAck { run, .. }
            | Message::StageGet { run, .. }
            | Message::StageData { run, .. }
            | Message::Delivery { run, .. }
            | Message::Abort { run, .. } => *run,
        }
    }

    pub fn class(&self) -> PayloadClass {
        match self {
            Message::PartitionData { sealed: false, bytes: Some(_), .. } => PayloadClass::PlaintextData,
            Message::PartitionData { .. }
            | Message::HostData { .. }
            | Message::StagePut { .. }
            | Message::StageData { .. }
            | Message::Delivery { .. } => PayloadClass::Ciphertext,
            _ => PayloadClass::PlaintextMetadata,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Message::Notify { .. } => "notify",
            Message::AuthorizationRequest { .. } => "authorization-request",
            Message::AuthorizationGranted { .. } => "authorization-granted",
            Message::AuthorizationDenied { .. } => "authorization-denied",
            Message::FetchPartition { .. } => "fetch-partition",
            Message::PartitionData { .. } => "partition-data",
            Message::HostGet { .. } => "host-get",
            Message::HostData { .. } => "host-data",
            Message::StagePut { .. } => "stage-put",
            Message::StageAck { .. } => "stage-ack",
            Message::StageGet { .. } => "stage-get",
            Message::StageData { .. } => "stage-data",
            Message::Delivery { .. } => "delivery",
            Message::Abort { .. } => "abort",
        }
    }

    /// Wire encoding.
    pub fn encode(&self) -> Vec<u8> {
        bincode::serialize(self).expect("messages always serialize")
    }

    pub fn decode(bytes: &[u8]) -> Option<Message> {
        bincode::deserialize(bytes).ok()
    }
}

/// Everything an agent may touch while handling an event.
pub trait Context {
    fn send(&mut self, to: &Address, port: &str, msg: Message, step: u8);
    /// Mediator: submit a transaction; the submission is traced.
    fn submit(&mut self, draft: TxDraft, step: u8) -> Result<FinalizationResult, LedgerError>;
    fn ledger(&self) -> &Ledger;
    fn registry(&self) -> &Registry;
    fn provider(&self) -> &dyn CryptoProvider;
    /// Records a verification verdict or status change in the trace.
    fn note(&mut self, run: RunId, step: u8, text: String);
    /// Hands a finished run back to whoever started it.
    fn complete(&mut self, outcome: RunOutcome);
}
