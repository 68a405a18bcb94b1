use serde::{Deserialize, Serialize};

use super::{Mode, ReasonCode, RunId};
use crate::canonical;
use crate::identity::Did;
use crate::ledger::TxId;
use crate::storage::DataEnvelope;

/// Per-source progress as seen by the consumer.
///
/// `Pending → Delivered → Authorized → Verified`, where `Delivered` means the
/// evidence arrived (a storage transaction or a port delivery), `Authorized`
/// means the Arbitrator accepted authentication, ownership proof and
/// approval, and `Verified` means the data was fetched, decrypted and matched
/// the credential's claim. `Rejected` and `Failed` are terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum SourceStatus {
    Pending,
    Delivered,
    Authorized,
    Verified,
    Rejected,
    Failed(ReasonCode),
}

impl SourceStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, SourceStatus::Verified | SourceStatus::Rejected | SourceStatus::Failed(_))
    }

    fn rank(self) -> u8 {
        match self {
            SourceStatus::Pending => 0,
            SourceStatus::Delivered => 1,
            SourceStatus::Authorized => 2,
            _ => 3,
        }
    }

    /// Whether `self → next` is a legal transition.
    pub fn can_become(self, next: SourceStatus) -> bool {
        if self.is_terminal() {
            return false;
        }
        match next {
            SourceStatus::Rejected => self == SourceStatus::Pending,
            SourceStatus::Failed(_) => true,
            _ => next.rank() == self.rank() + 1,
        }
    }

    pub fn reason(self) -> Option<ReasonCode> {
        match self {
            SourceStatus::Failed(r) => Some(r),
            SourceStatus::Rejected => Some(ReasonCode::Rejected),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source: Did,
    #[serde(flatten)]
    pub status: SourceStatus,
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: RunId,
    pub mode: Mode,
    pub consumer: Did,
    pub strict: bool,
    pub sources: Vec<SourceReport>,
    /// Transactions finalized while the run was active, in order.
    pub ledger_txs: Vec<TxId>,
    /// Digest of the output envelope, when there is one.
    pub output_digest: Option<String>,
    pub error: Option<String>,
}

impl RunReport {
    pub fn status_of(&self, source: &Did) -> Option<SourceStatus> {
        self.sources.iter().find(|s| &s.source == source).map(|s| s.status)
    }

    pub fn to_canonical(&self) -> String {
        canonical::to_string(self).expect("reports always serialize")
    }
}

/// A finished run: the report and, if any source verified, the output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    pub output: Option<DataEnvelope>,
}
