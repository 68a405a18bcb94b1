//! Data persistence: specifications and adapters, the partition/mapping/chain
//! stack for decentralized storage, self-hosted hosts, and the staging space.

mod backend;
mod chain;
mod mapping;
mod partition;
mod schema;

pub use backend::{
    open_from_host, open_partitions, seal_for_host, BackendKind, ContentAddress, DecentralizedStorage,
    SelfHostedStorage, SelfHostedStore, StagingSpace, StorageBackend, StorageInfo, StoredRef,
};
pub use chain::{parse_locations, record_locations};
pub use mapping::{
    assign_and_upload, fetch, LocationEntry, LocationHandle, LocationPool, LocationSet, LocationStore,
    LocationTable, PolicyKind, RoundRobin, SelectionPolicy, WeightedScore,
};
pub use partition::{assemble, partition, partition_count, PartitionSet};
pub use schema::{apply_adapter, DataEnvelope, DataSpecification, FieldType};

use crate::ledger::{FinalizationResult, LedgerError, TxKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StorageError {
    #[error("scatter degree {0} is outside [0, 1)")]
    InvalidScatterDegree(f64),
    #[error("cannot partition empty data")]
    EmptyData,
    #[error("partition {0} is missing")]
    MissingPartition(usize),
    #[error("need {needed} locations, {available} available")]
    InsufficientLocations { needed: usize, available: usize },
    #[error("upload of partition {index} to {location} failed")]
    UploadFailure { index: usize, location: String },
    #[error("location {location} holding partition {index} is unreachable")]
    LocationUnreachable { index: usize, location: String },
    #[error("self-hosted store {0} is unreachable")]
    HostUnreachable(String),
    #[error("staging space is unreachable")]
    StagingUnreachable,
    #[error("no object {0}")]
    UnknownObject(String),
    #[error("expected a location transaction, got {0}")]
    WrongTransactionKind(TxKind),
    #[error("reference is not for the {expected} backend")]
    WrongBackend { expected: BackendKind },
    #[error("malformed location set: {0}")]
    MalformedLocations(String),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("decryption failed")]
    DecryptionFailure,
    #[error("ledger did not finalize the transaction ({} nodes accepted)", .0.accepted_nodes)]
    LedgerRejection(FinalizationResult),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("invalid specification: {0}")]
    InvalidSpecification(String),
    #[error("i/o: {0}")]
    Io(String),
}
