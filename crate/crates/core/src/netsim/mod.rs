//! Deterministic multi-actor simulation of the acquisition protocols.
//!
//! Entities, storage locations, the staging space and self-hosted servers are
//! actors exchanging [`Message`](crate::aggregator::Message)s over a seeded
//! scheduler. The same (scenario, seed) pair always yields the same trace.

mod actors;
mod faults;
mod network;
mod scenario;
mod threaded;
mod trace;


pub use actors::{EntityActor, HostActor, LocationActor, Node, StagingActor};
pub use faults::{AdversaryAction, AdversaryScript, NetworkFault};
pub use network::{Network, Shared};
pub use scenario::{
    run_scenario, run_scenario_with, AcquisitionConfig, AcquisitionResult, Check, EntityConfig, Expectation,
    LedgerSettings, PolicyConfig, Role, RunOptions, ScenarioConfig, ScenarioResult, StorageChoice, StorageSettings,
    World,
};
pub use trace::{Trace, TraceEvent, TraceRecord};

use crate::aggregator::RunId;

/// A scenario that cannot be built, pointing at the offending field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0} is not a consumer")]
    NotAConsumer(String),
    #[error("{0} made no progress")]
    Stalled(RunId),
    #[error("message {0} could not be decoded")]
    Undecodable(u64),
}
