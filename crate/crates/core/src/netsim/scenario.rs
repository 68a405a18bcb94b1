//! Scenario files: who takes part, where data lives, and which acquisitions
//! to run with which adversaries and expected outcomes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::faults::{AdversaryAction, AdversaryScript, NetworkFault};
use super::network::{Network, Shared};
use super::trace::{Trace, TraceEvent};
use super::{threaded, ConfigError, EntityActor, HostActor, LocationActor, Node, SimError, StagingActor};
use crate::aggregator::{
    endorse_data, process_transform, Address, AggregationRequest, ApprovalPolicy, AuthorityAgent, ConsumerClient,
    Mode, ReasonCode, RunId, RunOutcome, SourceAgent, SourceBehavior, SourceHoldings, SourceStatus, TransformSpec,
};
use crate::crypto::{CryptoProvider, DecryptionKey, ProviderKind};
use crate::identity::{Did, Identity};
use crate::ledger::{Ledger, LedgerConfig, Threshold};
use crate::storage::{
    parse_locations, DataEnvelope, DataSpecification, DecentralizedStorage, LocationEntry, LocationPool,
    LocationTable, PolicyKind, SelfHostedStorage, SelfHostedStore, StagingSpace, StorageBackend, StoredRef,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Seeds every entity's keys unless the entity gives its own.
    #[serde(default)]
    pub key_seed: u64,
    #[serde(default)]
    pub ledger: LedgerSettings,
    #[serde(default)]
    pub storage: StorageSettings,
    /// Storage location ids for decentralized storage.
    #[serde(default)]
    pub locations: Vec<String>,
    #[serde(default = "default_staging")]
    pub staging: String,
    pub entities: Vec<EntityConfig>,
    #[serde(default)]
    pub acquisitions: Vec<AcquisitionConfig>,
}

fn default_staging() -> String {
    "public".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerSettings {
    pub nodes: usize,
    /// `δ` as `[numerator, denominator]`.
    pub delta: [u64; 2],
    #[serde(default)]
    pub byzantine: usize,
}

impl Default for LedgerSettings {
    fn default() -> Self {
        LedgerSettings { nodes: 4, delta: [2, 3], byzantine: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageChoice {
    #[default]
    Decentralized,
    SelfHosted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageSettings {
    pub backend: StorageChoice,
    /// Scatter degree `γ`.
    pub gamma: f64,
    pub policy: PolicyKind,
    pub encrypt_partitions: bool,
    pub seal_locations: bool,
    /// Server name for self-hosted storage.
    pub host: Option<String>,
    pub max_attempts: usize,
}

impl Default for StorageSettings {
    fn default() -> Self {
        StorageSettings {
            backend: StorageChoice::Decentralized,
            gamma: 0.0,
            policy: PolicyKind::RoundRobin,
            encrypt_partitions: true,
            seal_locations: true,
            host: None,
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Authority,
    Consumer,
    Source,
}

/// Deny lists by entity name.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default)]
    pub deny_sources: Vec<String>,
    #[serde(default)]
    pub deny_consumers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityConfig {
    pub name: String,
    pub roles: Vec<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// The endorsing authority `A(s)`, for sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authority: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<Value>,
    /// Overrides the scenario-wide storage settings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageSettings>,
    #[serde(default)]
    pub policy: PolicyConfig,
}

impl EntityConfig {
    pub fn has(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub consumer: String,
    pub sources: Vec<String>,
    pub mode: Mode,
    /// Off-chain nonce; derived from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<u64>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub transform: TransformSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adversaries: Vec<AdversaryScript>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

/// Assertions checked after a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    /// Entity name to `verified`, `rejected`, or a failure reason code.
    #[serde(default)]
    pub sources: BTreeMap<String, String>,
    /// Whether an output envelope is produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<bool>,
    /// Substring of the run error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Number of transactions the run adds to the ledger.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger_delta: Option<usize>,
    /// Compare the output with the transform applied directly to the
    /// verified sources' plaintext envelopes.
    #[serde(default = "yes")]
    pub oracle: bool,
}

fn yes() -> bool {
    true
}

impl Default for Expectation {
    fn default() -> Self {
        Expectation { sources: BTreeMap::new(), output: None, error: None, ledger_delta: None, oracle: true }
    }
}

fn parse_expected_status(s: &str) -> Result<SourceStatus, String> {
    match s {
        "verified" => Ok(SourceStatus::Verified),
        "rejected" => Ok(SourceStatus::Rejected),
        code => code.parse::<ReasonCode>().map(SourceStatus::Failed),
    }
}

impl ScenarioConfig {
    /// Parses scenario text; structural errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "$".to_string() } else { path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn entity(&self, name: &str) -> Option<&EntityConfig> {
        self.entities.iter().find(|e| e.name == name)
    }

    /// Semantic checks beyond the structure.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let l = &self.ledger;
        if l.nodes < 2 {
            return Err(ConfigError::new("ledger.nodes", "at least two nodes"));
        }
        if Threshold::new(l.delta[0], l.delta[1]).is_err() {
            return Err(ConfigError::new("ledger.delta", "need 0 < numerator < denominator"));
        }
        if l.byzantine > l.nodes {
            return Err(ConfigError::new("ledger.byzantine", "more byzantine nodes than nodes"));
        }
        if self.entities.is_empty() {
            return Err(ConfigError::new("entities", "no entities"));
        }
        let mut names = BTreeSet::new();
        for (i, e) in self.entities.iter().enumerate() {
            let at = |field: &str| format!("entities[{i}].{field}");
            if e.name.is_empty() || !names.insert(e.name.as_str()) {
                return Err(ConfigError::new(at("name"), format!("empty or duplicate name `{}`", e.name)));
            }
            if e.roles.is_empty() {
                return Err(ConfigError::new(at("roles"), "no roles"));
            }
        }
        let with_role = |name: &str, role: Role| self.entity(name).is_some_and(|e| e.has(role));
        for (i, e) in self.entities.iter().enumerate() {
            let at = |field: &str| format!("entities[{i}].{field}");
            for (j, n) in e.policy.deny_sources.iter().chain(&e.policy.deny_consumers).enumerate() {
                if self.entity(n).is_none() {
                    return Err(ConfigError::new(at(&format!("policy[{j}]")), format!("unknown entity `{n}`")));
                }
            }
            if !e.has(Role::Source) {
                continue;
            }
            match &e.authority {
                None => return Err(ConfigError::new(at("authority"), "a source needs an endorsing authority")),
                Some(a) if !with_role(a, Role::Authority) => {
                    return Err(ConfigError::new(at("authority"), format!("`{a}` is not an authority")))
                }
                _ => {}
            }
            let Some(spec) = &e.spec else {
                return Err(ConfigError::new(at("spec"), "a source needs a data specification"));
            };
            let spec = DataSpecification::parse(spec.clone()).map_err(|err| ConfigError::new(at("spec"), err.to_string()))?;
            DataEnvelope::new(spec, &e.records).map_err(|err| ConfigError::new(at("records"), err.to_string()))?;
            let storage = e.storage.as_ref().unwrap_or(&self.storage);
            let storage_at = if e.storage.is_some() { at("storage") } else { "storage".to_string() };
            if !(0.0..1.0).contains(&storage.gamma) {
                return Err(ConfigError::new(format!("{storage_at}.gamma"), "must lie in [0, 1)"));
            }
            match storage.backend {
                StorageChoice::Decentralized if self.locations.is_empty() => {
                    return Err(ConfigError::new("locations", "decentralized storage needs locations"))
                }
                StorageChoice::SelfHosted if storage.host.as_deref().is_none_or(str::is_empty) => {
                    return Err(ConfigError::new(format!("{storage_at}.host"), "self-hosted storage needs a host"))
                }
                _ => {}
            }
        }
        for (k, acq) in self.acquisitions.iter().enumerate() {
            let at = |field: &str| format!("acquisitions[{k}].{field}");
            if !with_role(&acq.consumer, Role::Consumer) {
                return Err(ConfigError::new(at("consumer"), format!("`{}` is not a consumer", acq.consumer)));
            }
            for (j, s) in acq.sources.iter().enumerate() {
                if !with_role(s, Role::Source) {
                    return Err(ConfigError::new(at(&format!("sources[{j}]")), format!("`{s}` is not a source")));
                }
            }
            for (j, adv) in acq.adversaries.iter().enumerate() {
                let path = at(&format!("adversaries[{j}]"));
                if self.entity(&adv.target).is_none() {
                    return Err(ConfigError::new(format!("{path}.target"), format!("unknown entity `{}`", adv.target)));
                }
                let source_only = !matches!(adv.action, AdversaryAction::DropMessage { .. });
                if source_only && !with_role(&adv.target, Role::Source) {
                    return Err(ConfigError::new(format!("{path}.target"), "this action needs a source"));
                }
                if let AdversaryAction::WrongApprover { authority } = &adv.action {
                    if !with_role(authority, Role::Authority) {
                        return Err(ConfigError::new(format!("{path}.authority"), format!("`{authority}` is not an authority")));
                    }
                }
            }
            if let Some(expect) = &acq.expect {
                for (name, status) in &expect.sources {
                    if !acq.sources.contains(name) {
                        return Err(ConfigError::new(at(&format!("expect.sources.{name}")), "not a source of this acquisition"));
                    }
                    parse_expected_status(status).map_err(|e| ConfigError::new(at(&format!("expect.sources.{name}")), e))?;
                }
            }
        }
        Ok(())
    }
}

/// Knobs a caller may turn without editing the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: Option<Mode>,
    pub strict: Option<bool>,
    pub provider: ProviderKind,
    /// Run actors on their own threads; traces are then not reproducible.
    pub threaded: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { mode: None, strict: None, provider: ProviderKind::Deterministic, threaded: false }
    }
}

#[derive(Debug, Clone)]
struct Member {
    identity: Identity,
    envelope: Option<DataEnvelope>,
}

/// A built scenario: identities propagated, data stored and endorsed, and
/// every actor placed on the network.
#[derive(Debug)]
pub struct World {
    pub shared: Shared,
    pub network: Network,
    members: BTreeMap<String, Member>,
    next_run: u64,
    seed: u64,
    threaded: bool,
}

impl World {
    /// Runs the initialization phase of `config`.
    pub fn build(config: &ScenarioConfig, seed: u64, provider: ProviderKind) -> Result<World, ConfigError> {
        config.validate()?;
        let l = &config.ledger;
        let delta = Threshold::new(l.delta[0], l.delta[1]).map_err(|e| ConfigError::new("ledger.delta", e.to_string()))?;
        let ledger_config = LedgerConfig::honest(l.nodes, delta).with_byzantine(l.byzantine, config.key_seed);
        let ledger = Arc::new(Ledger::new(ledger_config).map_err(|e| ConfigError::new("ledger", e.to_string()))?);
        let provider: Arc<dyn CryptoProvider> = Arc::from(provider.build(config.key_seed));
        let shared = Shared::new(ledger.clone(), provider.clone());
        let mut network = Network::new(seed);

        let mut members = BTreeMap::new();
        for (i, e) in config.entities.iter().enumerate() {
            let seed = e.seed.unwrap_or(config.key_seed.wrapping_mul(1000).wrapping_add(i as u64));
            let identity = Identity::generate(provider.as_ref(), Some(seed));
            shared
                .registry
                .propagate(&identity.document(), &identity.keyring.auth)
                .map_err(|err| ConfigError::new(format!("entities[{i}]"), err.to_string()))
                .and_then(|r| {
                    r.finalized
                        .then_some(())
                        .ok_or_else(|| ConfigError::new("ledger", "the ledger does not finalize DID propagation"))
                })?;
            members.insert(e.name.clone(), Member { identity, envelope: None });
        }
        let did_of = |name: &str| members[name].identity.did.clone();
        let policy_of = |e: &EntityConfig| ApprovalPolicy {
            deny_sources: e.policy.deny_sources.iter().map(|n| did_of(n)).collect(),
            deny_consumers: e.policy.deny_consumers.iter().map(|n| did_of(n)).collect(),
        };

        let table = Arc::new(LocationTable::new(config.locations.iter().map(LocationEntry::new).collect()));
        let pool = Arc::new(LocationPool::new(config.locations.iter().cloned()));
        let mut sealed_keys: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut hosts: BTreeMap<String, Arc<SelfHostedStore>> = BTreeMap::new();
        let staging = Arc::new(StagingSpace::new(config.staging.clone()));
        let mut sources = BTreeMap::new();
        let mut envelopes = BTreeMap::new();

        for (i, e) in config.entities.iter().enumerate().filter(|(_, e)| e.has(Role::Source)) {
            let at = |field: &str| format!("entities[{i}].{field}");
            let spec = DataSpecification::parse(e.spec.clone().expect("validated")).expect("validated");
            let envelope = DataEnvelope::new(spec, &e.records).expect("validated");
            let data = envelope.to_bytes();
            let member = &members[&e.name];
            let identity = member.identity.clone();
            let settings = e.storage.as_ref().unwrap_or(&config.storage);
            let storage_err = |err: crate::storage::StorageError| ConfigError::new(at("storage"), err.to_string());
            let holdings = match settings.backend {
                StorageChoice::Decentralized => {
                    let partition_key = settings.encrypt_partitions.then(|| provider.gen_symmetric(None));
                    let location_key = settings.seal_locations.then(|| provider.gen_symmetric(None));
                    let backend = DecentralizedStorage {
                        ledger: ledger.clone(),
                        provider: provider.clone(),
                        table: table.clone(),
                        pool: pool.clone(),
                        policy: settings.policy.build(),
                        gamma: settings.gamma,
                        owner: identity.wallet(),
                        partition_key: partition_key.clone(),
                        location_key: location_key.clone(),
                        max_attempts: settings.max_attempts,
                    };
                    let stored = backend.store(&data).map_err(storage_err)?;
                    if partition_key.is_some() {
                        let StoredRef::Decentralized { tx } = &stored else { unreachable!() };
                        let tx = ledger.get(*tx).expect("just recorded");
                        let locations = parse_locations(&tx, location_key.as_ref().map(DecryptionKey::Symmetric))
                            .map_err(storage_err)?;
                        for h in locations.iter() {
                            sealed_keys.entry(h.location().to_string()).or_default().insert(h.key().to_string());
                        }
                    }
                    SourceHoldings { stored, partition_key, location_key }
                }
                StorageChoice::SelfHosted => {
                    let name = settings.host.clone().expect("validated");
                    let host = hosts.entry(name.clone()).or_insert_with(|| Arc::new(SelfHostedStore::in_memory(name)));
                    let backend =
                        SelfHostedStorage { host: host.clone(), provider: provider.clone(), owner: identity.keyring.auth.clone() };
                    let stored = backend.store(&data).map_err(storage_err)?;
                    SourceHoldings { stored, partition_key: None, location_key: None }
                }
            };
            let authority_name = e.authority.as_deref().expect("validated");
            let authority_cfg = config.entity(authority_name).expect("validated");
            let authority = &members[authority_name].identity;
            let record = endorse_data(&shared.registry, &identity.did, authority, &data, &policy_of(authority_cfg))
                .map_err(|err| ConfigError::new(at("authority"), err.to_string()))?;
            let agent = SourceAgent::new(identity, authority.did.clone(), record.vc, holdings, config.staging.clone());
            sources.insert(e.name.clone(), agent);
            envelopes.insert(e.name.clone(), envelope);
        }

        for e in &config.entities {
            let identity = members[&e.name].identity.clone();
            let actor = EntityActor {
                name: e.name.clone(),
                did: identity.did.clone(),
                consumer: e.has(Role::Consumer).then(|| ConsumerClient::new(identity.clone())),
                source: sources.remove(&e.name),
                authority: e.has(Role::Authority).then(|| AuthorityAgent::new(identity.clone(), policy_of(e))),
            };
            network.add(Address::entity(&identity.did), Node::Entity(Box::new(actor)));
        }
        for id in &config.locations {
            let store = pool.store(id).expect("pool built from the same ids").clone();
            let sealed = sealed_keys.remove(id).unwrap_or_default();
            network.add(Address::location(id), Node::Location(LocationActor { store, sealed }));
        }
        network.add(Address::staging(&config.staging), Node::Staging(StagingActor { space: staging }));
        for (name, store) in hosts {
            network.add(Address::host(&name), Node::Host(HostActor { store }));
        }
        for tx in ledger.snapshot() {
            network.trace_mut().push(TraceEvent::Ledger {
                actor: "setup".into(),
                step: 0,
                kind: tx.kind,
                tx: tx.id,
                finalized: true,
                accepted: l.nodes,
            });
        }
        for (name, envelope) in envelopes {
            members.get_mut(&name).expect("present").envelope = Some(envelope);
        }
        Ok(World { shared, network, members, next_run: 1, seed, threaded: false })
    }

    pub fn set_threaded(&mut self, threaded: bool) {
        self.threaded = threaded;
    }

    pub fn did(&self, name: &str) -> Option<&Did> {
        self.members.get(name).map(|m| &m.identity.did)
    }

    pub fn identity(&self, name: &str) -> Option<&Identity> {
        self.members.get(name).map(|m| &m.identity)
    }

    /// The plaintext envelope a source stored at setup.
    pub fn envelope(&self, name: &str) -> Option<&DataEnvelope> {
        self.members.get(name).and_then(|m| m.envelope.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }

    pub fn ledger(&self) -> &Ledger {
        &self.shared.ledger
    }

    pub fn trace(&self) -> &Trace {
        self.network.trace()
    }

    fn name_of(&self, did: &Did) -> Option<&str> {
        self.members.iter().find(|(_, m)| &m.identity.did == did).map(|(n, _)| n.as_str())
    }

    /// Builds the request for acquisition `index` of `config`.
    pub fn request(&self, acq: &AcquisitionConfig, index: usize, options: &RunOptions) -> AggregationRequest {
        let mode = options.mode.unwrap_or(acq.mode);
        let nonce = match mode {
            Mode::OffChain => Some(acq.nonce.unwrap_or_else(|| {
                ChaCha8Rng::seed_from_u64(self.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)).gen()
            })),
            Mode::OnChain => acq.nonce,
        };
        AggregationRequest {
            consumer: self.members[&acq.consumer].identity.did.clone(),
            sources: acq.sources.iter().map(|s| self.members[s].identity.did.clone()).collect(),
            transform: acq.transform.clone(),
            mode,
            nonce,
            strict: options.strict.unwrap_or(acq.strict),
        }
    }

    /// Runs one acquisition with the given adversaries in place.
    pub fn acquire(&mut self, request: AggregationRequest, adversaries: &[AdversaryScript]) -> Result<RunOutcome, SimError> {
        let mut faults = Vec::new();
        for adv in adversaries {
            let did = self
                .did(&adv.target)
                .cloned()
                .ok_or_else(|| ConfigError::new("adversaries.target", format!("unknown entity `{}`", adv.target)))?;
            let mut behavior = SourceBehavior::default();
            match &adv.action {
                AdversaryAction::TamperVc => behavior.tamper_vc = true,
                AdversaryAction::ForgeClaim => behavior.forge_claim = true,
                AdversaryAction::ReplayOmega => behavior.replay_omega = true,
                AdversaryAction::ImpersonateDid => behavior.impersonate = true,
                AdversaryAction::SkipApproval => behavior.skip_approval = true,
                AdversaryAction::WrongApprover { authority } => {
                    let a = self.did(authority).cloned().ok_or_else(|| {
                        ConfigError::new("adversaries.authority", format!("unknown entity `{authority}`"))
                    })?;
                    behavior.approver = Some(a);
                }
                AdversaryAction::DropMessage { step } => {
                    faults.push(NetworkFault::Drop { sender: Address::entity(&did), step: *step });
                    continue;
                }
                AdversaryAction::CorruptPartition => {
                    faults.push(NetworkFault::Corrupt { source: did });
                    continue;
                }
            }
            let impostor = behavior.impersonate.then(|| self.shared.provider.gen_keypair(None));
            let agent = self
                .network
                .node_mut(&Address::entity(&did))
                .and_then(Node::entity_mut)
                .and_then(|e| e.source.as_mut())
                .ok_or_else(|| ConfigError::new("adversaries.target", format!("`{}` is not a source", adv.target)))?;
            let mut merged = agent.behavior.clone();
            merge(&mut merged, behavior);
            agent.set_behavior(merged, impostor);
        }
        self.network.set_faults(faults);
        let run = RunId(self.next_run);
        self.next_run += 1;
        let consumer = Address::entity(&request.consumer);
        let result = if self.threaded {
            threaded::run(&mut self.network, &self.shared, &consumer, run, request)
        } else {
            self.network.run(&self.shared, &consumer, run, request)
        };
        self.network.set_faults(Vec::new());
        let addresses: Vec<Address> = self.network.nodes().map(|(a, _)| a.clone()).collect();
        for a in addresses {
            if let Some(s) = self.network.node_mut(&a).and_then(Node::entity_mut).and_then(|e| e.source.as_mut()) {
                s.set_behavior(SourceBehavior::default(), None);
            }
        }
        result
    }

    pub fn run_onchain(&mut self, mut request: AggregationRequest) -> Result<RunOutcome, SimError> {
        request.mode = Mode::OnChain;
        self.acquire(request, &[])
    }

    pub fn run_offchain(&mut self, mut request: AggregationRequest) -> Result<RunOutcome, SimError> {
        request.mode = Mode::OffChain;
        self.acquire(request, &[])
    }

    /// The transform applied directly to the plaintext envelopes of the
    /// sources that `outcome` verified, in request order.
    pub fn oracle(&self, request: &AggregationRequest, outcome: &RunOutcome) -> Option<DataEnvelope> {
        let envelopes: Vec<DataEnvelope> = request
            .sources
            .iter()
            .filter(|s| outcome.report.status_of(s) == Some(SourceStatus::Verified))
            .filter_map(|s| self.name_of(s).and_then(|n| self.envelope(n)).cloned())
            .collect();
        if envelopes.is_empty() {
            return None;
        }
        process_transform(&envelopes, &request.transform).ok()
    }
}

fn merge(into: &mut SourceBehavior, b: SourceBehavior) {
    into.tamper_vc |= b.tamper_vc;
    into.forge_claim |= b.forge_claim;
    into.replay_omega |= b.replay_omega;
    into.impersonate |= b.impersonate;
    into.skip_approval |= b.skip_approval;
    if b.approver.is_some() {
        into.approver = b.approver;
    }
}

/// One named assertion and whether it held.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub what: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionResult {
    pub name: String,
    pub request: AggregationRequest,
    pub outcome: RunOutcome,
    pub ledger_before: usize,
    pub ledger_after: usize,
    pub checks: Vec<Check>,
}

impl AcquisitionResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug)]
pub struct ScenarioResult {
    pub name: String,
    pub seed: u64,
    pub runs: Vec<AcquisitionResult>,
    pub trace: Trace,
    pub world: World,
}

impl ScenarioResult {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(AcquisitionResult::passed)
    }
}

/// Builds `config` and runs every acquisition in order.
pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<ScenarioResult, SimError> {
    run_scenario_with(config, seed, &RunOptions::default())
}

pub fn run_scenario_with(config: &ScenarioConfig, seed: u64, options: &RunOptions) -> Result<ScenarioResult, SimError> {
    let mut world = World::build(config, seed, options.provider)?;
    world.set_threaded(options.threaded);
    let mut runs = Vec::new();
    for (k, acq) in config.acquisitions.iter().enumerate() {
        let request = world.request(acq, k, options);
        let before = world.ledger().len();
        let outcome = world.acquire(request.clone(), &acq.adversaries)?;
        let after = world.ledger().len();
        let checks = check(&world, acq, &request, &outcome, after - before);
        runs.push(AcquisitionResult {
            name: acq.name.clone().unwrap_or_else(|| format!("acquisition-{k}")),
            request,
            outcome,
            ledger_before: before,
            ledger_after: after,
            checks,
        });
    }
    let trace = world.trace().clone();
    Ok(ScenarioResult { name: config.name.clone(), seed, runs, trace, world })
}

fn check(
    world: &World,
    acq: &AcquisitionConfig,
    request: &AggregationRequest,
    outcome: &RunOutcome,
    ledger_delta: usize,
) -> Vec<Check> {
    let default = Expectation::default();
    let expect = acq.expect.as_ref().unwrap_or(&default);
    let mut checks = Vec::new();
    for (name, want) in &expect.sources {
        let got = world.did(name).and_then(|d| outcome.report.status_of(d));
        let want = parse_expected_status(want).ok();
        checks.push(Check {
            what: format!("{name} is {}", want.map_or("?".into(), |w| status_label(&w))),
            passed: got.is_some() && got == want,
        });
    }
    if let Some(want) = expect.output {
        checks.push(Check { what: format!("output present = {want}"), passed: outcome.output.is_some() == want });
    }
    if let Some(want) = &expect.error {
        let passed = outcome.report.error.as_deref().is_some_and(|e| e.contains(want.as_str()));
        checks.push(Check { what: format!("error mentions `{want}`"), passed });
    }
    if let Some(want) = expect.ledger_delta {
        checks.push(Check { what: format!("run adds {want} ledger transactions"), passed: ledger_delta == want });
    }
    if expect.oracle {
        if let Some(output) = &outcome.output {
            let passed = world.oracle(request, outcome).as_ref() == Some(output);
            checks.push(Check { what: "output equals the plaintext transform".into(), passed });
        }
    }
    checks
}

fn status_label(s: &SourceStatus) -> String {
    match s {
        SourceStatus::Failed(r) => r.to_string(),
        other => serde_json::to_value(other)
            .ok()
            .and_then(|v| v.get("status").and_then(Value::as_str).map(str::to_string))
            .unwrap_or_default(),
    }
}
