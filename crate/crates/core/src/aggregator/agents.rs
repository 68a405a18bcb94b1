//! Role agents driving the on-chain and off-chain acquisition protocols.
//!
//! Each agent reacts to messages and to clock ticks. A tick arrives when no
//! message is in flight; `idle` counts consecutive ticks without any traffic,
//! which is how waiting agents detect lost messages.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    arbitrate, check_claim, process_transform, Address, AggregationRequest, AggregatorError, Approval, ApprovalPolicy,
    AuthEvidence, Context, Evidence, Message, Mode, ReasonCode, RunId, RunOutcome, RunReport, SourceReport,
    SourceStatus,
};
use crate::crypto::{
    decrypt_bytes, hash, sign_recover, AsymmetricKeyPair, DecryptionKey, EncryptionKey, PublicKey, SymmetricKey,
};
use crate::identity::{Did, Identity, VerifiableCredential};
use crate::ledger::{PropValue, Query, TxDraft, TxId, TxKind};
use crate::storage::{
    assemble, open_from_host, open_partitions, parse_locations, BackendKind, ContentAddress, DataEnvelope,
    PartitionSet, StorageInfo, StoredRef,
};

/// Idle ticks a source waits for a reply before giving up.
pub const SOURCE_PATIENCE: u32 = 2;
/// Idle ticks the consumer waits before closing a run; longer than
/// [`SOURCE_PATIENCE`] so abort notices arrive first.
pub const CONSUMER_PATIENCE: u32 = 4;

fn step(mode: Mode, onchain: u8, offchain: u8) -> u8 {
    match mode {
        Mode::OnChain => onchain,
        Mode::OffChain => offchain,
    }
}

fn auth_key_of(ctx: &dyn Context, did: &Did) -> Option<PublicKey> {
    ctx.registry().resolve(did).document().and_then(|d| d.auth_key())
}

/// Where a source's data lives and the keys it needs to read it back.
#[derive(Debug, Clone)]
pub struct SourceHoldings {
    pub stored: StoredRef,
    /// Opens sealed partitions on decentralized storage.
    pub partition_key: Option<SymmetricKey>,
    /// Opens a sealed location set.
    pub location_key: Option<SymmetricKey>,
}

/// Scripted misbehavior of a source. The default is honest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBehavior {
    /// Alter the credential before sealing it.
    #[serde(default)]
    pub tamper_vc: bool,
    /// Ship substituted data under the original credential.
    #[serde(default)]
    pub forge_claim: bool,
    /// Present an approval obtained for a different nonce.
    #[serde(default)]
    pub replay_omega: bool,
    /// Claim this DID while signing with a key that is not its own.
    #[serde(default)]
    pub impersonate: bool,
    /// Deliver without asking any authority.
    #[serde(default)]
    pub skip_approval: bool,
    /// Ask this authority instead of the one that endorsed the data.
    #[serde(default)]
    pub approver: Option<Did>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SourcePhase {
    Authorizing,
    Collecting,
    Staging,
    Done,
}

#[derive(Debug)]
struct SourceRun {
    mode: Mode,
    consumer: Did,
    port: Option<String>,
    phase: SourcePhase,
    omega: Option<Vec<u8>>,
    partitions: Option<PartitionSet>,
    host_parts: BTreeMap<String, Vec<u8>>,
    pending_puts: usize,
    staged: Vec<ContentAddress>,
}

/// A data source `s`.
#[derive(Debug)]
pub struct SourceAgent {
    pub identity: Identity,
    /// `A(s)`.
    pub authority: Did,
    pub vc: VerifiableCredential,
    pub holdings: SourceHoldings,
    pub staging: String,
    pub behavior: SourceBehavior,
    /// Signs in place of the real authentication key when impersonating.
    impostor: Option<AsymmetricKeyPair>,
    runs: BTreeMap<RunId, SourceRun>,
    seen_collections: BTreeSet<TxId>,
}

impl SourceAgent {
    pub fn new(
        identity: Identity,
        authority: Did,
        vc: VerifiableCredential,
        holdings: SourceHoldings,
        staging: String,
    ) -> Self {
        SourceAgent {
            identity,
            authority,
            vc,
            holdings,
            staging,
            behavior: SourceBehavior::default(),
            impostor: None,
            runs: BTreeMap::new(),
            seen_collections: BTreeSet::new(),
        }
    }

    /// Replaces the behavior; an impersonating source gets a stand-in key.
    pub fn set_behavior(&mut self, behavior: SourceBehavior, impostor: Option<AsymmetricKeyPair>) {
        self.impostor = if behavior.impersonate { impostor } else { None };
        self.behavior = behavior;
    }

    pub fn did(&self) -> &Did {
        &self.identity.did
    }

    fn signing_key(&self) -> &AsymmetricKeyPair {
        self.impostor.as_ref().unwrap_or(&self.identity.keyring.auth)
    }

    fn approver(&self) -> Address {
        Address::entity(self.behavior.approver.as_ref().unwrap_or(&self.authority))
    }

    pub fn on_tick(&mut self, idle: u32, ctx: &mut dyn Context) {
        self.watch_collections(ctx);
        if idle < SOURCE_PATIENCE {
            return;
        }
        let stalled: Vec<_> = self
            .runs
            .iter()
            .filter(|(_, r)| r.phase != SourcePhase::Done)
            .map(|(id, r)| (*id, r.phase))
            .collect();
        for (run, phase) in stalled {
            let reason = match phase {
                SourcePhase::Authorizing => ReasonCode::AuthorityUnreachable,
                SourcePhase::Collecting => ReasonCode::LocationUnreachable,
                _ => ReasonCode::StagingUnreachable,
            };
            self.abort(run, reason, ctx);
        }
    }

    /// On-chain step 3: act on collection transactions that name this source.
    fn watch_collections(&mut self, ctx: &mut dyn Context) {
        let q = Query::kind(TxKind::Collection).list_contains("srcIds", self.did().as_str());
        for tx in ctx.ledger().query(&q) {
            if !self.seen_collections.insert(tx.id) {
                continue;
            }
            let (Some(run), Some(consumer)) = (
                tx.text("run").and_then(|r| r.strip_prefix("run-")).and_then(|n| n.parse().ok()).map(RunId),
                tx.text("consumer").and_then(|c| c.parse::<Did>().ok()),
            ) else {
                continue;
            };
            self.runs.insert(run, SourceRun::new(Mode::OnChain, consumer.clone(), None));
            if self.behavior.skip_approval {
                self.begin_collecting(run, ctx);
                continue;
            }
            let msg = Message::AuthorizationRequest {
                run,
                mode: Mode::OnChain,
                source: self.did().clone(),
                consumer,
                evidence: AuthEvidence::Collection { tx: tx.id },
            };
            ctx.send(&self.approver(), "authz", msg, 3);
        }
    }

    pub fn handle(&mut self, msg: Message, ctx: &mut dyn Context) {
        let run = msg.run();
        match msg {
            Message::Notify { consumer, nonce, port, .. } => {
                if self.runs.contains_key(&run) {
                    return;
                }
                self.runs.insert(run, SourceRun::new(Mode::OffChain, consumer.clone(), Some(port)));
                if self.behavior.skip_approval {
                    self.begin_collecting(run, ctx);
                    return;
                }
                let r = if self.behavior.replay_omega { nonce.wrapping_add(1) } else { nonce };
                let signed = sign_recover(&r.to_be_bytes(), self.signing_key().secret()).to_bytes();
                let msg = Message::AuthorizationRequest {
                    run,
                    mode: Mode::OffChain,
                    source: self.did().clone(),
                    consumer,
                    evidence: AuthEvidence::SignedNonce(signed),
                };
                ctx.send(&self.approver(), "authz", msg, 3);
            }
            Message::AuthorizationGranted { omega, .. } => {
                let Some(r) = self.runs.get_mut(&run).filter(|r| r.phase == SourcePhase::Authorizing) else {
                    return;
                };
                r.omega = omega;
                self.begin_collecting(run, ctx);
            }
            Message::AuthorizationDenied { .. } => {
                if self.runs.get(&run).is_some_and(|r| r.phase == SourcePhase::Authorizing) {
                    self.abort(run, ReasonCode::Rejected, ctx);
                }
            }
            Message::PartitionData { index, bytes, .. } => {
                let Some(r) = self.runs.get_mut(&run).filter(|r| r.phase == SourcePhase::Collecting) else {
                    return;
                };
                let Some(bytes) = bytes else {
                    return self.abort(run, ReasonCode::LocationUnreachable, ctx);
                };
                let Some(set) = r.partitions.as_mut().filter(|s| index < s.count()) else {
                    return;
                };
                set.insert(index, bytes);
                if set.is_complete() {
                    let set = r.partitions.take().expect("checked above");
                    let data = open_partitions(&set, self.holdings.partition_key.as_ref()).and_then(|s| assemble(&s));
                    match data {
                        Ok(d) => self.stage(run, d, ctx),
                        Err(_) => self.abort(run, ReasonCode::DecryptionFailure, ctx),
                    }
                }
            }
            Message::HostData { key, bytes, .. } => {
                let Some(r) = self.runs.get_mut(&run).filter(|r| r.phase == SourcePhase::Collecting) else {
                    return;
                };
                let Some(bytes) = bytes else {
                    return self.abort(run, ReasonCode::LocationUnreachable, ctx);
                };
                r.host_parts.insert(key, bytes);
                let StoredRef::SelfHosted { data, key, .. } = &self.holdings.stored else {
                    return;
                };
                if let (Some(sealed), Some(wrapped)) = (r.host_parts.get(data), r.host_parts.get(key)) {
                    match open_from_host(sealed, wrapped, &self.identity.keyring.auth) {
                        Ok(d) => self.stage(run, d, ctx),
                        Err(_) => self.abort(run, ReasonCode::DecryptionFailure, ctx),
                    }
                }
            }
            Message::StageAck { address, .. } => {
                let Some(r) = self.runs.get_mut(&run).filter(|r| r.phase == SourcePhase::Staging) else {
                    return;
                };
                let Some(address) = address else {
                    return self.abort(run, ReasonCode::StagingUnreachable, ctx);
                };
                r.staged.push(address);
                r.pending_puts -= 1;
                if r.pending_puts == 0 {
                    self.deliver(run, ctx);
                }
            }
            _ => {}
        }
    }

    /// On-chain step 7 / off-chain step 6: collect `d` from where it is stored.
    fn begin_collecting(&mut self, run: RunId, ctx: &mut dyn Context) {
        let Some(r) = self.runs.get_mut(&run) else { return };
        r.phase = SourcePhase::Collecting;
        let s = step(r.mode, 7, 6);
        match &self.holdings.stored {
            StoredRef::Decentralized { tx } => {
                let Some(tx) = ctx.ledger().get(*tx) else {
                    return self.abort(run, ReasonCode::MalformedData, ctx);
                };
                let key = self.holdings.location_key.as_ref().map(DecryptionKey::Symmetric);
                let locations = match parse_locations(&tx, key) {
                    Ok(l) => l,
                    Err(_) => return self.abort(run, ReasonCode::DecryptionFailure, ctx),
                };
                r.partitions = Some(PartitionSet::expecting(locations.len()));
                for (index, handle) in locations.iter().enumerate() {
                    let msg = Message::FetchPartition { run, index, handle: handle.clone() };
                    ctx.send(&Address::location(handle.location()), "storage", msg, s);
                }
            }
            StoredRef::SelfHosted { host, data, key } => {
                for k in [data, key] {
                    ctx.send(&Address::host(host), "storage", Message::HostGet { run, key: k.clone() }, s);
                }
            }
        }
    }

    /// Re-encrypt under a fresh `κ`, wrap `κ` for the consumer, and upload
    /// both to the staging space.
    fn stage(&mut self, run: RunId, mut data: Vec<u8>, ctx: &mut dyn Context) {
        let Some(r) = self.runs.get_mut(&run) else { return };
        let Some(pk_c) = auth_key_of(ctx, &r.consumer) else {
            return self.abort(run, ReasonCode::MalformedData, ctx);
        };
        if self.behavior.forge_claim {
            data = forge(&data);
        }
        let provider = ctx.provider();
        let kappa = provider.gen_symmetric(None);
        let sealed = provider.encrypt(&data, EncryptionKey::Symmetric(&kappa)).to_bytes();
        let wrapped = provider.encrypt(kappa.as_bytes(), EncryptionKey::Public(&pk_c)).to_bytes();
        r.phase = SourcePhase::Staging;
        r.pending_puts = 2;
        let s = step(r.mode, 8, 7);
        let to = Address::staging(&self.staging);
        ctx.send(&to, "staging", Message::StagePut { run, bytes: sealed }, s);
        ctx.send(&to, "staging", Message::StagePut { run, bytes: wrapped }, s);
    }

    /// On-chain step 9 (storage transaction) / off-chain step 8 (port `z`).
    fn deliver(&mut self, run: RunId, ctx: &mut dyn Context) {
        let Some(r) = self.runs.get_mut(&run) else { return };
        r.phase = SourcePhase::Done;
        let Some(pk_c) = auth_key_of(ctx, &r.consumer) else { return };
        let info = StorageInfo {
            backend: BackendKind::Staging,
            space: self.staging.clone(),
            data: r.staged[0].clone(),
            key: r.staged[1].clone(),
        };
        let mut vc = self.vc.clone();
        if self.behavior.tamper_vc {
            vc.id.push_str("#amended");
        }
        let signing = self.impostor.as_ref().unwrap_or(&self.identity.keyring.auth);
        let signed_vc = sign_recover(vc.to_canonical().as_bytes(), signing.secret()).to_bytes();
        let provider = ctx.provider();
        let sealed_vc = provider.encrypt(&signed_vc, EncryptionKey::Public(&pk_c)).to_bytes();
        let sealed_m = provider.encrypt(&info.to_bytes(), EncryptionKey::Public(&pk_c)).to_bytes();
        match r.mode {
            Mode::OnChain => {
                let draft = TxDraft::new(TxKind::Storage, self.identity.wallet())
                    .with("vc", PropValue::Bytes(sealed_vc))
                    .with("storage", PropValue::Bytes(sealed_m))
                    .with("source", PropValue::text(self.identity.did.as_str()))
                    .with("consumer", PropValue::text(r.consumer.as_str()))
                    .with("run", PropValue::text(run.to_string()));
                let consumer = r.consumer.clone();
                match ctx.submit(draft, 9) {
                    Ok(res) if res.finalized => {}
                    _ => {
                        let msg = Message::Abort { run, source: self.did().clone(), reason: ReasonCode::LedgerRejection };
                        ctx.send(&Address::entity(&consumer), "control", msg, 9);
                    }
                }
            }
            Mode::OffChain => {
                let port = r.port.clone().unwrap_or_default();
                let msg = Message::Delivery {
                    run,
                    source: self.identity.did.clone(),
                    vc: sealed_vc,
                    storage: sealed_m,
                    omega: r.omega.clone().unwrap_or_default(),
                };
                let to = Address::entity(&r.consumer);
                ctx.send(&to, &port, msg, 8);
            }
        }
    }

    fn abort(&mut self, run: RunId, reason: ReasonCode, ctx: &mut dyn Context) {
        let Some(r) = self.runs.get_mut(&run) else { return };
        if r.phase == SourcePhase::Done {
            return;
        }
        let s = match r.phase {
            SourcePhase::Authorizing => step(r.mode, 5, 4),
            SourcePhase::Collecting => step(r.mode, 7, 6),
            _ => step(r.mode, 8, 7),
        };
        r.phase = SourcePhase::Done;
        let to = Address::entity(&r.consumer);
        let msg = Message::Abort { run, source: self.identity.did.clone(), reason };
        ctx.note(run, s, format!("{} aborts: {reason}", self.identity.did));
        ctx.send(&to, "control", msg, s);
    }
}

impl SourceRun {
    fn new(mode: Mode, consumer: Did, port: Option<String>) -> Self {
        SourceRun {
            mode,
            consumer,
            port,
            phase: SourcePhase::Authorizing,
            omega: None,
            partitions: None,
            host_parts: BTreeMap::new(),
            pending_puts: 0,
            staged: Vec::new(),
        }
    }
}

/// Substituted data that still parses as an envelope when the original did.
fn forge(data: &[u8]) -> Vec<u8> {
    match DataEnvelope::from_bytes(data) {
        Ok(mut env) if !env.payload.is_empty() => {
            let last = env.payload.len() - 1;
            env.payload.swap(0, last);
            env.payload.push(env.payload[0].clone());
            env.to_bytes()
        }
        _ => {
            let mut d = data.to_vec();
            d.push(b' ');
            d
        }
    }
}

/// An authority `o`: approves consumers on behalf of the sources it endorsed.
#[derive(Debug)]
pub struct AuthorityAgent {
    pub identity: Identity,
    pub policy: ApprovalPolicy,
}

impl AuthorityAgent {
    pub fn new(identity: Identity, policy: ApprovalPolicy) -> Self {
        AuthorityAgent { identity, policy }
    }

    pub fn handle(&mut self, from: &Address, msg: Message, ctx: &mut dyn Context) {
        let Message::AuthorizationRequest { run, mode, source, consumer, evidence } = msg else {
            return;
        };
        let deny = |ctx: &mut dyn Context, reason: &str| {
            let s = step(mode, 5, 4);
            ctx.note(run, s, format!("{} denies {source}: {reason}", self.identity.did));
            ctx.send(from, "authz", Message::AuthorizationDenied { run, reason: reason.to_string() }, s);
        };
        if !self.policy.approves(&source, Some(&consumer)) {
            return deny(ctx, "policy");
        }
        match (mode, evidence) {
            (Mode::OnChain, AuthEvidence::Collection { tx }) => {
                // step 4: the collection transaction must exist and name the source
                let named = ctx.ledger().get(tx).is_some_and(|x| {
                    x.kind == TxKind::Collection
                        && x.get("srcIds").and_then(PropValue::as_list).is_some_and(|l| l.iter().any(|s| s == source.as_str()))
                });
                if !named {
                    return deny(ctx, "no collection transaction");
                }
                let draft = TxDraft::new(TxKind::Endorsement, self.identity.wallet())
                    .with("s", PropValue::text(source.as_str()))
                    .with("c", PropValue::text(consumer.as_str()))
                    .with("o", PropValue::text(self.identity.did.as_str()))
                    .with("run", PropValue::text(run.to_string()));
                match ctx.submit(draft, 6) {
                    Ok(res) if res.finalized => {
                        let msg = Message::AuthorizationGranted { run, endorsement: Some(res.transaction_id), omega: None };
                        ctx.send(from, "authz", msg, 6);
                    }
                    _ => deny(ctx, "endorsement transaction not finalized"),
                }
            }
            (Mode::OffChain, AuthEvidence::SignedNonce(signed)) => {
                let omega = sign_recover(&signed, self.identity.keyring.auth.secret()).to_bytes();
                ctx.send(from, "authz", Message::AuthorizationGranted { run, endorsement: None, omega: Some(omega) }, 5);
            }
            _ => deny(ctx, "evidence does not match mode"),
        }
    }
}

#[derive(Debug)]
struct PerSource {
    status: SourceStatus,
    vc: Option<VerifiableCredential>,
    fetch: Option<(ContentAddress, ContentAddress)>,
    fetched: BTreeMap<ContentAddress, Vec<u8>>,
    envelope: Option<DataEnvelope>,
}

#[derive(Debug)]
struct ConsumerRun {
    request: AggregationRequest,
    port: String,
    ledger_mark: usize,
    sources: Vec<PerSource>,
    seen_storage: BTreeSet<TxId>,
    finished: bool,
}

/// The consumer `c` and its aggregator client.
#[derive(Debug)]
pub struct ConsumerClient {
    pub identity: Identity,
    runs: BTreeMap<RunId, ConsumerRun>,
}

impl ConsumerClient {
    pub fn new(identity: Identity) -> Self {
        ConsumerClient { identity, runs: BTreeMap::new() }
    }

    pub fn did(&self) -> &Did {
        &self.identity.did
    }

    pub fn is_running(&self) -> bool {
        self.runs.values().any(|r| !r.finished)
    }

    /// Step 1 (Controller) and step 2: a collection transaction on-chain, or
    /// notifications with the nonce and port off-chain.
    pub fn start(&mut self, run: RunId, request: AggregationRequest, ctx: &mut dyn Context) {
        let port = format!("z:{run}");
        let sources = request
            .sources
            .iter()
            .map(|_| PerSource {
                status: SourceStatus::Pending,
                vc: None,
                fetch: None,
                fetched: BTreeMap::new(),
                envelope: None,
            })
            .collect();
        let state = ConsumerRun {
            request: request.clone(),
            port: port.clone(),
            ledger_mark: ctx.ledger().len(),
            sources,
            seen_storage: BTreeSet::new(),
            finished: false,
        };
        self.runs.insert(run, state);
        if let Err(e) = request.validate(ctx.registry()) {
            return self.finish(run, Some(e), ctx);
        }
        match request.mode {
            Mode::OnChain => {
                let ids = request.sources.iter().map(|s| s.as_str().to_string()).collect();
                let draft = TxDraft::new(TxKind::Collection, self.identity.wallet())
                    .with("srcIds", PropValue::List(ids))
                    .with("consumer", PropValue::text(self.identity.did.as_str()))
                    .with("run", PropValue::text(run.to_string()));
                match ctx.submit(draft, 2) {
                    Ok(res) if res.finalized => {}
                    Ok(res) => {
                        let err = AggregatorError::Identity(crate::identity::IdentityError::LedgerRejection(res));
                        self.fail_all(run, ReasonCode::LedgerRejection);
                        self.finish(run, Some(err), ctx);
                    }
                    Err(e) => self.finish(run, Some(e.into()), ctx),
                }
            }
            Mode::OffChain => {
                let nonce = request.nonce.expect("validated");
                for s in &request.sources {
                    let msg = Message::Notify { run, consumer: self.identity.did.clone(), nonce, port: port.clone() };
                    ctx.send(&Address::entity(s), "control", msg, 2);
                }
            }
        }
    }

    pub fn on_tick(&mut self, idle: u32, ctx: &mut dyn Context) {
        let active: Vec<RunId> = self.runs.iter().filter(|(_, r)| !r.finished).map(|(id, _)| *id).collect();
        for run in active {
            if self.runs[&run].request.mode == Mode::OnChain {
                self.read_storage_transactions(run, ctx);
            }
            if idle >= CONSUMER_PATIENCE && self.runs.get(&run).is_some_and(|r| !r.finished) {
                self.close(run, ctx);
            }
        }
    }

    /// Step 10 on-chain: the Connector parses storage transactions of the run.
    fn read_storage_transactions(&mut self, run: RunId, ctx: &mut dyn Context) {
        let q = Query::kind(TxKind::Storage)
            .text_eq("run", run.to_string())
            .text_eq("consumer", self.identity.did.as_str());
        for tx in ctx.ledger().query(&q) {
            let Some(r) = self.runs.get_mut(&run) else { return };
            if !r.seen_storage.insert(tx.id) {
                continue;
            }
            let (Some(source), Some(vc), Some(storage)) = (
                tx.text("source").and_then(|s| s.parse::<Did>().ok()),
                tx.get("vc").and_then(PropValue::as_bytes),
                tx.get("storage").and_then(PropValue::as_bytes),
            ) else {
                continue;
            };
            let (vc, storage) = (vc.to_vec(), storage.to_vec());
            self.evidence(run, &source, &vc, &storage, None, ctx);
        }
    }

    pub fn handle(&mut self, port: &str, msg: Message, ctx: &mut dyn Context) {
        let run = msg.run();
        let Some(r) = self.runs.get(&run).filter(|r| !r.finished) else { return };
        match msg {
            Message::Delivery { source, vc, storage, omega, .. } => {
                if r.request.mode != Mode::OffChain || port != r.port {
                    return;
                }
                self.evidence(run, &source, &vc, &storage, Some(&omega), ctx);
            }
            Message::StageData { source, address, bytes, .. } => self.staged_data(run, &source, address, bytes, ctx),
            Message::Abort { source, reason, .. } => {
                let Some(i) = r.request.sources.iter().position(|s| s == &source) else { return };
                let status = if reason == ReasonCode::Rejected {
                    SourceStatus::Rejected
                } else {
                    SourceStatus::Failed(reason)
                };
                if r.sources[i].status == SourceStatus::Pending || status != SourceStatus::Rejected {
                    self.set_status(run, i, status, ctx);
                }
            }
            _ => {}
        }
    }

    /// Steps 10-13 on-chain / 9-12 off-chain: unwrap the credential, let the
    /// Arbitrator decide, then fetch from the staging space.
    fn evidence(
        &mut self,
        run: RunId,
        source: &Did,
        sealed_vc: &[u8],
        sealed_m: &[u8],
        omega: Option<&[u8]>,
        ctx: &mut dyn Context,
    ) {
        let Some(r) = self.runs.get(&run) else { return };
        let mode = r.request.mode;
        let Some(i) = r.request.sources.iter().position(|s| s == source) else {
            ctx.note(run, step(mode, 10, 9), format!("ignoring evidence from unrequested {source}"));
            return;
        };
        if r.sources[i].status != SourceStatus::Pending {
            return;
        }
        let nonce = r.request.nonce.unwrap_or_default();
        self.set_status(run, i, SourceStatus::Delivered, ctx);
        let sk = self.identity.keyring.auth.secret();
        let Ok(signed_vc) = decrypt_bytes(sealed_vc, DecryptionKey::Secret(sk)) else {
            return self.set_status(run, i, SourceStatus::Failed(ReasonCode::DecryptionFailure), ctx);
        };
        let run_label = run.to_string();
        let approval = match (mode, omega) {
            (Mode::OffChain, Some(omega)) => Approval::OffChain { omega, nonce },
            _ => Approval::OnChain { ledger: ctx.ledger(), run: Some(&run_label) },
        };
        let evidence = Evidence { source, consumer: &self.identity.did, signed_vc: &signed_vc, approval };
        let verdict = arbitrate(&evidence, ctx.registry());
        let verdict_step = step(mode, 11, 10);
        let codes: Vec<_> = verdict.failures.iter().map(|c| c.as_str()).collect();
        ctx.note(
            run,
            verdict_step,
            format!("verdict {source}: {}", if codes.is_empty() { "accept".to_string() } else { codes.join(",") }),
        );
        if let Some(reason) = verdict.reason() {
            return self.set_status(run, i, SourceStatus::Failed(reason), ctx);
        }
        let Some(info) = decrypt_bytes(sealed_m, DecryptionKey::Secret(sk))
            .ok()
            .and_then(|m| StorageInfo::from_bytes(&m).ok())
        else {
            return self.set_status(run, i, SourceStatus::Failed(ReasonCode::DecryptionFailure), ctx);
        };
        let r = self.runs.get_mut(&run).expect("present");
        r.sources[i].vc = verdict.vc;
        r.sources[i].fetch = Some((info.data.clone(), info.key.clone()));
        self.set_status(run, i, SourceStatus::Authorized, ctx);
        let to = Address::staging(&info.space);
        for address in [info.data, info.key] {
            let msg = Message::StageGet { run, source: source.clone(), address };
            ctx.send(&to, "staging", msg, step(mode, 13, 12));
        }
    }

    /// Step 14 on-chain / 13 off-chain: decrypt and check the claim.
    fn staged_data(
        &mut self,
        run: RunId,
        source: &Did,
        address: ContentAddress,
        bytes: Option<Vec<u8>>,
        ctx: &mut dyn Context,
    ) {
        let Some(r) = self.runs.get_mut(&run) else { return };
        let Some(i) = r.request.sources.iter().position(|s| s == source) else { return };
        if r.sources[i].status != SourceStatus::Authorized {
            return;
        }
        let Some(bytes) = bytes else {
            return self.set_status(run, i, SourceStatus::Failed(ReasonCode::StagingUnreachable), ctx);
        };
        let per = &mut r.sources[i];
        per.fetched.insert(address, bytes);
        let Some((data_addr, key_addr)) = per.fetch.clone() else { return };
        let (Some(sealed), Some(wrapped)) = (per.fetched.get(&data_addr), per.fetched.get(&key_addr)) else {
            return;
        };
        let sk = self.identity.keyring.auth.secret();
        let data = decrypt_bytes(wrapped, DecryptionKey::Secret(sk))
            .ok()
            .and_then(|k| SymmetricKey::from_bytes(&k).ok())
            .and_then(|k| decrypt_bytes(sealed, DecryptionKey::Symmetric(&k)).ok());
        let Some(data) = data else {
            return self.set_status(run, i, SourceStatus::Failed(ReasonCode::DecryptionFailure), ctx);
        };
        let vc = per.vc.clone().expect("authorized sources have a credential");
        let mode = r.request.mode;
        if let Err(reason) = check_claim(&vc, source, &data) {
            ctx.note(run, step(mode, 14, 13), format!("claim check {source}: {reason}"));
            return self.set_status(run, i, SourceStatus::Failed(reason), ctx);
        }
        match DataEnvelope::from_bytes(&data) {
            Ok(env) => {
                r.sources[i].envelope = Some(env);
                self.set_status(run, i, SourceStatus::Verified, ctx);
            }
            Err(_) => self.set_status(run, i, SourceStatus::Failed(ReasonCode::MalformedData), ctx),
        }
    }

    fn set_status(&mut self, run: RunId, i: usize, status: SourceStatus, ctx: &mut dyn Context) {
        let Some(r) = self.runs.get_mut(&run) else { return };
        let current = r.sources[i].status;
        if !current.can_become(status) {
            return;
        }
        r.sources[i].status = status;
        let mode = r.request.mode;
        let source = r.request.sources[i].clone();
        let label = serde_json::to_value(status).map(|v| crate::canonical::value_to_string(&v)).unwrap_or_default();
        ctx.note(run, step(mode, 12, 11), format!("status {source}: {label}"));
        if let Some(reason) = status.reason() {
            if r.request.strict {
                self.fail_all(run, ReasonCode::Terminated);
                let err = AggregatorError::Terminated { source_did: source, reason };
                return self.finish(run, Some(err), ctx);
            }
        }
        if self.runs[&run].sources.iter().all(|s| s.status.is_terminal()) {
            self.finish(run, None, ctx);
        }
    }

    fn fail_all(&mut self, run: RunId, reason: ReasonCode) {
        if let Some(r) = self.runs.get_mut(&run) {
            for s in &mut r.sources {
                if !s.status.is_terminal() {
                    s.status = SourceStatus::Failed(reason);
                }
            }
        }
    }

    /// Deadline reached: whatever has not arrived is marked failed.
    fn close(&mut self, run: RunId, ctx: &mut dyn Context) {
        let Some(r) = self.runs.get(&run) else { return };
        let mode = r.request.mode;
        let pending: Vec<(usize, SourceStatus)> =
            r.sources.iter().enumerate().filter(|(_, s)| !s.status.is_terminal()).map(|(i, s)| (i, s.status)).collect();
        for (i, status) in pending {
            let reason = match (status, mode) {
                (SourceStatus::Authorized, _) => ReasonCode::StagingUnreachable,
                (_, Mode::OffChain) => ReasonCode::PortClosed,
                (_, Mode::OnChain) => ReasonCode::Timeout,
            };
            self.set_status(run, i, SourceStatus::Failed(reason), ctx);
            if self.runs.get(&run).is_none_or(|r| r.finished) {
                return;
            }
        }
        if self.runs.get(&run).is_some_and(|r| !r.finished) {
            self.finish(run, None, ctx);
        }
    }

    /// Step 15 on-chain / 14 off-chain: the Processor applies `Ψ`.
    fn finish(&mut self, run: RunId, error: Option<AggregatorError>, ctx: &mut dyn Context) {
        let Some(r) = self.runs.get_mut(&run) else { return };
        if r.finished {
            return;
        }
        r.finished = true;
        let mode = r.request.mode;
        let mut error = error;
        let mut output = None;
        if error.is_none() {
            let envelopes: Vec<DataEnvelope> = r.sources.iter().filter_map(|s| s.envelope.clone()).collect();
            if envelopes.is_empty() {
                error = Some(AggregatorError::AllSourcesRejected);
            } else {
                match process_transform(&envelopes, &r.request.transform) {
                    Ok(env) => output = Some(env),
                    Err(e) => error = Some(e),
                }
            }
        }
        let ledger_txs = ctx.ledger().snapshot()[r.ledger_mark..].iter().map(|t| t.id).collect();
        let report = RunReport {
            run,
            mode,
            consumer: self.identity.did.clone(),
            strict: r.request.strict,
            sources: r
                .request
                .sources
                .iter()
                .zip(&r.sources)
                .map(|(did, s)| SourceReport { source: did.clone(), status: s.status })
                .collect(),
            ledger_txs,
            output_digest: output.as_ref().map(|o: &DataEnvelope| hash(&o.to_bytes()).to_hex()),
            error: error.as_ref().map(ToString::to_string),
        };
        ctx.note(run, step(mode, 15, 14), format!("run finished: {}", report.error.as_deref().unwrap_or("ok")));
        ctx.complete(RunOutcome { report, output });
    }
}
