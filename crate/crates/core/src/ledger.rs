//! Simulated distributed ledger.
//!
//! A single process stands in for `|N|` nodes. Every submitted transaction is
//! voted on by each node's acceptance policy and enters the finalized set iff
//! strictly more than `δ·|N|` nodes accept it. Finalized transactions get the
//! next value of a logical clock, so "latest" is always well defined.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::crypto::WalletAddress;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("malformed {kind} transaction: missing property `{missing}`")]
    MalformedTransaction { kind: TxKind, missing: String },
    #[error("invalid ledger configuration: {0}")]
    InvalidConfig(String),
}

/// Finalization threshold `δ`, kept as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Threshold {
    num: u64,
    den: u64,
}

impl Threshold {
    /// PBFT-style consensus.
    pub const TWO_THIRDS: Threshold = Threshold { num: 2, den: 3 };
    /// Proof-of-work-style consensus.
    pub const ONE_HALF: Threshold = Threshold { num: 1, den: 2 };

    pub fn new(num: u64, den: u64) -> Result<Self, LedgerError> {
        if den == 0 || num == 0 || num >= den {
            return Err(LedgerError::InvalidConfig(format!("delta {num}/{den} is not in (0,1)")));
        }
        Ok(Threshold { num, den })
    }

    /// `accepted > δ·|N|`, evaluated without rounding.
    pub fn is_met(&self, accepted: usize, node_count: usize) -> bool {
        (accepted as u128) * (self.den as u128) > (self.num as u128) * (node_count as u128)
    }

    /// Smallest acceptance count that finalizes on `node_count` nodes.
    pub fn quorum(&self, node_count: usize) -> usize {
        (0..=node_count).find(|&a| self.is_met(a, node_count)).unwrap_or(node_count + 1)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Threshold {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LedgerError::InvalidConfig(format!("cannot parse delta `{s}`, expected `a/b`"));
        let (n, d) = s.split_once('/').ok_or_else(bad)?;
        Threshold::new(n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?)
    }
}

impl TryFrom<String> for Threshold {
    type Error = LedgerError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Threshold> for String {
    fn from(t: Threshold) -> String {
        t.to_string()
    }
}

/// Acceptance function `F(x, n)` of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodePolicy {
    /// Accepts every well-formed transaction.
    Honest,
    /// Rejects everything.
    Reject,
    /// Votes by a seeded coin flip.
    Byzantine,
}

impl FromStr for NodePolicy {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(NodePolicy::Honest),
            "reject" => Ok(NodePolicy::Reject),
            "byzantine" => Ok(NodePolicy::Byzantine),
            other => Err(LedgerError::InvalidConfig(format!("unknown node policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerConfig {
    pub node_count: usize,
    pub delta: Threshold,
    pub node_policies: Vec<NodePolicy>,
    #[serde(default)]
    pub seed: u64,
}

impl LedgerConfig {
    pub fn honest(node_count: usize, delta: Threshold) -> Self {
        LedgerConfig { node_count, delta, node_policies: vec![NodePolicy::Honest; node_count], seed: 0 }
    }

    /// `accepting` honest nodes followed by rejecting ones.
    pub fn with_acceptors(node_count: usize, delta: Threshold, accepting: usize) -> Self {
        let mut node_policies = vec![NodePolicy::Honest; node_count];
        for p in node_policies.iter_mut().skip(accepting) {
            *p = NodePolicy::Reject;
        }
        LedgerConfig { node_count, delta, node_policies, seed: 0 }
    }

    /// The last `k` nodes become byzantine.
    pub fn with_byzantine(mut self, k: usize, seed: u64) -> Self {
        let n = self.node_policies.len();
        for p in self.node_policies.iter_mut().skip(n.saturating_sub(k)) {
            *p = NodePolicy::Byzantine;
        }
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        if self.node_count < 2 {
            return Err(LedgerError::InvalidConfig(format!(
                "node_count must exceed 1, got {}",
                self.node_count
            )));
        }
        if self.node_policies.len() != self.node_count {
            return Err(LedgerError::InvalidConfig(format!(
                "{} node policies for {} nodes",
                self.node_policies.len(),
                self.node_count
            )));
        }
        Threshold::new(self.delta.num, self.delta.den).map(|_| ())
    }
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig::honest(4, Threshold::TWO_THIRDS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxKind {
    #[serde(rename = "propagation")]
    Propagation,
    #[serde(rename = "update")]
    Update,
    #[serde(rename = "deletion")]
    Deletion,
    #[serde(rename = "location")]
    Location,
    #[serde(rename = "collection")]
    Collection,
    #[serde(rename = "endorsement")]
    Endorsement,
    #[serde(rename = "storage")]
    Storage,
}

impl TxKind {
    pub const ALL: [TxKind; 7] = [
        TxKind::Propagation,
        TxKind::Update,
        TxKind::Deletion,
        TxKind::Location,
        TxKind::Collection,
        TxKind::Endorsement,
        TxKind::Storage,
    ];

    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            TxKind::Propagation | TxKind::Update => &["did", "auth", "assert"],
            TxKind::Deletion => &["did", "deleted"],
            TxKind::Location => &["owner", "locations"],
            TxKind::Collection => &["srcIds"],
            TxKind::Endorsement => &["s", "c"],
            TxKind::Storage => &["vc", "storage"],
        }
    }

    /// Short symbol, e.g. `tau_p`.
    pub fn symbol(self) -> &'static str {
        match self {
            TxKind::Propagation => "tau_p",
            TxKind::Update => "tau_u",
            TxKind::Deletion => "tau_d",
            TxKind::Location => "tau_l",
            TxKind::Collection => "tau_c",
            TxKind::Endorsement => "tau_e",
            TxKind::Storage => "tau_s",
        }
    }
}

impl fmt::Display for TxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for TxKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let greek = s.strip_prefix("τ_").map(|rest| format!("tau_{rest}"));
        let kind = match greek.as_deref().unwrap_or(s) {
            "tau_p" | "propagation" => TxKind::Propagation,
            "tau_u" | "update" => TxKind::Update,
            "tau_d" | "deletion" => TxKind::Deletion,
            "tau_l" | "location" => TxKind::Location,
            "tau_c" | "collection" => TxKind::Collection,
            "tau_e" | "endorsement" => TxKind::Endorsement,
            "tau_s" | "storage" => TxKind::Storage,
            other => return Err(format!("unknown transaction kind `{other}`")),
        };
        Ok(kind)
    }
}

/// Opaque property value stored on a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropValue {
    Text(String),
    Bytes(#[serde(with = "canonical::hex_bytes")] Vec<u8>),
    Bool(bool),
    List(Vec<String>),
    /// `∅`, assigned to deprecated properties.
    Absent,
}

impl PropValue {
    pub fn text(s: impl Into<String>) -> Self {
        PropValue::Text(s.into())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            PropValue::Bytes(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            PropValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            PropValue::List(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tx-{:06}", self.0)
    }
}

/// A transaction before submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxDraft {
    pub kind: TxKind,
    pub properties: BTreeMap<String, PropValue>,
    pub submitter: WalletAddress,
}

impl TxDraft {
    pub fn new(kind: TxKind, submitter: WalletAddress) -> Self {
        TxDraft { kind, properties: BTreeMap::new(), submitter }
    }

    pub fn with(mut self, name: &str, value: PropValue) -> Self {
        self.properties.insert(name.to_string(), value);
        self
    }

    fn check_required(&self) -> Result<(), LedgerError> {
        for key in self.kind.required_keys() {
            if !self.properties.contains_key(*key) {
                return Err(LedgerError::MalformedTransaction { kind: self.kind, missing: key.to_string() });
            }
        }
        if self.kind == TxKind::Deletion && self.properties.get("deleted") != Some(&PropValue::Bool(true)) {
            return Err(LedgerError::MalformedTransaction { kind: self.kind, missing: "deleted=true".into() });
        }
        Ok(())
    }
}

/// A finalized transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub kind: TxKind,
    pub properties: BTreeMap<String, PropValue>,
    pub timestamp: u64,
    pub submitter: WalletAddress,
}

impl Transaction {
    /// `x[name]`; `None` is the absent marker.
    pub fn get(&self, name: &str) -> Option<&PropValue> {
        self.properties.get(name)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(PropValue::as_text)
    }

    pub fn to_canonical_line(&self) -> String {
        canonical::to_string(self).expect("transactions always serialize")
    }

    pub fn from_canonical_line(line: &str) -> Result<Self, canonical::CanonicalError> {
        canonical::from_str(line)
    }
}

pub fn get_property<'a>(tx: &'a Transaction, name: &str) -> Option<&'a PropValue> {
    tx.get(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizationResult {
    pub accepted_nodes: usize,
    pub finalized: bool,
    pub transaction_id: TxId,
    /// Logical timestamp, present iff finalized.
    pub timestamp: Option<u64>,
}

/// Property-match expression for [`Ledger::query`].
#[derive(Debug, Clone, Default)]
pub struct Query {
    kinds: Vec<TxKind>,
    conditions: Vec<Condition>,
}

#[derive(Debug, Clone)]
enum Condition {
    Eq(String, PropValue),
    ListContains(String, String),
}

impl Query {
    pub fn all() -> Self {
        Query::default()
    }

    pub fn kind(kind: TxKind) -> Self {
        Query { kinds: vec![kind], conditions: Vec::new() }
    }

    pub fn kinds(kinds: &[TxKind]) -> Self {
        Query { kinds: kinds.to_vec(), conditions: Vec::new() }
    }

    pub fn eq(mut self, name: &str, value: PropValue) -> Self {
        self.conditions.push(Condition::Eq(name.to_string(), value));
        self
    }

    pub fn text_eq(self, name: &str, value: impl Into<String>) -> Self {
        self.eq(name, PropValue::Text(value.into()))
    }

    pub fn list_contains(mut self, name: &str, item: impl Into<String>) -> Self {
        self.conditions.push(Condition::ListContains(name.to_string(), item.into()));
        self
    }

    pub fn matches(&self, tx: &Transaction) -> bool {
        if !self.kinds.is_empty() && !self.kinds.contains(&tx.kind) {
            return false;
        }
        self.conditions.iter().all(|c| match c {
            Condition::Eq(name, v) => tx.get(name) == Some(v),
            Condition::ListContains(name, item) => {
                tx.get(name).and_then(PropValue::as_list).is_some_and(|l| l.contains(item))
            }
        })
    }
}

#[derive(Debug)]
struct State {
    finalized: Vec<Transaction>,
    next_id: u64,
    clock: u64,
    rng: ChaCha20Rng,
}

/// The ledger service. Submissions serialize on a write lock; queries take a
/// read lock and always observe a prefix of the finalized log.
#[derive(Debug)]
pub struct Ledger {
    config: LedgerConfig,
    state: RwLock<State>,
}

impl Ledger {
    pub fn new(config: LedgerConfig) -> Result<Self, LedgerError> {
        config.validate()?;
        let rng = ChaCha20Rng::seed_from_u64(config.seed);
        Ok(Ledger {
            config,
            state: RwLock::new(State { finalized: Vec::new(), next_id: 1, clock: 0, rng }),
        })
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn submit(&self, draft: TxDraft) -> Result<FinalizationResult, LedgerError> {
        draft.check_required()?;
        let mut st = self.state.write();
        let id = TxId(st.next_id);
        st.next_id += 1;
        let mut accepted = 0;
        for policy in &self.config.node_policies {
            let vote = match policy {
                NodePolicy::Honest => true,
                NodePolicy::Reject => false,
                NodePolicy::Byzantine => st.rng.gen_bool(0.5),
            };
            accepted += usize::from(vote);
        }
        let finalized = self.config.delta.is_met(accepted, self.config.node_count);
        let mut timestamp = None;
        if finalized {
            st.clock += 1;
            timestamp = Some(st.clock);
            let tx = Transaction {
                id,
                kind: draft.kind,
                properties: draft.properties,
                timestamp: st.clock,
                submitter: draft.submitter,
            };
            st.finalized.push(tx);
        }
        Ok(FinalizationResult { accepted_nodes: accepted, finalized, transaction_id: id, timestamp })
    }

    /// Finalized transactions matching `q`, oldest first.
    pub fn query(&self, q: &Query) -> Vec<Transaction> {
        self.state.read().finalized.iter().filter(|tx| q.matches(tx)).cloned().collect()
    }

    /// The matching transaction with the greatest timestamp.
    pub fn latest(&self, q: &Query) -> Option<Transaction> {
        self.state.read().finalized.iter().rev().find(|tx| q.matches(tx)).cloned()
    }

    pub fn get(&self, id: TxId) -> Option<Transaction> {
        self.state.read().finalized.iter().find(|tx| tx.id == id).cloned()
    }

    /// Number of finalized transactions.
    pub fn len(&self) -> usize {
        self.state.read().finalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of submissions, finalized or not.
    pub fn submitted(&self) -> u64 {
        self.state.read().next_id - 1
    }

    pub fn snapshot(&self) -> Vec<Transaction> {
        self.state.read().finalized.clone()
    }

    /// Writes the finalized log, one canonical transaction per line.
    pub fn export_log<W: Write>(&self, mut w: W) -> io::Result<()> {
        for tx in self.snapshot() {
            writeln!(w, "{}", tx.to_canonical_line())?;
        }
        Ok(())
    }
}

/// Reads a log written by [`Ledger::export_log`].
pub fn read_log<R: BufRead>(r: R) -> io::Result<Vec<Transaction>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            Transaction::from_canonical_line(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{CryptoProvider, SystemProvider};
    use std::sync::Arc;

    fn addr() -> WalletAddress {
        let kp = SystemProvider.gen_keypair(Some(1));
        WalletAddress::of(kp.public())
    }

    fn prop_tx(did: &str) -> TxDraft {
        TxDraft::new(TxKind::Propagation, addr())
            .with("did", PropValue::text(did))
            .with("auth", PropValue::text("key:a"))
            .with("assert", PropValue::text("key:b"))
    }

    #[test]
    fn threshold_examples() {
        let t = Threshold::TWO_THIRDS;
        assert!(t.is_met(7, 10));
        assert!(!t.is_met(6, 10));
        assert!(!t.is_met(2, 3));
        assert!(Threshold::ONE_HALF.is_met(6, 10));
        assert!(!Threshold::ONE_HALF.is_met(5, 10));
        assert_eq!(t.quorum(10), 7);
        assert_eq!("2/3".parse::<Threshold>().unwrap(), t);
        assert!("3/2".parse::<Threshold>().is_err());
        assert!("1/0".parse::<Threshold>().is_err());
        assert!("0/5".parse::<Threshold>().is_err());
    }

    #[test]
    fn ledger_finalization_follows_acceptors() {
        let l = Ledger::new(LedgerConfig::with_acceptors(10, Threshold::TWO_THIRDS, 7)).unwrap();
        let r = l.submit(prop_tx("did:ex:alice")).unwrap();
        assert!(r.finalized);
        assert_eq!(r.accepted_nodes, 7);

        let l = Ledger::new(LedgerConfig::with_acceptors(10, Threshold::TWO_THIRDS, 6)).unwrap();
        let r = l.submit(prop_tx("did:ex:alice")).unwrap();
        assert!(!r.finalized);
        assert!(r.timestamp.is_none());
        assert!(l.is_empty());
        assert_eq!(l.submitted(), 1);
    }

    #[test]
    fn proof_of_work_majority_finalizes() {
        let l = Ledger::new(LedgerConfig::with_acceptors(10, Threshold::ONE_HALF, 6)).unwrap();
        assert!(l.submit(prop_tx("did:ex:a")).unwrap().finalized);
    }

    #[test]
    fn config_validation() {
        assert!(Ledger::new(LedgerConfig::honest(1, Threshold::TWO_THIRDS)).is_err());
        let mut c = LedgerConfig::honest(3, Threshold::TWO_THIRDS);
        c.node_policies.pop();
        assert!(Ledger::new(c).is_err());
    }

    #[test]
    fn malformed_transaction_is_rejected_before_voting() {
        let l = Ledger::new(LedgerConfig::default()).unwrap();
        let draft = TxDraft::new(TxKind::Propagation, addr()).with("did", PropValue::text("x"));
        assert_eq!(
            l.submit(draft),
            Err(LedgerError::MalformedTransaction { kind: TxKind::Propagation, missing: "auth".into() })
        );
        let del = TxDraft::new(TxKind::Deletion, addr())
            .with("did", PropValue::text("x"))
            .with("deleted", PropValue::Bool(false));
        assert!(l.submit(del).is_err());
        assert_eq!(l.submitted(), 0);
    }

    #[test]
    fn query_and_properties() {
        let l = Ledger::new(LedgerConfig::default()).unwrap();
        assert!(l.query(&Query::all()).is_empty());
        l.submit(prop_tx("did:ex:alice")).unwrap();
        let hits = l.query(&Query::all().text_eq("did", "did:ex:alice"));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].kind, TxKind::Propagation);

        let upd = TxDraft::new(TxKind::Update, addr())
            .with("did", PropValue::text("did:ex:alice"))
            .with("auth", PropValue::text("key:c"))
            .with("assert", PropValue::Absent);
        l.submit(upd).unwrap();
        let hits = l.query(&Query::all().text_eq("did", "did:ex:alice"));
        assert_eq!(hits.len(), 2);
        assert!(hits[1].timestamp > hits[0].timestamp);
        assert_eq!(get_property(&hits[1], "assert"), Some(&PropValue::Absent));
        assert_eq!(get_property(&hits[1], "nope"), None);

        let col = TxDraft::new(TxKind::Collection, addr())
            .with("srcIds", PropValue::List(vec!["did:ex:a".into(), "did:ex:b".into()]));
        l.submit(col).unwrap();
        let c = l.latest(&Query::kind(TxKind::Collection).list_contains("srcIds", "did:ex:b")).unwrap();
        assert_eq!(
            get_property(&c, "srcIds"),
            Some(&PropValue::List(vec!["did:ex:a".into(), "did:ex:b".into()]))
        );
        assert!(l.latest(&Query::kind(TxKind::Collection).list_contains("srcIds", "did:ex:z")).is_none());

        let del = TxDraft::new(TxKind::Deletion, addr())
            .with("did", PropValue::text("did:ex:alice"))
            .with("deleted", PropValue::Bool(true));
        l.submit(del).unwrap();
        let d = l.latest(&Query::kind(TxKind::Deletion)).unwrap();
        assert_eq!(get_property(&d, "deleted"), Some(&PropValue::Bool(true)));
    }

    #[test]
    fn log_export_roundtrip() {
        let l = Ledger::new(LedgerConfig::default()).unwrap();
        l.submit(prop_tx("did:ex:a")).unwrap();
        l.submit(
            TxDraft::new(TxKind::Storage, addr())
                .with("vc", PropValue::Bytes(vec![1, 2, 3]))
                .with("storage", PropValue::Bytes(vec![])),
        )
        .unwrap();
        let mut buf = Vec::new();
        l.export_log(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains(": "));
        assert_eq!(read_log(&buf[..]).unwrap(), l.snapshot());
    }

    #[test]
    fn concurrent_submits_get_distinct_timestamps() {
        let l = Arc::new(Ledger::new(LedgerConfig::default()).unwrap());
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let l = Arc::clone(&l);
                std::thread::spawn(move || {
                    for i in 0..50 {
                        l.submit(prop_tx(&format!("did:ex:{t}-{i}"))).unwrap();
                    }
                })
            })
            .collect();
        // readers observe growing prefixes while writers run
        let mut prev: Vec<Transaction> = Vec::new();
        for _ in 0..20 {
            let now = l.snapshot();
            assert!(now.len() >= prev.len());
            assert_eq!(&now[..prev.len()], &prev[..]);
            prev = now;
        }
        for h in handles {
            h.join().unwrap();
        }
        let all = l.snapshot();
        assert_eq!(all.len(), 400);
        for (i, tx) in all.iter().enumerate() {
            assert_eq!(tx.timestamp, i as u64 + 1);
        }
    }

    #[test]
    fn honest_majority_survives_byzantine_minority() {
        for delta in [Threshold::ONE_HALF, Threshold::TWO_THIRDS] {
            for n in 2..=12usize {
                for k in 0..=n {
                    // k < (1-δ)|N|  ⇔  k·den < (den-num)·n
                    if (k as u64) * delta.den >= (delta.den - delta.num) * n as u64 {
                        continue;
                    }
                    let cfg = LedgerConfig::honest(n, delta).with_byzantine(k, (n * 31 + k) as u64);
                    let l = Ledger::new(cfg).unwrap();
                    for i in 0..20 {
                        assert!(l.submit(prop_tx(&format!("did:ex:{i}"))).unwrap().finalized);
                    }
                }
            }
        }
    }
}
