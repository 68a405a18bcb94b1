//! The deterministic scheduler.
//!
//! Every (sender, receiver, port) triple is a FIFO channel. At each step the
//! scheduler delivers the head of one non-empty channel, chosen by a seeded
//! generator. When nothing is in flight every actor gets a clock tick.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::faults::{apply_all, NetworkFault};
use super::trace::{Trace, TraceEvent};
use super::{Node, SimError};
use crate::aggregator::{
    Address, AggregationRequest, Context, Message, RunId, RunOutcome, SOURCE_PATIENCE,
};
use crate::crypto::CryptoProvider;
use crate::identity::Registry;
use crate::ledger::{FinalizationResult, Ledger, LedgerError, TxDraft};

/// Ledger, registry and crypto provider shared by every actor.
#[derive(Debug, Clone)]
pub struct Shared {
    pub ledger: Arc<Ledger>,
    pub registry: Arc<Registry>,
    pub provider: Arc<dyn CryptoProvider>,
}

impl Shared {
    pub fn new(ledger: Arc<Ledger>, provider: Arc<dyn CryptoProvider>) -> Self {
        let registry = Arc::new(Registry::new(ledger.clone()));
        Shared { ledger, registry, provider }
    }
}

pub(crate) struct Outgoing {
    pub to: Address,
    pub port: String,
    pub msg: Message,
    pub step: u8,
}

/// Collects what an actor does while handling one event.
pub(crate) struct Effects {
    pub out: Vec<Outgoing>,
    pub events: Vec<TraceEvent>,
    pub done: Vec<RunOutcome>,
}

pub(crate) struct ActorContext<'a> {
    pub shared: &'a Shared,
    pub me: &'a Address,
    pub fx: &'a mut Effects,
}

impl Context for ActorContext<'_> {
    fn send(&mut self, to: &Address, port: &str, msg: Message, step: u8) {
        self.fx.out.push(Outgoing { to: to.clone(), port: port.to_string(), msg, step });
    }

    fn submit(&mut self, draft: TxDraft, step: u8) -> Result<FinalizationResult, LedgerError> {
        let kind = draft.kind;
        let res = self.shared.ledger.submit(draft)?;
        self.fx.events.push(TraceEvent::Ledger {
            actor: self.me.to_string(),
            step,
            kind,
            tx: res.transaction_id,
            finalized: res.finalized,
            accepted: res.accepted_nodes,
        });
        Ok(res)
    }

    fn ledger(&self) -> &Ledger {
        &self.shared.ledger
    }

    fn registry(&self) -> &Registry {
        &self.shared.registry
    }

    fn provider(&self) -> &dyn CryptoProvider {
        self.shared.provider.as_ref()
    }

    fn note(&mut self, run: RunId, step: u8, text: String) {
        self.fx.events.push(TraceEvent::Note { actor: self.me.to_string(), run: run.to_string(), step, text });
    }

    fn complete(&mut self, outcome: RunOutcome) {
        self.fx.done.push(outcome);
    }
}

impl Effects {
    pub fn new() -> Self {
        Effects { out: Vec::new(), events: Vec::new(), done: Vec::new() }
    }
}

#[derive(Debug)]
struct Envelope {
    seq: u64,
    from: Address,
    port: String,
    step: u8,
    payload: Vec<u8>,
}

type Channel = (Address, Address, String);

/// Upper bound on consecutive quiet ticks before a run is declared stuck.
const MAX_IDLE: u32 = 32;

#[derive(Debug)]
pub struct Network {
    rng: ChaCha8Rng,
    nodes: BTreeMap<Address, Node>,
    queues: BTreeMap<Channel, VecDeque<Envelope>>,
    seq: u64,
    trace: Trace,
    faults: Vec<NetworkFault>,
    busy: bool,
    idle: u32,
}

impl Network {
    pub fn new(seed: u64) -> Self {
        Network {
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: BTreeMap::new(),
            queues: BTreeMap::new(),
            seq: 0,
            trace: Trace::new(),
            faults: Vec::new(),
            busy: false,
            idle: 0,
        }
    }

    pub fn add(&mut self, address: Address, node: Node) {
        self.nodes.insert(address, node);
    }

    pub fn node(&self, address: &Address) -> Option<&Node> {
        self.nodes.get(address)
    }

    pub fn node_mut(&mut self, address: &Address) -> Option<&mut Node> {
        self.nodes.get_mut(address)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&Address, &Node)> {
        self.nodes.iter()
    }

    pub(crate) fn take_nodes(&mut self) -> BTreeMap<Address, Node> {
        std::mem::take(&mut self.nodes)
    }

    pub(crate) fn restore_nodes(&mut self, nodes: BTreeMap<Address, Node>) {
        self.nodes = nodes;
    }

    pub(crate) fn faults(&self) -> &[NetworkFault] {
        &self.faults
    }

    pub(crate) fn seq(&self) -> u64 {
        self.seq
    }

    pub(crate) fn set_seq(&mut self, seq: u64) {
        self.seq = seq;
    }

    pub fn set_faults(&mut self, faults: Vec<NetworkFault>) {
        self.faults = faults;
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn trace_mut(&mut self) -> &mut Trace {
        &mut self.trace
    }

    pub fn in_flight(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    /// Starts `request` at `consumer` and drives the network until the run
    /// completes and the stragglers have settled.
    pub fn run(
        &mut self,
        shared: &Shared,
        consumer: &Address,
        run: RunId,
        request: AggregationRequest,
    ) -> Result<RunOutcome, SimError> {
        let mut fx = Effects::new();
        {
            let client = self
                .nodes
                .get_mut(consumer)
                .and_then(Node::entity_mut)
                .and_then(|e| e.consumer.as_mut())
                .ok_or_else(|| SimError::NotAConsumer(consumer.to_string()))?;
            let mut ctx = ActorContext { shared, me: consumer, fx: &mut fx };
            client.start(run, request, &mut ctx);
        }
        self.busy = true;
        self.idle = 0;
        let mut outcome = self.absorb(consumer, fx);
        while outcome.is_none() {
            outcome = self.advance(shared)?;
            if outcome.is_none() && self.idle > MAX_IDLE {
                return Err(SimError::Stalled(run));
            }
        }
        // let sources that were cut off notice and give up before the next run
        while self.in_flight() > 0 || self.idle <= SOURCE_PATIENCE {
            self.advance(shared)?;
        }
        Ok(outcome.expect("loop exits with an outcome"))
    }

    /// Delivers one message or, when nothing is in flight, ticks every actor.
    fn advance(&mut self, shared: &Shared) -> Result<Option<RunOutcome>, SimError> {
        let ready: Vec<Channel> =
            self.queues.iter().filter(|(_, q)| !q.is_empty()).map(|(k, _)| k.clone()).collect();
        if ready.is_empty() {
            self.idle = if self.busy { 0 } else { self.idle + 1 };
            self.busy = false;
            self.trace.push(TraceEvent::Tick { idle: self.idle });
            let mut outcome = None;
            let addresses: Vec<Address> = self.nodes.keys().cloned().collect();
            for address in addresses {
                let mut fx = Effects::new();
                if let Some(node) = self.nodes.get_mut(&address) {
                    let mut ctx = ActorContext { shared, me: &address, fx: &mut fx };
                    node.tick(self.idle, &mut ctx);
                }
                outcome = self.absorb(&address, fx).or(outcome);
            }
            return Ok(outcome);
        }
        let pick = ready[self.rng.gen_range(0..ready.len())].clone();
        let env = self.queues.get_mut(&pick).and_then(VecDeque::pop_front).expect("channel is non-empty");
        self.busy = true;
        self.trace.push(TraceEvent::Deliver { seq: env.seq });
        let to = pick.1;
        let msg = Message::decode(&env.payload).ok_or(SimError::Undecodable(env.seq))?;
        let mut fx = Effects::new();
        if let Some(node) = self.nodes.get_mut(&to) {
            let mut ctx = ActorContext { shared, me: &to, fx: &mut fx };
            node.handle(&env.from, &env.port, env.step, msg, &mut ctx);
        }
        Ok(self.absorb(&to, fx))
    }

    /// Records an actor's effects and puts its messages on the wire.
    fn absorb(&mut self, from: &Address, fx: Effects) -> Option<RunOutcome> {
        if !fx.events.is_empty() {
            self.busy = true;
        }
        for e in fx.events {
            self.trace.push(e);
        }
        for Outgoing { to, port, mut msg, step } in fx.out {
            self.busy = true;
            self.seq += 1;
            let seq = self.seq;
            let verdict = if self.nodes.contains_key(&to) {
                apply_all(&self.faults, from, step, &mut msg)
            } else {
                Err(format!("no actor at {to}"))
            };
            let payload = msg.encode();
            let (label, class) = (msg.label().to_string(), msg.class());
            match verdict {
                Ok(()) => {
                    self.trace.push(TraceEvent::Send {
                        seq,
                        from: from.to_string(),
                        to: to.to_string(),
                        port: port.clone(),
                        step,
                        label,
                        class,
                        payload: payload.clone(),
                    });
                    let env = Envelope { seq, from: from.clone(), port: port.clone(), step, payload };
                    self.queues.entry((from.clone(), to, port)).or_default().push_back(env);
                }
                Err(reason) => self.trace.push(TraceEvent::Drop {
                    seq,
                    from: from.to_string(),
                    to: to.to_string(),
                    port,
                    step,
                    label,
                    class,
                    payload,
                    reason,
                }),
            }
        }
        fx.done.into_iter().last()
    }
}
