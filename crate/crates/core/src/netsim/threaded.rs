//! Stress mode: every actor on its own thread, channels from crossbeam.
//!
//! Interleavings depend on the OS scheduler, so traces from this mode are not
//! reproducible. Quiescence is detected with an in-flight counter; when it
//! drops to zero every actor receives a tick, as in the deterministic mode.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, Sender};
use parking_lot::Mutex;

use super::faults::{apply_all, NetworkFault};
use super::network::{ActorContext, Effects, Outgoing, Shared};
use super::trace::{Trace, TraceEvent};
use super::{Network, Node, SimError};
use crate::aggregator::{Address, AggregationRequest, Message, RunId, RunOutcome, SOURCE_PATIENCE};

enum Command {
    Deliver { seq: u64, from: Address, port: String, step: u8, payload: Vec<u8> },
    Tick(u32),
    Stop,
}

struct Router {
    senders: BTreeMap<Address, Sender<Command>>,
    state: Mutex<(Trace, u64)>,
    faults: Vec<NetworkFault>,
    in_flight: AtomicUsize,
    busy: AtomicBool,
    done: Sender<RunOutcome>,
}

impl Router {
    fn absorb(&self, from: &Address, fx: Effects) {
        let mut state = self.state.lock();
        if !fx.events.is_empty() {
            self.busy.store(true, Ordering::SeqCst);
        }
        for e in fx.events {
            state.0.push(e);
        }
        for Outgoing { to, port, mut msg, step } in fx.out {
            self.busy.store(true, Ordering::SeqCst);
            state.1 += 1;
            let seq = state.1;
            let target = self.senders.get(&to);
            let verdict = match target {
                Some(_) => apply_all(&self.faults, from, step, &mut msg),
                None => Err(format!("no actor at {to}")),
            };
            let payload = msg.encode();
            let (label, class) = (msg.label().to_string(), msg.class());
            let (from_s, to_s) = (from.to_string(), to.to_string());
            match (verdict, target) {
                (Ok(()), Some(tx)) => {
                    state.0.push(TraceEvent::Send {
                        seq,
                        from: from_s,
                        to: to_s,
                        port: port.clone(),
                        step,
                        label,
                        class,
                        payload: payload.clone(),
                    });
                    self.in_flight.fetch_add(1, Ordering::SeqCst);
                    let cmd = Command::Deliver { seq, from: from.clone(), port, step, payload };
                    if tx.send(cmd).is_err() {
                        self.in_flight.fetch_sub(1, Ordering::SeqCst);
                    }
                }
                (verdict, _) => state.0.push(TraceEvent::Drop {
                    seq,
                    from: from_s,
                    to: to_s,
                    port,
                    step,
                    label,
                    class,
                    payload,
                    reason: verdict.err().unwrap_or_default(),
                }),
            }
        }
        for outcome in fx.done {
            let _ = self.done.send(outcome);
        }
    }
}

fn actor_loop(address: Address, mut node: Node, rx: Receiver<Command>, router: Arc<Router>, shared: Shared) -> (Address, Node) {
    while let Ok(cmd) = rx.recv() {
        let mut fx = Effects::new();
        match cmd {
            Command::Stop => break,
            Command::Tick(idle) => {
                let mut ctx = ActorContext { shared: &shared, me: &address, fx: &mut fx };
                node.tick(idle, &mut ctx);
            }
            Command::Deliver { seq, from, port, step, payload } => {
                router.state.lock().0.push(TraceEvent::Deliver { seq });
                router.busy.store(true, Ordering::SeqCst);
                if let Some(msg) = Message::decode(&payload) {
                    let mut ctx = ActorContext { shared: &shared, me: &address, fx: &mut fx };
                    node.handle(&from, &port, step, msg, &mut ctx);
                }
            }
        }
        router.absorb(&address, fx);
        router.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
    (address, node)
}

fn wait_quiet(router: &Router) {
    while router.in_flight.load(Ordering::SeqCst) > 0 {
        thread::sleep(Duration::from_micros(50));
    }
}

/// Same contract as [`Network::run`], with one thread per actor.
pub(crate) fn run(
    network: &mut Network,
    shared: &Shared,
    consumer: &Address,
    run: RunId,
    request: AggregationRequest,
) -> Result<RunOutcome, SimError> {
    let mut nodes = network.take_nodes();
    let mut fx = Effects::new();
    match nodes.get_mut(consumer).and_then(Node::entity_mut).and_then(|e| e.consumer.as_mut()) {
        Some(client) => {
            let mut ctx = ActorContext { shared, me: consumer, fx: &mut fx };
            client.start(run, request, &mut ctx);
        }
        None => {
            network.restore_nodes(nodes);
            return Err(SimError::NotAConsumer(consumer.to_string()));
        }
    }

    let (done_tx, done_rx) = unbounded();
    let mut receivers = Vec::new();
    let mut senders = BTreeMap::new();
    for address in nodes.keys() {
        let (tx, rx) = unbounded();
        senders.insert(address.clone(), tx);
        receivers.push(rx);
    }
    let router = Arc::new(Router {
        senders,
        state: Mutex::new((Trace::new(), network.seq())),
        faults: network.faults().to_vec(),
        in_flight: AtomicUsize::new(0),
        busy: AtomicBool::new(true),
        done: done_tx,
    });
    let handles: Vec<_> = nodes
        .into_iter()
        .zip(receivers)
        .map(|((address, node), rx)| {
            let (router, shared) = (router.clone(), shared.clone());
            thread::spawn(move || actor_loop(address, node, rx, router, shared))
        })
        .collect();

    router.absorb(consumer, fx);
    let mut idle = 0u32;
    let mut outcome = None;
    let result = loop {
        wait_quiet(&router);
        if outcome.is_none() {
            outcome = done_rx.try_recv().ok();
        }
        idle = if router.busy.swap(false, Ordering::SeqCst) { 0 } else { idle + 1 };
        if outcome.is_some() && idle > SOURCE_PATIENCE {
            break Ok(outcome.take().expect("checked"));
        }
        if outcome.is_none() && idle > 32 {
            break Err(SimError::Stalled(run));
        }
        router.state.lock().0.push(TraceEvent::Tick { idle });
        for tx in router.senders.values() {
            router.in_flight.fetch_add(1, Ordering::SeqCst);
            let _ = tx.send(Command::Tick(idle));
        }
    };

    for tx in router.senders.values() {
        let _ = tx.send(Command::Stop);
    }
    let mut restored = BTreeMap::new();
    for h in handles {
        let (address, node) = h.join().expect("actor thread panicked");
        restored.insert(address, node);
    }
    network.restore_nodes(restored);
    let (trace, seq) = std::mem::take(&mut *router.state.lock());
    network.set_seq(seq);
    for r in trace.records() {
        network.trace_mut().push(r.event.clone());
    }
    result
}
