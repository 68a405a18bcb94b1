//! Append-only record of everything that crossed the simulated network or
//! touched the ledger, exported one canonical JSON record per line.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::aggregator::PayloadClass;
use crate::canonical;
use crate::crypto::{hash, Digest};
use crate::ledger::{TxId, TxKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Send {
        seq: u64,
        from: String,
        to: String,
        port: String,
        step: u8,
        label: String,
        class: PayloadClass,
        #[serde(with = "canonical::hex_bytes")]
        payload: Vec<u8>,
    },
    Deliver {
        seq: u64,
    },
    Drop {
        seq: u64,
        from: String,
        to: String,
        port: String,
        step: u8,
        label: String,
        class: PayloadClass,
        #[serde(with = "canonical::hex_bytes")]
        payload: Vec<u8>,
        reason: String,
    },
    Ledger {
        actor: String,
        step: u8,
        kind: TxKind,
        tx: TxId,
        finalized: bool,
        accepted: usize,
    },
    Note {
        actor: String,
        run: String,
        step: u8,
        text: String,
    },
    Tick {
        idle: u32,
    },
}

impl TraceEvent {
    pub fn step(&self) -> Option<u8> {
        match self {
            TraceEvent::Send { step, .. }
            | TraceEvent::Drop { step, .. }
            | TraceEvent::Ledger { step, .. }
            | TraceEvent::Note { step, .. } => Some(*step),
            _ => None,
        }
    }

    pub fn class(&self) -> Option<PayloadClass> {
        match self {
            TraceEvent::Send { class, .. } | TraceEvent::Drop { class, .. } => Some(*class),
            _ => None,
        }
    }

    /// Wire bytes, for events that carry any.
    pub fn payload(&self) -> Option<&[u8]> {
        match self {
            TraceEvent::Send { payload, .. } | TraceEvent::Drop { payload, .. } => Some(payload),
            _ => None,
        }
    }

    pub fn involves(&self, actor: &str) -> bool {
        match self {
            TraceEvent::Send { from, to, .. } | TraceEvent::Drop { from, to, .. } => from == actor || to == actor,
            TraceEvent::Ledger { actor: a, .. } | TraceEvent::Note { actor: a, .. } => a == actor,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub index: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, event: TraceEvent) {
        let index = self.records.len() as u64;
        self.records.push(TraceRecord { index, event });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.records.iter().map(|r| &r.event)
    }

    pub fn write_lines<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            writeln!(w, "{}", canonical::to_string(r).map_err(io::Error::other)?)?;
        }
        Ok(())
    }

    pub fn to_lines(&self) -> String {
        let mut out = Vec::new();
        self.write_lines(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("canonical JSON is UTF-8")
    }

    /// Reads an exported trace; blank lines are skipped.
    pub fn read_lines<R: BufRead>(r: R) -> io::Result<Trace> {
        let mut records = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = canonical::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
            records.push(record);
        }
        Ok(Trace { records })
    }

    /// SHA-256 over the exported lines.
    pub fn digest(&self) -> Digest {
        hash(self.to_lines().as_bytes())
    }
}
