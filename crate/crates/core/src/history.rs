//! Event histories recorded by a running graph, and their JSONL form.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lftt::{Operation, TxStatus};

/// Logical graph contents: vertex key to its edge keys.
pub type GraphState = BTreeMap<u64, BTreeSet<u64>>;

/// A node of the structure as named in a history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKey {
    Vertex(u64),
    Edge(u64, u64),
    /// Head sentinel of a vertex's edge sublist.
    Sublist(u64),
}

impl NodeKey {
    pub fn vertex(&self) -> u64 {
        match *self {
            NodeKey::Vertex(v) | NodeKey::Edge(v, _) | NodeKey::Sublist(v) => v,
        }
    }
}

/// `ts` values come from the graph's logical clock. `incarnation` names the
/// physical vertex node, which changes when a vertex is unlinked and
/// inserted again; `seq` counts acquisitions of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum HistoryEvent {
    Invoke {
        ticket: u64,
        ts: u64,
        ops: Vec<Operation>,
    },
    Acquire {
        ticket: u64,
        opid: usize,
        node: NodeKey,
        incarnation: u64,
        seq: u64,
        ts: u64,
    },
    SweepDone {
        ticket: u64,
        opid: usize,
        vertex: u64,
        incarnation: u64,
        ts: u64,
    },
    Status {
        ticket: u64,
        outcome: TxStatus,
        ts: u64,
    },
    Respond {
        ticket: u64,
        outcome: TxStatus,
        results: Vec<bool>,
        ts: u64,
    },
}

impl HistoryEvent {
    pub fn ticket(&self) -> u64 {
        match *self {
            HistoryEvent::Invoke { ticket, .. }
            | HistoryEvent::Acquire { ticket, .. }
            | HistoryEvent::SweepDone { ticket, .. }
            | HistoryEvent::Status { ticket, .. }
            | HistoryEvent::Respond { ticket, .. } => ticket,
        }
    }

    pub fn ts(&self) -> u64 {
        match *self {
            HistoryEvent::Invoke { ts, .. }
            | HistoryEvent::Acquire { ts, .. }
            | HistoryEvent::SweepDone { ts, .. }
            | HistoryEvent::Status { ts, .. }
            | HistoryEvent::Respond { ts, .. } => ts,
        }
    }
}

const SHARDS: usize = 16;

/// Collects events from many threads with little contention.
pub struct Recorder {
    shards: Vec<Mutex<Vec<HistoryEvent>>>,
}

impl Default for Recorder {
    fn default() -> Self {
        Self::new()
    }
}

impl Recorder {
    pub fn new() -> Self {
        Self {
            shards: (0..SHARDS).map(|_| Mutex::new(Vec::new())).collect(),
        }
    }

    pub fn record(&self, event: HistoryEvent) {
        self.shards[shard_index()].lock().push(event);
    }

    /// Everything recorded so far, ordered by timestamp.
    pub fn take(&self) -> Vec<HistoryEvent> {
        let mut all: Vec<_> = self
            .shards
            .iter()
            .flat_map(|s| std::mem::take(&mut *s.lock()))
            .collect();
        all.sort_by_key(HistoryEvent::ts);
        all
    }
}

fn shard_index() -> usize {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    std::thread::current().id().hash(&mut h);
    h.finish() as usize % SHARDS
}

/// A recorded run: events plus the logical state observed at quiescence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<HistoryEvent>,
    pub final_state: Option<GraphState>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Trailer {
    FinalState { vertices: Vec<(u64, Vec<u64>)> },
}

impl History {
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::History(e.to_string());
        for e in &self.events {
            serde_json::to_writer(&mut out, e).map_err(|e| Error::History(e.to_string()))?;
            out.write_all(b"\n").map_err(io)?;
        }
        if let Some(state) = &self.final_state {
            let vertices = state
                .iter()
                .map(|(v, es)| (*v, es.iter().copied().collect()))
                .collect();
            let t = Trailer::FinalState { vertices };
            serde_json::to_writer(&mut out, &t).map_err(|e| Error::History(e.to_string()))?;
            out.write_all(b"\n").map_err(io)?;
        }
        Ok(())
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        let mut h = History::default();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::History(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(e) = serde_json::from_str::<HistoryEvent>(&line) {
                h.events.push(e);
                continue;
            }
            match serde_json::from_str::<Trailer>(&line) {
                Ok(Trailer::FinalState { vertices }) => {
                    h.final_state = Some(
                        vertices
                            .into_iter()
                            .map(|(v, es)| (v, es.into_iter().collect()))
                            .collect(),
                    )
                }
                Err(e) => return Err(Error::History(format!("line {}: {e}", n + 1))),
            }
        }
        Ok(h)
    }
}
