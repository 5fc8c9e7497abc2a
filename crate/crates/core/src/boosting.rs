//! Transactional boosting baseline: abstract locks over the concurrent base
//! structure, with an undo log for rollback.
//!
//! Base operations are singleton transactions on an [`AdjacencyList`], which
//! is linearizable on its own. Locks are per vertex (reader-writer) and per
//! `(vertex, edge)` pair, taken in one global order before any operation
//! runs, so transactions never deadlock.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};

use lock_api::{RawMutex as _, RawRwLock as _};
use parking_lot::{RawMutex, RawRwLock};

use crate::adjacency::{AdjacencyList, Config};
use crate::error::Result;
use crate::history::{GraphState, HistoryEvent, Recorder};
use crate::lftt::{Operation, TxStatus};
use crate::txn::{TransactionRequest, TransactionResult};

const MAX_EDGE_LOCKS: u64 = 1 << 22;

pub struct BoostedGraph {
    base: AdjacencyList,
    key_range: u64,
    vertex_locks: Box<[RawRwLock]>,
    edge_locks: Box<[RawMutex]>,
    clock: AtomicU64,
    tickets: AtomicU64,
    recorder: Option<Recorder>,
}

/// A boosted result together with the number of abstract locks it held.
#[derive(Debug, Clone)]
pub struct BoostedResult {
    pub result: TransactionResult,
    pub locks: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum VLock {
    Shared,
    Exclusive,
}

impl BoostedGraph {
    pub fn new(config: Config) -> Result<Self> {
        let base = AdjacencyList::new(Config {
            record: false,
            ..config
        })?;
        let n = config.key_range;
        let edges = n.saturating_mul(n).min(MAX_EDGE_LOCKS) as usize;
        Ok(Self {
            base,
            key_range: n,
            vertex_locks: (0..n).map(|_| RawRwLock::INIT).collect(),
            edge_locks: (0..edges).map(|_| RawMutex::INIT).collect(),
            clock: AtomicU64::new(0),
            tickets: AtomicU64::new(0),
            recorder: config.record.then(Recorder::new),
        })
    }

    pub fn recorder(&self) -> Option<&Recorder> {
        self.recorder.as_ref()
    }

    pub fn snapshot(&self) -> GraphState {
        self.base.snapshot()
    }

    pub fn check_structure(&self) -> std::result::Result<(), String> {
        self.base.check_structure()
    }

    fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::AcqRel) + 1
    }

    fn record(&self, f: impl FnOnce(u64) -> HistoryEvent) {
        if let Some(r) = &self.recorder {
            r.record(f(self.tick()));
        }
    }

    fn edge_slot(&self, v: u64, e: u64) -> usize {
        ((v * self.key_range + e) % self.edge_locks.len() as u64) as usize
    }

    pub fn execute(&self, req: &TransactionRequest) -> Result<TransactionResult> {
        Ok(self.execute_counted(req)?.result)
    }

    pub fn execute_ops(&self, ops: Vec<Operation>) -> Result<TransactionResult> {
        self.execute(&TransactionRequest::new(ops)?)
    }

    pub fn execute_counted(&self, req: &TransactionRequest) -> Result<BoostedResult> {
        for op in req.ops() {
            self.base.check_key(op.vertex())?;
            if let Some(e) = op.edge() {
                self.base.check_key(e)?;
            }
        }
        let ticket = self.tickets.fetch_add(1, Ordering::Relaxed) + 1;
        self.record(|ts| HistoryEvent::Invoke {
            ticket,
            ts,
            ops: req.ops().to_vec(),
        });

        let mut vertices: std::collections::BTreeMap<u64, VLock> = Default::default();
        let mut edges: BTreeSet<usize> = BTreeSet::new();
        for op in req.ops() {
            let mode = match op {
                Operation::InsertVertex(_) | Operation::DeleteVertex(_) => VLock::Exclusive,
                _ => VLock::Shared,
            };
            let m = vertices.entry(op.vertex()).or_insert(mode);
            *m = (*m).max(mode);
            if let Some(e) = op.edge() {
                edges.insert(self.edge_slot(op.vertex(), e));
            }
        }
        for (&v, &mode) in &vertices {
            match mode {
                VLock::Shared => self.vertex_locks[v as usize].lock_shared(),
                VLock::Exclusive => self.vertex_locks[v as usize].lock_exclusive(),
            }
        }
        // Sublists of deleted vertices are stable once the vertex is held
        // exclusively; lock every edge they may hold.
        for op in req.ops() {
            if let Operation::DeleteVertex(v) = *op {
                for e in self.base.edges_of(v).unwrap_or_default() {
                    edges.insert(self.edge_slot(v, e));
                }
            }
        }
        for &slot in &edges {
            self.edge_locks[slot].lock();
        }
        let locks = vertices.len() + edges.len();

        let mut undo: Vec<Operation> = Vec::new();
        let mut ok = true;
        for op in req.ops() {
            let before = match *op {
                Operation::DeleteVertex(v) => self.base.edges_of(v).unwrap_or_default(),
                _ => BTreeSet::new(),
            };
            if !self.base.execute_ops(vec![*op])?.committed() {
                ok = false;
                break;
            }
            match *op {
                Operation::InsertVertex(v) => undo.push(Operation::DeleteVertex(v)),
                Operation::DeleteVertex(v) => {
                    // Replayed in reverse: the vertex comes back before its edges.
                    undo.extend(before.into_iter().map(|e| Operation::InsertEdge(v, e)));
                    undo.push(Operation::InsertVertex(v));
                }
                Operation::InsertEdge(v, e) => undo.push(Operation::DeleteEdge(v, e)),
                Operation::DeleteEdge(v, e) => undo.push(Operation::InsertEdge(v, e)),
                Operation::Find(..) => {}
            }
        }
        if !ok {
            for inverse in undo.into_iter().rev() {
                let r = self.base.execute_ops(vec![inverse])?;
                debug_assert!(r.committed(), "inverse {inverse:?} failed under locks");
            }
        }
        let status = if ok {
            TxStatus::Committed
        } else {
            TxStatus::Aborted
        };
        let ts = self.tick();
        self.record(|_| HistoryEvent::Status {
            ticket,
            outcome: status,
            ts,
        });

        for &slot in edges.iter().rev() {
            unsafe { self.edge_locks[slot].unlock() };
        }
        for (&v, &mode) in vertices.iter().rev() {
            match mode {
                VLock::Shared => unsafe { self.vertex_locks[v as usize].unlock_shared() },
                VLock::Exclusive => unsafe { self.vertex_locks[v as usize].unlock_exclusive() },
            }
        }
        let results = vec![ok; req.ops().len()];
        self.record(|ts| HistoryEvent::Respond {
            ticket,
            outcome: status,
            results: results.clone(),
            ts,
        });
        Ok(BoostedResult {
            result: TransactionResult {
                ticket,
                status,
                results,
                ts,
            },
            locks,
        })
    }
}
