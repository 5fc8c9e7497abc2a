//! Transaction requests and the public execution entry points.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adjacency::AdjacencyList;
use crate::error::{Error, Result};
use crate::history::HistoryEvent;
use crate::lftt::{execute_ops, run_step, with_frame, Operation, TxDesc, TxStatus};
use crate::reclamation;

/// A non-empty batch of operations to run atomically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRequest {
    ops: Vec<Operation>,
}

impl TransactionRequest {
    pub fn new(ops: Vec<Operation>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::EmptyTransaction);
        }
        Ok(Self { ops })
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    fn validate(&self, graph: &AdjacencyList) -> Result<()> {
        for op in &self.ops {
            graph.check_key(op.vertex())?;
            if let Some(e) = op.edge() {
                graph.check_key(e)?;
            }
        }
        Ok(())
    }
}

/// Outcome of one transaction. Any failing operation aborts the whole
/// transaction, so `results` is all `true` on commit and all `false` on
/// abort.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionResult {
    pub ticket: u64,
    pub status: TxStatus,
    pub results: Vec<bool>,
    /// Logical timestamp of the commit or abort.
    pub ts: u64,
}

impl TransactionResult {
    pub fn committed(&self) -> bool {
        self.status == TxStatus::Committed
    }
}

impl AdjacencyList {
    fn open(&self, req: &TransactionRequest) -> Result<Arc<TxDesc>> {
        req.validate(self)?;
        let desc = Arc::new(TxDesc::new(
            self.next_ticket(),
            req.ops.clone().into_boxed_slice(),
        ));
        self.record(|ts| HistoryEvent::Invoke {
            ticket: desc.ticket(),
            ts,
            ops: req.ops.clone(),
        });
        Ok(desc)
    }

    fn close(&self, desc: &Arc<TxDesc>) -> TransactionResult {
        self.finish_desc(desc, TxStatus::Committed);
        let guard = reclamation::pin();
        self.mark_delete(desc, &guard);
        let status = desc.status();
        let results = vec![status == TxStatus::Committed; desc.size()];
        self.record(|ts| HistoryEvent::Respond {
            ticket: desc.ticket(),
            outcome: status,
            results: results.clone(),
            ts,
        });
        TransactionResult {
            ticket: desc.ticket(),
            status,
            results,
            ts: desc.terminal_ts().unwrap_or(0),
        }
    }

    /// Run `req` to completion, helping any transaction in the way.
    pub fn execute(&self, req: &TransactionRequest) -> Result<TransactionResult> {
        let desc = self.open(req)?;
        {
            let guard = reclamation::pin();
            execute_ops(self, &desc, 0, &guard);
        }
        Ok(self.close(&desc))
    }

    pub fn execute_ops(&self, ops: Vec<Operation>) -> Result<TransactionResult> {
        self.execute(&TransactionRequest::new(ops)?)
    }

    fn single(&self, op: Operation) -> Result<bool> {
        Ok(self.execute_ops(vec![op])?.committed())
    }

    pub fn insert_vertex(&self, v: u64) -> Result<bool> {
        self.single(Operation::InsertVertex(v))
    }

    pub fn delete_vertex(&self, v: u64) -> Result<bool> {
        self.single(Operation::DeleteVertex(v))
    }

    pub fn insert_edge(&self, v: u64, e: u64) -> Result<bool> {
        self.single(Operation::InsertEdge(v, e))
    }

    pub fn delete_edge(&self, v: u64, e: u64) -> Result<bool> {
        self.single(Operation::DeleteEdge(v, e))
    }

    pub fn find_vertex(&self, v: u64) -> Result<bool> {
        self.single(Operation::Find(v, None))
    }

    pub fn find_edge(&self, v: u64, e: u64) -> Result<bool> {
        self.single(Operation::Find(v, Some(e)))
    }

    /// Start a transaction that is advanced one operation at a time.
    pub fn begin(&self, req: &TransactionRequest) -> Result<PendingTxn<'_>> {
        Ok(PendingTxn {
            graph: self,
            desc: self.open(req)?,
            next: 0,
        })
    }
}

/// A transaction driven step by step by its owner, for exploring
/// interleavings deterministically. Conflicts are still resolved by helping,
/// so one step may run parts of other pending transactions.
pub struct PendingTxn<'a> {
    graph: &'a AdjacencyList,
    desc: Arc<TxDesc>,
    next: usize,
}

impl<'a> PendingTxn<'a> {
    pub fn ticket(&self) -> u64 {
        self.desc.ticket()
    }

    pub fn status(&self) -> TxStatus {
        self.desc.status()
    }

    /// Shared descriptor, observable after the owner stops stepping.
    pub fn descriptor(&self) -> Arc<TxDesc> {
        self.desc.clone()
    }

    /// Whether another step would do anything.
    pub fn is_done(&self) -> bool {
        !self.desc.is_active() || self.next >= self.desc.size()
    }

    /// Run the next operation. Returns false once the transaction can make
    /// no further progress, either because it ended or ran out of steps.
    pub fn step(&mut self) -> bool {
        if self.is_done() {
            return false;
        }
        let opid = self.desc.current_op().max(self.next);
        let guard = reclamation::pin();
        with_frame(&self.desc, || {
            run_step(self.graph, &self.desc, opid, &guard)
        });
        self.next = opid + 1;
        !self.is_done()
    }

    /// Commit if still active, release, and report.
    pub fn finish(self) -> TransactionResult {
        self.graph.close(&self.desc)
    }
}
