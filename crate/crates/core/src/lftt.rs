//! Transaction descriptors and the info-word acquisition protocol.
//!
//! Every node carries an info word pointing at the [`NodeInfo`] of the last
//! transaction that acquired it. A node's logical membership is read off that
//! transaction's status, so committing or aborting a descriptor flips every
//! node it touched in one step. Conflicting transactions help each other to a
//! terminal state instead of blocking.

use std::cell::RefCell;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use crossbeam_epoch::{Guard, Owned};
use serde::{Deserialize, Serialize};

use crate::adjacency::{AdjacencyList, NodeRef};
use crate::reclamation::{self, live, Class};

/// Low tag on an info word: the node is logically gone and may be unlinked.
pub(crate) const INFO_MARK: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TxStatus {
    Active,
    Committed,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpType {
    InsertVertex,
    DeleteVertex,
    InsertEdge,
    DeleteEdge,
    Find,
}

/// One operation of a transaction. Edge-addressed operations carry the
/// vertex first and the edge key second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operation {
    InsertVertex(u64),
    DeleteVertex(u64),
    InsertEdge(u64, u64),
    DeleteEdge(u64, u64),
    /// `Find(v, None)` tests vertex presence, `Find(v, Some(e))` tests edge
    /// `e` in the sublist of `v`.
    Find(u64, Option<u64>),
}

impl Operation {
    pub fn kind(&self) -> OpType {
        match self {
            Operation::InsertVertex(_) => OpType::InsertVertex,
            Operation::DeleteVertex(_) => OpType::DeleteVertex,
            Operation::InsertEdge(..) => OpType::InsertEdge,
            Operation::DeleteEdge(..) => OpType::DeleteEdge,
            Operation::Find(..) => OpType::Find,
        }
    }

    pub fn vertex(&self) -> u64 {
        match *self {
            Operation::InsertVertex(v)
            | Operation::DeleteVertex(v)
            | Operation::InsertEdge(v, _)
            | Operation::DeleteEdge(v, _)
            | Operation::Find(v, _) => v,
        }
    }

    pub fn edge(&self) -> Option<u64> {
        match *self {
            Operation::InsertEdge(_, e) | Operation::DeleteEdge(_, e) => Some(e),
            Operation::Find(_, e) => e,
            _ => None,
        }
    }

    /// Whether the node this operation acquires is present after it applies.
    pub(crate) fn leaves_present(&self) -> bool {
        !matches!(self.kind(), OpType::DeleteVertex | OpType::DeleteEdge)
    }
}

/// Result of one acquisition attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateResult {
    Success,
    Fail,
    Retry,
}

/// What the caller requires of the node's logical state before acquiring it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Want {
    Present,
    Absent,
    /// Acquire regardless of presence (sublist sweep of a vertex deletion).
    Any,
}

const STATE_BITS: u32 = 2;
const ST_ACTIVE: u64 = 0;
const ST_COMMITTED: u64 = 1;
const ST_ABORTED: u64 = 2;

/// Shared record of one transaction.
///
/// The status word packs the state with the logical timestamp drawn just
/// before the terminal transition, which gives the commit order.
#[derive(Debug)]
pub struct TxDesc {
    ticket: u64,
    ops: Box<[Operation]>,
    status: AtomicU64,
    current_op: AtomicUsize,
}

impl TxDesc {
    pub(crate) fn new(ticket: u64, ops: Box<[Operation]>) -> Self {
        live::alloc(Class::Descriptor);
        Self {
            ticket,
            ops,
            status: AtomicU64::new(ST_ACTIVE),
            current_op: AtomicUsize::new(0),
        }
    }

    pub fn ticket(&self) -> u64 {
        self.ticket
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn size(&self) -> usize {
        self.ops.len()
    }

    pub fn status(&self) -> TxStatus {
        decode_state(self.status.load(Ordering::Acquire))
    }

    /// Timestamp of the terminal transition, if any.
    pub fn terminal_ts(&self) -> Option<u64> {
        let w = self.status.load(Ordering::Acquire);
        (w & 0b11 != ST_ACTIVE).then_some(w >> STATE_BITS)
    }

    pub fn is_active(&self) -> bool {
        self.status.load(Ordering::Acquire) & 0b11 == ST_ACTIVE
    }

    pub fn current_op(&self) -> usize {
        self.current_op.load(Ordering::Acquire)
    }

    fn advance_to(&self, opid: usize) {
        self.current_op.fetch_max(opid, Ordering::AcqRel);
    }

    /// Single Active→terminal transition; returns whether this call made it.
    pub(crate) fn try_finish(&self, status: TxStatus, ts: u64) -> bool {
        let state = match status {
            TxStatus::Committed => ST_COMMITTED,
            TxStatus::Aborted => ST_ABORTED,
            TxStatus::Active => return false,
        };
        self.status
            .compare_exchange(
                ST_ACTIVE,
                (ts << STATE_BITS) | state,
                Ordering::AcqRel,
                Ordering::Acquire,
            )
            .is_ok()
    }
}

impl Drop for TxDesc {
    fn drop(&mut self) {
        live::free(Class::Descriptor);
    }
}

fn decode_state(w: u64) -> TxStatus {
    match w & 0b11 {
        ST_ACTIVE => TxStatus::Active,
        ST_COMMITTED => TxStatus::Committed,
        _ => TxStatus::Aborted,
    }
}

/// Annotation linking a node to the operation that last acquired it.
///
/// `prior` is the node's presence before the owning transaction first touched
/// it; an aborted or still-pending transaction is read through it.
#[derive(Debug)]
pub struct NodeInfo {
    pub(crate) desc: Arc<TxDesc>,
    pub(crate) opid: usize,
    pub(crate) prior: bool,
    /// Position of this annotation in the node's acquisition sequence.
    pub(crate) seq: u64,
}

impl NodeInfo {
    pub(crate) fn new(desc: Arc<TxDesc>, opid: usize, prior: bool, seq: u64) -> Self {
        debug_assert!(opid < desc.size());
        live::alloc(Class::NodeInfo);
        Self {
            desc,
            opid,
            prior,
            seq,
        }
    }

    pub fn desc(&self) -> &TxDesc {
        &self.desc
    }

    pub fn opid(&self) -> usize {
        self.opid
    }

    fn op(&self) -> &Operation {
        &self.desc.ops[self.opid]
    }
}

impl Drop for NodeInfo {
    fn drop(&mut self) {
        live::free(Class::NodeInfo);
    }
}

/// Logical presence of a node annotated with `info`, as seen by `reader`.
///
/// A committed transaction shows its effect; an aborted one is read as if it
/// never ran. While active, only the transaction itself sees its effects.
pub fn is_key_present(info: &NodeInfo, reader: Option<&TxDesc>) -> bool {
    match info.desc.status() {
        TxStatus::Committed => info.op().leaves_present(),
        TxStatus::Aborted => info.prior,
        TxStatus::Active => {
            let own = reader.is_some_and(|r| std::ptr::eq(r, &*info.desc));
            if own {
                info.op().leaves_present()
            } else {
                info.prior
            }
        }
    }
}

/// Acquire `node` for operation `opid` of `desc`.
pub(crate) fn update_info(
    graph: &AdjacencyList,
    node: NodeRef<'_>,
    desc: &Arc<TxDesc>,
    opid: usize,
    want: Want,
    guard: &Guard,
) -> UpdateResult {
    let word = node.info_word();
    let old = word.load(Ordering::Acquire, guard);
    let marked = old.tag() & INFO_MARK != 0;
    if marked {
        if let NodeRef::Vertex(v) = node {
            graph.physically_delete(v, guard);
            return UpdateResult::Retry;
        }
        // Marked edge nodes stay linked and read as free, absent slots.
    }

    let resident = if marked {
        None
    } else {
        unsafe { old.as_ref() }
    };
    if let Some(oi) = resident {
        if !Arc::ptr_eq(&oi.desc, desc) {
            help_resident(graph, oi, guard);
        } else if oi.opid >= opid {
            return UpdateResult::Success;
        }
    }

    let (has_key, prior) = match resident {
        None => (false, false),
        Some(oi) if Arc::ptr_eq(&oi.desc, desc) => (is_key_present(oi, Some(desc)), oi.prior),
        Some(oi) => {
            let p = is_key_present(oi, Some(desc));
            (p, p)
        }
    };
    match want {
        Want::Present if !has_key => return UpdateResult::Fail,
        Want::Absent if has_key => return UpdateResult::Fail,
        _ => {}
    }
    if !desc.is_active() {
        return UpdateResult::Fail;
    }

    let seq = unsafe { old.with_tag(0).as_ref() }.map_or(0, |i| i.seq + 1);
    crate::chaos::point();
    let fresh = Owned::new(NodeInfo::new(desc.clone(), opid, prior, seq));
    match word.compare_exchange(old, fresh, Ordering::AcqRel, Ordering::Acquire, guard) {
        Ok(_) => {
            if !old.is_null() {
                unsafe { reclamation::retire(guard, old.with_tag(0).as_raw() as *mut NodeInfo) };
            }
            graph.record_acquire(desc, opid, node, seq);
            UpdateResult::Success
        }
        Err(_) => UpdateResult::Retry,
    }
}

/// Drive a foreign resident transaction to a terminal state.
///
/// Helping restarts at the resident's own operation rather than the next
/// one: acquiring a node is not always the last step of an operation (a
/// vertex deletion still has to sweep, an edge operation still confirms its
/// vertex), and re-running an operation for the same descriptor is
/// idempotent.
pub(crate) fn help_resident(graph: &AdjacencyList, resident: &NodeInfo, guard: &Guard) {
    let desc = &resident.desc;
    if desc.is_active() {
        execute_ops(graph, desc, resident.opid, guard);
    }
}

thread_local! {
    static HELPING: RefCell<Vec<Arc<TxDesc>>> = const { RefCell::new(Vec::new()) };
}

struct StackFrame;

impl StackFrame {
    fn push(desc: &Arc<TxDesc>) -> Self {
        HELPING.with(|h| h.borrow_mut().push(desc.clone()));
        StackFrame
    }
}

impl Drop for StackFrame {
    fn drop(&mut self) {
        HELPING.with(|h| {
            h.borrow_mut().pop();
        });
    }
}

/// If `desc` is already being executed further down this thread's helping
/// chain, abort the later-published of `desc` and the current top and report
/// that the cycle was broken.
fn break_cycle(graph: &AdjacencyList, desc: &Arc<TxDesc>) -> bool {
    let top = HELPING.with(|h| {
        let h = h.borrow();
        if h.iter().any(|d| Arc::ptr_eq(d, desc)) {
            h.last().cloned()
        } else {
            None
        }
    });
    let Some(top) = top else { return false };
    if !Arc::ptr_eq(&top, desc) {
        let victim = if desc.ticket > top.ticket { desc } else { &top };
        graph.finish_desc(victim, TxStatus::Aborted);
    }
    true
}

/// Run `desc.ops[from..]`; returns whether the transaction committed.
/// Safe to call concurrently from any number of helpers.
pub(crate) fn execute_ops(
    graph: &AdjacencyList,
    desc: &Arc<TxDesc>,
    from: usize,
    guard: &Guard,
) -> bool {
    if !desc.is_active() {
        return desc.status() == TxStatus::Committed;
    }
    if break_cycle(graph, desc) {
        return desc.status() == TxStatus::Committed;
    }
    let _frame = StackFrame::push(desc);
    for opid in from..desc.size() {
        crate::chaos::point();
        if !run_step(graph, desc, opid, guard) {
            break;
        }
    }
    if desc.is_active() {
        graph.finish_desc(desc, TxStatus::Committed);
    }
    desc.status() == TxStatus::Committed
}

/// Execute a single operation; returns false when the transaction is no
/// longer active afterwards.
pub(crate) fn run_step(
    graph: &AdjacencyList,
    desc: &Arc<TxDesc>,
    opid: usize,
    guard: &Guard,
) -> bool {
    if !desc.is_active() {
        return false;
    }
    desc.advance_to(opid);
    let ok = match desc.ops[opid] {
        Operation::InsertVertex(v) => graph.insert_vertex_op(v, desc, opid, guard),
        Operation::DeleteVertex(v) => graph.delete_vertex_op(v, desc, opid, guard),
        Operation::InsertEdge(v, e) => graph.insert_edge_op(v, e, desc, opid, guard),
        Operation::DeleteEdge(v, e) => graph.delete_edge_op(v, e, desc, opid, guard),
        Operation::Find(v, e) => graph.find_op(v, e, desc, opid, guard),
    };
    if !ok {
        graph.finish_desc(desc, TxStatus::Aborted);
    }
    desc.is_active()
}

/// Run `f` with `desc` registered as the bottom of this thread's helping
/// chain, used when the owner steps its own transaction.
pub(crate) fn with_frame<R>(desc: &Arc<TxDesc>, f: impl FnOnce() -> R) -> R {
    let _frame = StackFrame::push(desc);
    f()
}
