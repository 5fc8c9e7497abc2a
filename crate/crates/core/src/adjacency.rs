//! The transactional adjacency list: a sorted lock-free list of vertices,
//! each owning an MDList of its outgoing edge keys.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crossbeam_epoch::{Atomic, Guard, Shared};

use crate::error::{Error, Result};
use crate::history::{GraphState, HistoryEvent, NodeKey, Recorder};
use crate::lftt::{
    execute_ops, help_resident, is_key_present, update_info, NodeInfo, Operation, TxDesc, TxStatus,
    UpdateResult, Want, INFO_MARK,
};
use crate::link::Link;
use crate::mdlist::{drop_unpublished, MdList, MdNode, Shape, Splice};
use crate::reclamation::{self, live, Class};

const NEXT_MARK: u64 = 0b001;

/// Construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Config {
    /// Keys are drawn from `[1, key_range)`; `0` is reserved for sentinels.
    pub key_range: u64,
    /// Dimension of every edge sublist.
    pub dim: usize,
    /// Record a history of every transaction.
    pub record: bool,
}

impl Config {
    pub fn new(key_range: u64, dim: usize) -> Self {
        Self {
            key_range,
            dim,
            record: false,
        }
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }
}

impl Default for Config {
    fn default() -> Self {
        Self::new(500, 3)
    }
}

pub struct VertexNode {
    pub(crate) key: u64,
    pub(crate) id: u64,
    pub(crate) info: Atomic<NodeInfo>,
    pub(crate) list: MdList,
    next: Link<VertexNode>,
}

impl VertexNode {
    fn new(key: u64, id: u64, shape: Shape, info: Option<NodeInfo>) -> Box<Self> {
        live::alloc(Class::Vertex);
        let info = match info {
            Some(i) => Atomic::new(i),
            None => Atomic::null(),
        };
        Box::new(Self {
            key,
            id,
            info,
            list: MdList::new(shape),
            next: Link::null(),
        })
    }
}

impl Drop for VertexNode {
    fn drop(&mut self) {
        let guard = unsafe { crossbeam_epoch::unprotected() };
        let info = self.info.load(Ordering::Relaxed, guard);
        if !info.is_null() {
            drop(unsafe { Box::from_raw(info.with_tag(0).as_raw() as *mut NodeInfo) });
        }
        live::free(Class::Vertex);
    }
}

/// A node that can be acquired by a transaction.
#[derive(Clone, Copy)]
pub(crate) enum NodeRef<'a> {
    Vertex(&'a VertexNode),
    Edge {
        vertex: &'a VertexNode,
        node: &'a MdNode,
    },
}

impl<'a> NodeRef<'a> {
    pub(crate) fn info_word(&self) -> &'a Atomic<NodeInfo> {
        match *self {
            NodeRef::Vertex(v) => &v.info,
            NodeRef::Edge { node, .. } => &node.info,
        }
    }

    pub(crate) fn key(&self) -> NodeKey {
        match *self {
            NodeRef::Vertex(v) => NodeKey::Vertex(v.key),
            NodeRef::Edge { vertex, node } if node.key == 0 => NodeKey::Sublist(vertex.key),
            NodeRef::Edge { vertex, node } => NodeKey::Edge(vertex.key, node.key),
        }
    }

    fn incarnation(&self) -> u64 {
        match *self {
            NodeRef::Vertex(v) | NodeRef::Edge { vertex: v, .. } => v.id,
        }
    }
}

pub struct AdjacencyList {
    config: Config,
    shape: Shape,
    head: Box<VertexNode>,
    clock: AtomicU64,
    tickets: AtomicU64,
    incarnations: AtomicU64,
    recorder: Option<Recorder>,
}

unsafe impl Send for AdjacencyList {}
unsafe impl Sync for AdjacencyList {}

impl AdjacencyList {
    pub fn new(config: Config) -> Result<Self> {
        let shape = Shape::for_range(config.key_range, config.dim)?;
        Ok(Self {
            config,
            shape,
            head: VertexNode::new(0, 0, shape, None),
            clock: AtomicU64::new(0),
            tickets: AtomicU64::new(0),
            incarnations: AtomicU64::new(1),
            recorder: config.record.then(Recorder::new),
        })
    }

    pub fn config(&self) -> Config {
        self.config
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub(crate) fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::AcqRel) + 1
    }

    pub(crate) fn next_ticket(&self) -> u64 {
        self.tickets.fetch_add(1, Ordering::Relaxed) + 1
    }

    pub(crate) fn check_key(&self, key: u64) -> Result<()> {
        if key == 0 || key >= self.config.key_range {
            return Err(Error::KeyOutOfRange {
                key,
                low: 1,
                high: self.config.key_range,
            });
        }
        Ok(())
    }

    pub fn recorder(&self) -> Option<&Recorder> {
        self.recorder.as_ref()
    }

    pub(crate) fn record(&self, f: impl FnOnce(u64) -> HistoryEvent) {
        if let Some(r) = &self.recorder {
            r.record(f(self.tick()));
        }
    }

    pub(crate) fn record_acquire(&self, desc: &TxDesc, opid: usize, node: NodeRef<'_>, seq: u64) {
        self.record(|ts| HistoryEvent::Acquire {
            ticket: desc.ticket(),
            opid,
            node: node.key(),
            incarnation: node.incarnation(),
            seq,
            ts,
        });
    }

    /// Draw the terminal timestamp and attempt the status transition.
    pub(crate) fn finish_desc(&self, desc: &TxDesc, status: TxStatus) {
        if !desc.is_active() {
            return;
        }
        crate::chaos::point();
        let ts = self.tick();
        if desc.try_finish(status, ts) {
            self.record(|_| HistoryEvent::Status {
                ticket: desc.ticket(),
                outcome: status,
                ts,
            });
        }
    }

    /// First vertex with key at least `key` and its predecessor, unlinking
    /// logically deleted vertices on the way.
    fn locate_pred_vertex<'g>(
        &'g self,
        key: u64,
        guard: &'g Guard,
    ) -> (&'g VertexNode, Option<&'g VertexNode>) {
        'retry: loop {
            let mut pred: &VertexNode = &self.head;
            let mut curr = pred.next.load().ptr();
            loop {
                let Some(c) = (unsafe { curr.as_ref() }) else {
                    return (pred, None);
                };
                if c.info.load(Ordering::Acquire, guard).tag() & INFO_MARK != 0 {
                    c.next.fetch_or(NEXT_MARK);
                }
                let cnext = c.next.load();
                if cnext.has(NEXT_MARK) {
                    let pnext = pred.next.load();
                    if pnext.ptr() != curr || pnext.has(NEXT_MARK) {
                        continue 'retry;
                    }
                    if pred.next.cas(pnext, cnext.ptr(), 0).is_err() {
                        continue 'retry;
                    }
                    unsafe { reclamation::retire(guard, curr) };
                    curr = cnext.ptr();
                    continue;
                }
                if c.key >= key {
                    return (pred, Some(c));
                }
                pred = c;
                curr = cnext.ptr();
            }
        }
    }

    pub(crate) fn physically_delete(&self, v: &VertexNode, guard: &Guard) {
        v.next.fetch_or(NEXT_MARK);
        self.locate_pred_vertex(v.key, guard);
    }

    fn vertex_node<'g>(&'g self, key: u64, guard: &'g Guard) -> Option<&'g VertexNode> {
        match self.locate_pred_vertex(key, guard) {
            (_, Some(c)) if c.key == key => Some(c),
            _ => None,
        }
    }

    /// The vertex node for `key` if it is logically present to `desc`,
    /// with the info word observed. A foreign active transaction that has
    /// deleted the vertex is helped first, so edge operations never race with
    /// its sweep.
    fn visible_vertex<'g>(
        &'g self,
        key: u64,
        desc: &TxDesc,
        guard: &'g Guard,
    ) -> Option<(&'g VertexNode, Shared<'g, NodeInfo>)> {
        loop {
            let v = self.vertex_node(key, guard)?;
            let word = v.info.load(Ordering::Acquire, guard);
            if word.tag() & INFO_MARK != 0 {
                return None;
            }
            let info = unsafe { word.as_ref() }?;
            let foreign = !std::ptr::eq(info.desc(), desc);
            if foreign && info.desc().is_active() && deletes_before(info, key) {
                help_resident(self, info, guard);
                if !desc.is_active() {
                    // Aborted to break a helping cycle.
                    return None;
                }
                continue;
            }
            return is_key_present(info, Some(desc)).then_some((v, word));
        }
    }

    pub(crate) fn insert_vertex_op(
        &self,
        key: u64,
        desc: &Arc<TxDesc>,
        opid: usize,
        guard: &Guard,
    ) -> bool {
        loop {
            let (pred, curr) = self.locate_pred_vertex(key, guard);
            if let Some(c) = curr.filter(|c| c.key == key) {
                match update_info(self, NodeRef::Vertex(c), desc, opid, Want::Absent, guard) {
                    UpdateResult::Success => return true,
                    UpdateResult::Fail => return false,
                    UpdateResult::Retry => continue,
                }
            }
            let curr_ptr = curr.map_or(std::ptr::null_mut(), |c| c as *const _ as *mut VertexNode);
            let seen = pred.next.load();
            if seen.ptr() != curr_ptr || seen.has(NEXT_MARK) {
                continue;
            }
            if !desc.is_active() {
                return false;
            }
            let id = self.incarnations.fetch_add(1, Ordering::Relaxed);
            let node = VertexNode::new(
                key,
                id,
                self.shape,
                Some(NodeInfo::new(desc.clone(), opid, false, 0)),
            );
            node.next.store_unpublished(curr_ptr, 0);
            crate::chaos::point();
            let raw = Box::into_raw(node);
            match pred.next.cas(seen, raw, 0) {
                Ok(()) => {
                    self.record_acquire(desc, opid, NodeRef::Vertex(unsafe { &*raw }), 0);
                    return true;
                }
                Err(_) => drop(unsafe { Box::from_raw(raw) }),
            }
        }
    }

    pub(crate) fn delete_vertex_op(
        &self,
        key: u64,
        desc: &Arc<TxDesc>,
        opid: usize,
        guard: &Guard,
    ) -> bool {
        loop {
            let Some(v) = self.vertex_node(key, guard) else {
                return false;
            };
            match update_info(self, NodeRef::Vertex(v), desc, opid, Want::Present, guard) {
                UpdateResult::Success => {}
                UpdateResult::Fail => return false,
                UpdateResult::Retry => continue,
            }
            if !v
                .list
                .finish_delete(self, v, v.list.head(), 0, desc, opid, guard)
            {
                return false;
            }
            self.record(|ts| HistoryEvent::SweepDone {
                ticket: desc.ticket(),
                opid,
                vertex: key,
                incarnation: v.id,
                ts,
            });
            return true;
        }
    }

    /// Presence of `vertex` to `desc` after the edge step; the step stands
    /// only if the same vertex node is still present.
    fn confirm_vertex(&self, vertex: &VertexNode, desc: &TxDesc, guard: &Guard) -> Option<bool> {
        match self.visible_vertex(vertex.key, desc, guard) {
            Some((v, _)) if std::ptr::eq(v, vertex) => Some(true),
            Some(_) => None,
            None => Some(false),
        }
    }

    pub(crate) fn insert_edge_op(
        &self,
        key: u64,
        edge: u64,
        desc: &Arc<TxDesc>,
        opid: usize,
        guard: &Guard,
    ) -> bool {
        loop {
            let Some((v, seen_info)) = self.visible_vertex(key, desc, guard) else {
                return false;
            };
            crate::chaos::point();
            let acquired = match v.list.find_node(edge, guard) {
                Some(n) => update_info(
                    self,
                    NodeRef::Edge { vertex: v, node: n },
                    desc,
                    opid,
                    Want::Absent,
                    guard,
                ),
                None => {
                    let node = v
                        .list
                        .new_node(edge, NodeInfo::new(desc.clone(), opid, false, 0));
                    let gate =
                        || desc.is_active() && v.info.load(Ordering::Acquire, guard) == seen_info;
                    match v.list.do_insert(node, gate, guard) {
                        Splice::Inserted(raw) => {
                            self.record_acquire(
                                desc,
                                opid,
                                NodeRef::Edge {
                                    vertex: v,
                                    node: unsafe { &*raw },
                                },
                                0,
                            );
                            UpdateResult::Success
                        }
                        Splice::Exists(node) => {
                            drop_unpublished(node);
                            UpdateResult::Retry
                        }
                        Splice::Refused(node) => {
                            drop_unpublished(node);
                            if desc.is_active() {
                                UpdateResult::Retry
                            } else {
                                UpdateResult::Fail
                            }
                        }
                        Splice::Frozen {
                            pred,
                            dp,
                            seen,
                            node,
                        } => {
                            drop_unpublished(node);
                            let (by, by_opid) =
                                MdList::cell_owner(seen).expect("frozen link holds a cell");
                            if Arc::ptr_eq(by, desc) || !by.is_active() {
                                // Left by this transaction's own earlier
                                // deletion, or by a finished one.
                                v.list.thaw(pred, dp, seen, guard);
                            } else {
                                let by = by.clone();
                                execute_ops(self, &by, by_opid, guard);
                            }
                            UpdateResult::Retry
                        }
                    }
                }
            };
            match acquired {
                UpdateResult::Success => match self.confirm_vertex(v, desc, guard) {
                    Some(ok) => return ok,
                    None => continue,
                },
                UpdateResult::Fail => return false,
                UpdateResult::Retry => continue,
            }
        }
    }

    /// Acquire an existing edge node that must be present.
    fn present_edge_op(
        &self,
        key: u64,
        edge: u64,
        desc: &Arc<TxDesc>,
        opid: usize,
        guard: &Guard,
    ) -> bool {
        loop {
            let Some((v, _)) = self.visible_vertex(key, desc, guard) else {
                return false;
            };
            let Some(n) = v.list.find_node(edge, guard) else {
                return match self.confirm_vertex(v, desc, guard) {
                    None => continue,
                    Some(_) => false,
                };
            };
            match update_info(
                self,
                NodeRef::Edge { vertex: v, node: n },
                desc,
                opid,
                Want::Present,
                guard,
            ) {
                UpdateResult::Success => match self.confirm_vertex(v, desc, guard) {
                    Some(ok) => return ok,
                    None => continue,
                },
                UpdateResult::Fail => return false,
                UpdateResult::Retry => continue,
            }
        }
    }

    pub(crate) fn delete_edge_op(
        &self,
        key: u64,
        edge: u64,
        desc: &Arc<TxDesc>,
        opid: usize,
        guard: &Guard,
    ) -> bool {
        self.present_edge_op(key, edge, desc, opid, guard)
    }

    pub(crate) fn find_op(
        &self,
        key: u64,
        edge: Option<u64>,
        desc: &Arc<TxDesc>,
        opid: usize,
        guard: &Guard,
    ) -> bool {
        if let Some(e) = edge {
            return self.present_edge_op(key, e, desc, opid, guard);
        }
        loop {
            let Some(v) = self.vertex_node(key, guard) else {
                return false;
            };
            match update_info(self, NodeRef::Vertex(v), desc, opid, Want::Present, guard) {
                UpdateResult::Success => return true,
                UpdateResult::Fail => return false,
                UpdateResult::Retry => continue,
            }
        }
    }

    /// After `desc` terminates, mark the nodes it left logically absent and
    /// unlink such vertices.
    pub(crate) fn mark_delete(&self, desc: &TxDesc, guard: &Guard) {
        debug_assert!(!desc.is_active());
        let ours_and_absent = |word: &Atomic<NodeInfo>| -> bool {
            let cur = word.load(Ordering::Acquire, guard);
            if cur.tag() & INFO_MARK != 0 {
                return false;
            }
            let Some(info) = (unsafe { cur.as_ref() }) else {
                return false;
            };
            if !std::ptr::eq(info.desc(), desc) || is_key_present(info, None) {
                return false;
            }
            word.compare_exchange(
                cur,
                cur.with_tag(INFO_MARK),
                Ordering::AcqRel,
                Ordering::Acquire,
                guard,
            )
            .is_ok()
        };
        for op in desc.ops() {
            let Some(v) = self.vertex_node(op.vertex(), guard) else {
                continue;
            };
            match *op {
                Operation::InsertVertex(_) | Operation::DeleteVertex(_) => {
                    if ours_and_absent(&v.info) {
                        self.physically_delete(v, guard);
                    }
                }
                Operation::InsertEdge(_, e) | Operation::DeleteEdge(_, e) => {
                    if let Some(n) = v.list.find_node(e, guard) {
                        ours_and_absent(&n.info);
                    }
                }
                Operation::Find(..) => {}
            }
        }
    }

    /// Logical contents. Meaningful only at quiescence.
    pub fn snapshot(&self) -> GraphState {
        let guard = reclamation::pin();
        let mut out = GraphState::new();
        let mut curr = self.head.next.load().ptr();
        while let Some(v) = unsafe { curr.as_ref() } {
            let next = v.next.load();
            curr = next.ptr();
            if next.has(NEXT_MARK) || !present(&v.info, &guard) {
                continue;
            }
            let mut edges = std::collections::BTreeSet::new();
            v.list.visit(&guard, |n| {
                if present(&n.info, &guard) {
                    edges.insert(n.key);
                }
            });
            out.insert(v.key, edges);
        }
        out
    }

    /// Edge set of one vertex, if present. Exact only while no transaction
    /// touching the vertex is in flight.
    pub fn edges_of(&self, key: u64) -> Option<std::collections::BTreeSet<u64>> {
        let guard = reclamation::pin();
        let v = self.vertex_node(key, &guard)?;
        if !present(&v.info, &guard) {
            return None;
        }
        let mut edges = std::collections::BTreeSet::new();
        v.list.visit(&guard, |n| {
            if present(&n.info, &guard) {
                edges.insert(n.key);
            }
        });
        Some(edges)
    }

    /// Whether the sublist of `key` is fully frozen and acquired by
    /// `desc`'s deletion. Quiescent use only.
    #[cfg(test)]
    pub(crate) fn swept_by(&self, key: u64, desc: &TxDesc) -> bool {
        let guard = reclamation::pin();
        self.vertex_node(key, &guard)
            .is_some_and(|v| v.list.fully_swept_by(desc))
    }

    /// Structural invariants at quiescence: sorted unique vertex keys and
    /// well-formed sublists.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        let mut last = 0u64;
        let mut curr = self.head.next.load().ptr();
        while let Some(v) = unsafe { curr.as_ref() } {
            if v.key <= last {
                return Err(format!("vertex {} follows {}", v.key, last));
            }
            last = v.key;
            v.list
                .check_structure()
                .map_err(|e| format!("vertex {}: {e}", v.key))?;
            curr = v.next.load().ptr();
        }
        Ok(())
    }
}

/// Whether the operations `info`'s transaction has reached include a
/// deletion of vertex `key`.
fn deletes_before(info: &NodeInfo, key: u64) -> bool {
    info.desc().ops()[..=info.opid()].contains(&Operation::DeleteVertex(key))
}

fn present(word: &Atomic<NodeInfo>, guard: &Guard) -> bool {
    let cur = word.load(Ordering::Acquire, guard);
    if cur.tag() & INFO_MARK != 0 {
        return false;
    }
    unsafe { cur.as_ref() }.is_some_and(|i| is_key_present(i, None))
}

impl Drop for AdjacencyList {
    fn drop(&mut self) {
        let mut curr = self.head.next.load().ptr();
        while !curr.is_null() {
            let node = unsafe { Box::from_raw(curr) };
            curr = node.next.load().ptr();
        }
    }
}
