//! Multi-dimensional list holding the edge set of one vertex.
//!
//! Keys in `[0, base^dim)` map to `dim` base-`base` digits, most significant
//! first. A node of dimension `d` hangs off its parent's `d`-th child link,
//! shares the parent's first `d` digits and has a larger `d`-th digit. Search
//! walks dimension by dimension, so it follows at most `dim * base` links.
//!
//! Nodes are never unlinked once spliced; an edge that goes away is only
//! logically absent and its node is reused by a later insertion of the same
//! key. Child links carry two tags:
//!
//! * `ADOPTED`: frozen because the child moved under a newly spliced node.
//! * `FROZEN`: the link points at a [`FreezeCell`] left by a vertex deletion's
//!   sweep; splices into it fail until the cell is known to be stale.

use std::sync::atomic::Ordering;
use std::sync::Arc;

use crossbeam_epoch::{Atomic, Guard, Owned, Shared};

use crate::adjacency::{AdjacencyList, NodeRef, VertexNode};
use crate::error::{Error, Result};
use crate::lftt::{update_info, NodeInfo, TxDesc, UpdateResult, Want};
use crate::link::{Link, LinkVal};
use crate::reclamation::{self, live, Class};

pub(crate) const ADOPTED: u64 = 0b001;
pub(crate) const FROZEN: u64 = 0b010;

/// Digits of a key, most significant first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coordinate(Box<[u32]>);

impl Coordinate {
    pub fn digits(&self) -> &[u32] {
        &self.0
    }

    /// Positional base-`base` value of the digits.
    pub fn to_key(&self, base: u64) -> u64 {
        self.0.iter().fold(0u64, |acc, &d| acc * base + d as u64)
    }
}

/// Map `key` to its `dim` base-`base` digits.
pub fn key_to_coord(key: u64, dim: usize, base: u64) -> Result<Coordinate> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let capacity = base.checked_pow(dim as u32).unwrap_or(u64::MAX);
    if key >= capacity {
        return Err(Error::KeyOutOfRange {
            key,
            low: 0,
            high: capacity,
        });
    }
    let mut digits = vec![0u32; dim];
    let mut rest = key;
    for slot in digits.iter_mut().rev() {
        *slot = (rest % base) as u32;
        rest /= base;
    }
    Ok(Coordinate(digits.into_boxed_slice()))
}

/// Smallest `b` with `b^dim >= key_range`, i.e. `ceil(key_range^(1/dim))`.
pub fn base_for(key_range: u64, dim: usize) -> u64 {
    let mut b = (key_range as f64).powf(1.0 / dim as f64).ceil().max(1.0) as u64;
    while b > 1
        && (b - 1)
            .checked_pow(dim as u32)
            .is_some_and(|p| p >= key_range)
    {
        b -= 1;
    }
    while b.checked_pow(dim as u32).is_some_and(|p| p < key_range) {
        b += 1;
    }
    b
}

/// Dimension and base of an MDList.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub dim: usize,
    pub base: u64,
}

impl Shape {
    pub fn for_range(key_range: u64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if key_range < 2 {
            return Err(Error::KeyRangeTooSmall(key_range));
        }
        Ok(Self {
            dim,
            base: base_for(key_range, dim),
        })
    }

    pub fn coord(&self, key: u64) -> Result<Coordinate> {
        key_to_coord(key, self.dim, self.base)
    }
}

pub(crate) struct AdoptDesc {
    curr: *mut MdNode,
    dp: usize,
    dc: usize,
}

unsafe impl Send for AdoptDesc {}
unsafe impl Sync for AdoptDesc {}

impl Drop for AdoptDesc {
    fn drop(&mut self) {
        live::free(Class::AdoptDesc);
    }
}

/// Left on a child link by a vertex deletion's sweep.
pub(crate) struct FreezeCell {
    pub(crate) child: *mut MdNode,
    pub(crate) by: Arc<TxDesc>,
    pub(crate) opid: usize,
}

unsafe impl Send for FreezeCell {}
unsafe impl Sync for FreezeCell {}

impl FreezeCell {
    fn boxed(child: *mut MdNode, by: Arc<TxDesc>, opid: usize) -> *mut MdNode {
        live::alloc(Class::FreezeCell);
        Box::into_raw(Box::new(FreezeCell { child, by, opid })) as *mut MdNode
    }
}

impl Drop for FreezeCell {
    fn drop(&mut self) {
        live::free(Class::FreezeCell);
    }
}

pub(crate) struct MdNode {
    pub(crate) key: u64,
    coord: Box<[u32]>,
    children: Box<[Link<MdNode>]>,
    pub(crate) info: Atomic<NodeInfo>,
    adesc: Atomic<AdoptDesc>,
}

impl MdNode {
    fn new(key: u64, coord: Coordinate, dim: usize, info: Option<NodeInfo>) -> Box<Self> {
        live::alloc(Class::EdgeNode);
        let info = match info {
            Some(i) => Atomic::new(i),
            None => Atomic::null(),
        };
        Box::new(Self {
            key,
            coord: coord.0,
            children: (0..dim).map(|_| Link::null()).collect(),
            info,
            adesc: Atomic::null(),
        })
    }
}

/// Resolve a child link to the node it designates, looking through cells.
fn node_of(val: LinkVal<MdNode>) -> *mut MdNode {
    if val.has(FROZEN) {
        unsafe { (*(val.ptr() as *mut FreezeCell)).child }
    } else {
        val.ptr()
    }
}

fn cell_of(val: LinkVal<MdNode>) -> Option<&'static FreezeCell> {
    // Lifetime is bounded by the caller's guard.
    val.has(FROZEN)
        .then(|| unsafe { &*(val.ptr() as *const FreezeCell) })
}

#[derive(Clone, Copy)]
pub(crate) struct Located {
    pred: *mut MdNode,
    pub(crate) curr: *mut MdNode,
    dp: usize,
    dc: usize,
    pub(crate) steps: usize,
}

/// Outcome of a splice attempt.
pub(crate) enum Splice {
    Inserted(*mut MdNode),
    /// A node for the key is already linked; the new node is handed back.
    Exists(Box<MdNode>),
    /// The splice point is frozen by a vertex deletion.
    Frozen {
        pred: *mut MdNode,
        dp: usize,
        seen: LinkVal<MdNode>,
        node: Box<MdNode>,
    },
    /// The gate refused the splice (owning transaction no longer active).
    Refused(Box<MdNode>),
}

pub struct MdList {
    shape: Shape,
    head: *mut MdNode,
}

unsafe impl Send for MdList {}
unsafe impl Sync for MdList {}

/// Result of a search, exposed for instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchTrace {
    pub found: bool,
    pub steps: usize,
}

impl MdList {
    /// Empty list; the head sentinel holds the all-zero
    /// coordinate, i.e. key 0, which is outside the user key range.
    pub fn new(shape: Shape) -> Self {
        let head = MdNode::new(
            0,
            Coordinate(vec![0; shape.dim].into_boxed_slice()),
            shape.dim,
            None,
        );
        Self {
            shape,
            head: Box::into_raw(head),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub(crate) fn head(&self) -> &MdNode {
        unsafe { &*self.head }
    }

    pub(crate) fn new_node(&self, key: u64, info: NodeInfo) -> Box<MdNode> {
        let coord = self.shape.coord(key).expect("edge key validated by caller");
        MdNode::new(key, coord, self.shape.dim, Some(info))
    }

    pub(crate) fn locate(&self, coord: &[u32], guard: &Guard) -> Located {
        let dim = self.shape.dim;
        let mut pred: *mut MdNode = std::ptr::null_mut();
        let mut curr = self.head;
        let (mut dp, mut dc, mut steps) = (0usize, 0usize, 0usize);
        'dims: while dc < dim {
            loop {
                let Some(c) = (unsafe { curr.as_ref() }) else {
                    break 'dims;
                };
                if coord[dc] <= c.coord[dc] {
                    break;
                }
                pred = curr;
                dp = dc;
                let ad = c.adesc.load(Ordering::Acquire, guard);
                if let Some(a) = unsafe { ad.as_ref() } {
                    if a.dp <= dp && dp <= a.dc {
                        finish_inserting(c, ad, guard);
                    }
                }
                curr = node_of(c.children[dc].load());
                steps += 1;
            }
            let c = unsafe { &*curr };
            if coord[dc] < c.coord[dc] {
                break;
            }
            dc += 1;
        }
        Located {
            pred,
            curr,
            dp,
            dc,
            steps,
        }
    }

    /// Physical node for `key`, if linked.
    pub(crate) fn find_node<'g>(&self, key: u64, _guard: &'g Guard) -> Option<&'g MdNode> {
        let coord = self.shape.coord(key).ok()?;
        let loc = self.locate(coord.digits(), _guard);
        (loc.dc == self.shape.dim).then(|| unsafe { &*loc.curr })
    }

    pub fn trace_search(&self, key: u64) -> Result<SearchTrace> {
        let coord = self.shape.coord(key)?;
        let guard = reclamation::pin();
        let loc = self.locate(coord.digits(), &guard);
        Ok(SearchTrace {
            found: loc.dc == self.shape.dim,
            steps: loc.steps,
        })
    }

    /// Splice `node` at its coordinate position; adopts displaced children.
    pub(crate) fn do_insert(
        &self,
        mut node: Box<MdNode>,
        gate: impl Fn() -> bool,
        guard: &Guard,
    ) -> Splice {
        let dim = self.shape.dim;
        loop {
            let loc = self.locate(&node.coord, guard);
            if loc.dc == dim {
                return Splice::Exists(node);
            }
            let pred = unsafe { &*loc.pred };
            if let Some(c) = unsafe { loc.curr.as_ref() } {
                let ad = c.adesc.load(Ordering::Acquire, guard);
                if !ad.is_null() && loc.dp != loc.dc {
                    finish_inserting(c, ad, guard);
                }
            }
            let link = &pred.children[loc.dp];
            let seen = link.load();
            if seen.has(FROZEN) {
                return Splice::Frozen {
                    pred: loc.pred,
                    dp: loc.dp,
                    seen,
                    node,
                };
            }
            if seen.has(ADOPTED) || seen.ptr() != loc.curr {
                continue;
            }
            if !gate() {
                return Splice::Refused(node);
            }

            for (i, child) in node.children.iter().enumerate() {
                if i < loc.dp {
                    child.store_unpublished(std::ptr::null_mut(), ADOPTED);
                } else {
                    child.store_unpublished(std::ptr::null_mut(), 0);
                }
            }
            if loc.dc < dim {
                node.children[loc.dc].store_unpublished(loc.curr, 0);
            }
            let adopt = if !loc.curr.is_null() && loc.dp != loc.dc {
                live::alloc(Class::AdoptDesc);
                Owned::new(AdoptDesc {
                    curr: loc.curr,
                    dp: loc.dp,
                    dc: loc.dc,
                })
                .into_shared(guard)
            } else {
                Shared::null()
            };
            node.adesc.store(adopt, Ordering::Relaxed);

            crate::chaos::point();
            let raw = Box::into_raw(node);
            match link.cas(seen, raw, 0) {
                Ok(()) => {
                    let n = unsafe { &*raw };
                    if !adopt.is_null() {
                        finish_inserting(n, adopt, guard);
                    }
                    return Splice::Inserted(raw);
                }
                Err(_) => {
                    node = unsafe { Box::from_raw(raw) };
                    node.adesc.store(Shared::null(), Ordering::Relaxed);
                    if !adopt.is_null() {
                        drop(unsafe { adopt.into_owned() });
                    }
                }
            }
        }
    }

    /// Insert a key with no transactional annotation. Returns false if the
    /// key is already linked.
    pub fn insert_plain(&self, key: u64) -> Result<bool> {
        let coord = self.shape.coord(key)?;
        if key == 0 {
            return Err(Error::KeyOutOfRange {
                key,
                low: 1,
                high: self.shape.base.pow(self.shape.dim as u32),
            });
        }
        let guard = reclamation::pin();
        let node = MdNode::new(key, coord, self.shape.dim, None);
        Ok(match self.do_insert(node, || true, &guard) {
            Splice::Inserted(_) => true,
            Splice::Exists(n) | Splice::Refused(n) | Splice::Frozen { node: n, .. } => {
                drop_unpublished(n);
                false
            }
        })
    }

    /// Linked keys in ascending order (head excluded).
    pub fn keys(&self) -> Vec<u64> {
        let guard = reclamation::pin();
        let mut out = Vec::new();
        self.visit(&guard, |n| out.push(n.key));
        out
    }

    /// Pre-order walk from the head, higher dimensions first, which yields
    /// nodes in key order. The head itself is skipped.
    pub(crate) fn visit<'g>(&self, _guard: &'g Guard, mut f: impl FnMut(&'g MdNode)) {
        let mut stack: Vec<(*mut MdNode, usize)> = vec![(self.head, 0)];
        while let Some((n, dim)) = stack.pop() {
            let node = unsafe { &*n };
            if n != self.head {
                f(node);
            }
            for i in dim..self.shape.dim {
                let v = node.children[i].load();
                if v.has(ADOPTED) {
                    continue;
                }
                let c = node_of(v);
                if !c.is_null() {
                    stack.push((c, i));
                }
            }
        }
    }

    /// Check the ordering invariants at quiescence: every child at dimension
    /// `d` shares the first `d` digits with its parent and has a larger
    /// `d`-th digit, and no node has links below its own dimension.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        let dim = self.shape.dim;
        let mut stack: Vec<(*mut MdNode, usize)> = vec![(self.head, 0)];
        let mut seen = std::collections::HashSet::new();
        while let Some((n, own_dim)) = stack.pop() {
            let node = unsafe { &*n };
            if !seen.insert(node.key) {
                return Err(format!("key {} reachable twice", node.key));
            }
            if !node
                .adesc
                .load(Ordering::Acquire, unsafe { crossbeam_epoch::unprotected() })
                .is_null()
            {
                return Err(format!("node {} has a pending adoption", node.key));
            }
            for i in 0..dim {
                let v = node.children[i].load();
                let c = node_of(v);
                if i < own_dim {
                    if !v.has(ADOPTED) && !c.is_null() {
                        return Err(format!("node {} has a child below its dimension", node.key));
                    }
                    continue;
                }
                if v.has(ADOPTED) || c.is_null() {
                    continue;
                }
                let child = unsafe { &*c };
                if child.coord[..i] != node.coord[..i] || child.coord[i] <= node.coord[i] {
                    return Err(format!(
                        "child {} misplaced under {} at dimension {}",
                        child.key, node.key, i
                    ));
                }
                stack.push((c, i));
            }
        }
        Ok(())
    }

    /// Acquire every node of the sublist for a vertex deletion and freeze
    /// every child link so that in-flight edge splices re-traverse.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn finish_delete(
        &self,
        graph: &AdjacencyList,
        vertex: &VertexNode,
        n: &MdNode,
        dc: usize,
        desc: &Arc<TxDesc>,
        opid: usize,
        guard: &Guard,
    ) -> bool {
        loop {
            match update_info(
                graph,
                NodeRef::Edge { vertex, node: n },
                desc,
                opid,
                Want::Any,
                guard,
            ) {
                UpdateResult::Success => break,
                UpdateResult::Fail => return false,
                UpdateResult::Retry => continue,
            }
        }
        let ad = n.adesc.load(Ordering::Acquire, guard);
        if !ad.is_null() {
            finish_inserting(n, ad, guard);
        }
        for i in dc..self.shape.dim {
            let child = loop {
                if !desc.is_active() {
                    return false;
                }
                crate::chaos::point();
                let v = n.children[i].load();
                if v.has(ADOPTED) {
                    break std::ptr::null_mut();
                }
                if let Some(cell) = cell_of(v) {
                    if Arc::ptr_eq(&cell.by, desc) {
                        break cell.child;
                    }
                    let replacement = FreezeCell::boxed(cell.child, desc.clone(), opid);
                    match n.children[i].cas(v, replacement, FROZEN) {
                        Ok(()) => {
                            unsafe { reclamation::retire(guard, v.ptr() as *mut FreezeCell) };
                            break cell.child;
                        }
                        Err(_) => drop(unsafe { Box::from_raw(replacement as *mut FreezeCell) }),
                    }
                } else {
                    let cell = FreezeCell::boxed(v.ptr(), desc.clone(), opid);
                    match n.children[i].cas(v, cell, FROZEN) {
                        Ok(()) => break v.ptr(),
                        Err(_) => drop(unsafe { Box::from_raw(cell as *mut FreezeCell) }),
                    }
                }
            };
            if let Some(c) = unsafe { child.as_ref() } {
                if !self.finish_delete(graph, vertex, c, i, desc, opid, guard) {
                    return false;
                }
            }
        }
        true
    }

    /// Clear a freeze cell known to be stale.
    pub(crate) fn thaw(&self, pred: *mut MdNode, dp: usize, seen: LinkVal<MdNode>, guard: &Guard) {
        let pred = unsafe { &*pred };
        let child = node_of(seen);
        if pred.children[dp].cas(seen, child, 0).is_ok() {
            unsafe { reclamation::retire(guard, seen.ptr() as *mut FreezeCell) };
        }
    }

    pub(crate) fn cell_owner(seen: LinkVal<MdNode>) -> Option<(&'static Arc<TxDesc>, usize)> {
        cell_of(seen).map(|c| (&c.by, c.opid))
    }

    #[cfg(test)]
    /// Whether every child link reachable from the head is frozen and every
    /// reachable node's info belongs to `desc`. Quiescent use only.
    pub(crate) fn fully_swept_by(&self, desc: &TxDesc) -> bool {
        let guard = reclamation::pin();
        let mut ok = true;
        let mut stack: Vec<(*mut MdNode, usize)> = vec![(self.head, 0)];
        while let Some((n, dim)) = stack.pop() {
            let node = unsafe { &*n };
            let info = node.info.load(Ordering::Acquire, &guard);
            match unsafe { info.as_ref() } {
                Some(i)
                    if info.tag() & crate::lftt::INFO_MARK == 0 && std::ptr::eq(i.desc(), desc) => {
                }
                _ => ok = false,
            }
            for i in dim..self.shape.dim {
                let v = node.children[i].load();
                if v.has(ADOPTED) {
                    continue;
                }
                match cell_of(v) {
                    Some(c) if std::ptr::eq(&*c.by, desc) => {}
                    _ => ok = false,
                }
                let c = node_of(v);
                if !c.is_null() {
                    stack.push((c, i));
                }
            }
        }
        ok
    }
}

/// Move `curr`'s children in dimensions `[dp, dc)` under `n`.
fn finish_inserting(n: &MdNode, ad: Shared<'_, AdoptDesc>, guard: &Guard) {
    let a = unsafe { ad.deref() };
    let curr = unsafe { &*a.curr };
    for i in a.dp..a.dc {
        let old = curr.children[i].fetch_or(ADOPTED);
        let child = node_of(old);
        if child.is_null() {
            continue;
        }
        let slot = n.children[i].load();
        if slot.is_null() && slot.tag() == 0 {
            let _ = n.children[i].cas(slot, child, 0);
        }
    }
    if n.adesc
        .compare_exchange(
            ad,
            Shared::null(),
            Ordering::AcqRel,
            Ordering::Acquire,
            guard,
        )
        .is_ok()
    {
        unsafe { reclamation::retire(guard, ad.as_raw() as *mut AdoptDesc) };
    }
}

/// Free a node that was never linked.
pub(crate) fn drop_unpublished(node: Box<MdNode>) {
    let guard = unsafe { crossbeam_epoch::unprotected() };
    let info = node.info.load(Ordering::Relaxed, guard);
    if !info.is_null() {
        drop(unsafe { Box::from_raw(info.with_tag(0).as_raw() as *mut NodeInfo) });
    }
    live::free(Class::EdgeNode);
    // Children of an unpublished node are never owned by it.
    drop(node);
}

impl Drop for MdList {
    fn drop(&mut self) {
        let guard = unsafe { crossbeam_epoch::unprotected() };
        let mut stack: Vec<(*mut MdNode, usize)> = vec![(self.head, 0)];
        while let Some((n, dim)) = stack.pop() {
            let node = unsafe { Box::from_raw(n) };
            for i in 0..self.shape.dim {
                let v = node.children[i].load();
                let c = node_of(v);
                if v.has(FROZEN) {
                    drop(unsafe { Box::from_raw(v.ptr() as *mut FreezeCell) });
                }
                if i >= dim && !v.has(ADOPTED) && !c.is_null() {
                    stack.push((c, i));
                }
            }
            let info = node.info.load(Ordering::Relaxed, guard);
            if !info.is_null() {
                drop(unsafe { Box::from_raw(info.with_tag(0).as_raw() as *mut NodeInfo) });
            }
            let ad = node.adesc.load(Ordering::Relaxed, guard);
            if !ad.is_null() {
                drop(unsafe { ad.into_owned() });
            }
            live::free(Class::EdgeNode);
        }
    }
}
