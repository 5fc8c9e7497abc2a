//! Sequential reference graph and history checkers.

use std::collections::{BTreeMap, HashMap};

use crate::history::{GraphState, History, HistoryEvent, NodeKey};
use crate::lftt::{Operation, TxStatus};

/// Single-threaded graph with the same all-or-nothing semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeqGraph {
    state: GraphState,
}

impl SeqGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_state(state: GraphState) -> Self {
        Self { state }
    }

    pub fn state(&self) -> &GraphState {
        &self.state
    }

    pub fn into_state(self) -> GraphState {
        self.state
    }

    fn apply_op(&mut self, op: &Operation) -> bool {
        match *op {
            Operation::InsertVertex(v) => {
                if self.state.contains_key(&v) {
                    return false;
                }
                self.state.insert(v, Default::default());
                true
            }
            Operation::DeleteVertex(v) => self.state.remove(&v).is_some(),
            Operation::InsertEdge(v, e) => self.state.get_mut(&v).is_some_and(|s| s.insert(e)),
            Operation::DeleteEdge(v, e) => self.state.get_mut(&v).is_some_and(|s| s.remove(&e)),
            Operation::Find(v, None) => self.state.contains_key(&v),
            Operation::Find(v, Some(e)) => self.state.get(&v).is_some_and(|s| s.contains(&e)),
        }
    }

    /// Apply `ops` atomically; on the first failure nothing is applied.
    pub fn apply(&mut self, ops: &[Operation]) -> bool {
        let mut next = self.clone();
        if ops.iter().all(|op| next.apply_op(op)) {
            *self = next;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub check: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.check, self.detail)
    }
}

fn violation(check: &'static str, detail: String) -> Violation {
    Violation { check, detail }
}

#[derive(Default)]
struct TxView {
    ops: Option<Vec<Operation>>,
    invoke: Option<u64>,
    status: Option<(TxStatus, u64)>,
    respond: Option<(TxStatus, u64)>,
}

fn transactions(h: &History) -> BTreeMap<u64, TxView> {
    let mut m: BTreeMap<u64, TxView> = BTreeMap::new();
    for e in &h.events {
        let t = m.entry(e.ticket()).or_default();
        match e {
            HistoryEvent::Invoke { ts, ops, .. } => {
                t.ops = Some(ops.clone());
                t.invoke = Some(*ts);
            }
            HistoryEvent::Status { outcome, ts, .. } => t.status = Some((*outcome, *ts)),
            HistoryEvent::Respond { outcome, ts, .. } => t.respond = Some((*outcome, *ts)),
            _ => {}
        }
    }
    m
}

/// Replay committed transactions in commit-timestamp order from `initial`.
/// Every replayed transaction must succeed, commit points must fall inside
/// each transaction's invocation interval, and the result must match the
/// recorded final state when there is one.
pub fn check_strict_serializability(
    h: &History,
    initial: &GraphState,
) -> Result<SeqGraph, Violation> {
    const C: &str = "strict-serializability";
    let txs = transactions(h);
    let mut committed = Vec::new();
    for (ticket, t) in &txs {
        let ops = t
            .ops
            .as_ref()
            .ok_or_else(|| violation(C, format!("ticket {ticket} never invoked")))?;
        let Some((outcome, ts)) = t.status else {
            if t.respond.is_some() {
                return Err(violation(
                    C,
                    format!("ticket {ticket} responded without a status"),
                ));
            }
            continue;
        };
        if let Some((r, rts)) = t.respond {
            if r != outcome {
                return Err(violation(
                    C,
                    format!("ticket {ticket} responded {r:?} but ended {outcome:?}"),
                ));
            }
            if ts > rts {
                return Err(violation(
                    C,
                    format!("ticket {ticket} ended at {ts} after responding at {rts}"),
                ));
            }
        }
        if t.invoke.is_some_and(|i| ts < i) {
            return Err(violation(
                C,
                format!("ticket {ticket} ended before it was invoked"),
            ));
        }
        if outcome == TxStatus::Committed {
            committed.push((ts, *ticket, ops));
        }
    }
    committed.sort_by_key(|&(ts, ticket, _)| (ts, ticket));
    let mut g = SeqGraph::from_state(initial.clone());
    for (ts, ticket, ops) in committed {
        if !g.apply(ops) {
            return Err(violation(
                C,
                format!("ticket {ticket} committed at {ts} cannot apply in commit order: {ops:?}"),
            ));
        }
    }
    if let Some(fin) = &h.final_state {
        if fin != g.state() {
            return Err(violation(
                C,
                format!("final state {fin:?} differs from replay {:?}", g.state()),
            ));
        }
    }
    Ok(g)
}

struct AcquireRec {
    ticket: u64,
    node: NodeKey,
    seq: u64,
    ts: u64,
}

fn acquires(h: &History) -> HashMap<(NodeKey, u64), Vec<AcquireRec>> {
    let mut m: HashMap<(NodeKey, u64), Vec<AcquireRec>> = HashMap::new();
    for e in &h.events {
        if let HistoryEvent::Acquire {
            ticket,
            node,
            incarnation,
            seq,
            ts,
            ..
        } = *e
        {
            m.entry((node, incarnation)).or_default().push(AcquireRec {
                ticket,
                node,
                seq,
                ts,
            });
        }
    }
    for v in m.values_mut() {
        v.sort_by_key(|a| a.seq);
    }
    m
}

/// A node passes from one transaction to another only after the first has
/// reached a terminal state.
pub fn check_commutativity_isolation(h: &History) -> Result<(), Violation> {
    const C: &str = "commutativity-isolation";
    let txs = transactions(h);
    for list in acquires(h).values() {
        for w in list.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.seq == b.seq {
                return Err(violation(
                    C,
                    format!("{:?} acquired twice at sequence {}", a.node, a.seq),
                ));
            }
            if a.ticket == b.ticket {
                continue;
            }
            let end = txs.get(&a.ticket).and_then(|t| t.status).map(|(_, ts)| ts);
            match end {
                Some(end) if end < b.ts => {}
                _ => {
                    return Err(violation(
                        C,
                        format!(
                            "{:?} taken by ticket {} at {} while ticket {} was unfinished",
                            a.node, b.ticket, b.ts, a.ticket
                        ),
                    ))
                }
            }
        }
    }
    Ok(())
}

/// Between the end of a committed vertex deletion's sweep and its commit, no
/// other transaction acquires any node of that vertex's sublist.
pub fn check_delete_exclusivity(h: &History) -> Result<(), Violation> {
    const C: &str = "delete-vertex-exclusivity";
    let txs = transactions(h);
    let mut windows: HashMap<(u64, u64), (u64, u64, u64)> = HashMap::new();
    for e in &h.events {
        if let HistoryEvent::SweepDone {
            ticket,
            vertex,
            incarnation,
            ts,
            ..
        } = *e
        {
            let Some((TxStatus::Committed, end)) = txs.get(&ticket).and_then(|t| t.status) else {
                continue;
            };
            let w = windows
                .entry((vertex, incarnation))
                .or_insert((ticket, ts, end));
            if w.0 == ticket {
                w.1 = w.1.min(ts);
            }
        }
    }
    for e in &h.events {
        if let HistoryEvent::Acquire {
            ticket,
            node,
            incarnation,
            ts,
            ..
        } = *e
        {
            if matches!(node, NodeKey::Vertex(_)) {
                continue;
            }
            if let Some(&(owner, start, end)) = windows.get(&(node.vertex(), incarnation)) {
                if ticket != owner && start < ts && ts < end {
                    return Err(violation(C, format!("ticket {ticket} acquired {node:?} at {ts} inside deletion window of ticket {owner}")));
                }
            }
        }
    }
    Ok(())
}

/// Run every checker.
pub fn check_history(h: &History, initial: &GraphState) -> Result<(), Violation> {
    check_strict_serializability(h, initial)?;
    check_commutativity_isolation(h)?;
    check_delete_exclusivity(h)
}

/// Search for a serial order of `txns` that applies each one successfully,
/// honours `before` (pairs `(i, j)` meaning `i` must precede `j`) and ends in
/// `expected`. Exhaustive; intended for a handful of transactions.
pub fn find_serial_order(
    initial: &GraphState,
    txns: &[Vec<Operation>],
    before: &[(usize, usize)],
    expected: &GraphState,
) -> Option<Vec<usize>> {
    fn go(
        g: &SeqGraph,
        txns: &[Vec<Operation>],
        before: &[(usize, usize)],
        expected: &GraphState,
        used: &mut Vec<bool>,
        order: &mut Vec<usize>,
    ) -> bool {
        if order.len() == txns.len() {
            return g.state() == expected;
        }
        for i in 0..txns.len() {
            if used[i] || before.iter().any(|&(a, b)| b == i && !used[a]) {
                continue;
            }
            let mut next = g.clone();
            if !next.apply(&txns[i]) {
                continue;
            }
            used[i] = true;
            order.push(i);
            if go(&next, txns, before, expected, used, order) {
                return true;
            }
            order.pop();
            used[i] = false;
        }
        false
    }
    let mut used = vec![false; txns.len()];
    let mut order = Vec::new();
    go(
        &SeqGraph::from_state(initial.clone()),
        txns,
        before,
        expected,
        &mut used,
        &mut order,
    )
    .then_some(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lftt::Operation::*;

    #[test]
    fn sequential_semantics() {
        let mut g = SeqGraph::new();
        assert!(g.apply(&[InsertVertex(1), InsertEdge(1, 2)]));
        assert!(!g.apply(&[InsertEdge(1, 3), InsertEdge(1, 2)]));
        assert_eq!(g.state()[&1].len(), 1);
        assert!(!g.apply(&[InsertEdge(4, 1)]));
        assert!(g.apply(&[Find(1, Some(2)), DeleteVertex(1)]));
        assert!(g.state().is_empty());
    }

    fn invoke(ticket: u64, ts: u64, ops: Vec<Operation>) -> HistoryEvent {
        HistoryEvent::Invoke { ticket, ts, ops }
    }

    fn status(ticket: u64, ts: u64) -> HistoryEvent {
        HistoryEvent::Status {
            ticket,
            outcome: TxStatus::Committed,
            ts,
        }
    }

    #[test]
    fn commit_order_replay_detects_bad_order() {
        let mut h = History {
            events: vec![
                invoke(1, 1, vec![InsertVertex(1)]),
                invoke(2, 2, vec![InsertEdge(1, 2)]),
                status(1, 3),
                status(2, 4),
            ],
            final_state: None,
        };
        assert!(check_strict_serializability(&h, &GraphState::new()).is_ok());
        h.events[2] = status(1, 5);
        assert!(check_strict_serializability(&h, &GraphState::new()).is_err());
    }

    #[test]
    fn handoff_before_end_is_flagged() {
        let acq = |ticket, seq, ts| HistoryEvent::Acquire {
            ticket,
            opid: 0,
            node: NodeKey::Vertex(1),
            incarnation: 1,
            seq,
            ts,
        };
        let mut h = History {
            events: vec![acq(1, 0, 1), status(1, 2), acq(2, 1, 3), status(2, 4)],
            final_state: None,
        };
        assert!(check_commutativity_isolation(&h).is_ok());
        h.events[1] = status(1, 5);
        assert!(check_commutativity_isolation(&h).is_err());
    }

    #[test]
    fn brute_force_respects_precedence() {
        let txns = vec![vec![InsertVertex(1)], vec![DeleteVertex(1)]];
        let empty = GraphState::new();
        assert_eq!(
            find_serial_order(&empty, &txns, &[], &empty),
            Some(vec![0, 1])
        );
        assert_eq!(find_serial_order(&empty, &txns, &[(1, 0)], &empty), None);
    }
}
