//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any gating criterion fails.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::process::Command;
use std::sync::{mpsc, Barrier};
use std::time::{Duration, Instant};
use txgraph::oracle::{
    check_commutativity_isolation, check_delete_exclusivity, check_strict_serializability,
    find_serial_order,
};
use txgraph::reclamation::{self, live, Class};
use txgraph::Operation::{self, *};
use txgraph::{
    chaos, emit_report, run_bench, run_recorded, AdjacencyList, BenchReport, Config, Format,
    GraphState, History, HistoryEvent, MdList, Mix, NodeKey, SeqGraph, Shape, SystemKind,
    TransactionRequest, TxStatus, WorkloadSpec,
};

const CHILD_ENV: &str = "TXGRAPH_ACCEPTANCE_CHILD";

struct Outcome {
    pass: bool,
    gating: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: true,
        gating: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: false,
        gating: true,
        detail: detail.into(),
    }
}

fn verdict(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn stress_spec(mix: Mix, seed: u64, txns: usize) -> WorkloadSpec {
    WorkloadSpec {
        mix,
        txn_size: 4,
        txns_per_thread: txns,
        key_range: 64,
        threads: vec![4],
        seed,
        ..Default::default()
    }
}

/// Serializability stress: `runs` recorded LFTT runs split across both
/// presets, each checked for strict serializability and commutativity
/// isolation.
fn stress_runs(runs: u64, txns: usize) -> Result<(u64, u64), String> {
    let (mut commits, mut aborts) = (0, 0);
    for i in 0..runs {
        let mix = if i % 2 == 0 {
            Mix::VERTEX_HEAVY
        } else {
            Mix::EDGE_HEAVY
        };
        let run = run_recorded(&stress_spec(mix, 1000 + i, txns), 4).map_err(|e| e.to_string())?;
        run.structure.map_err(|e| format!("run {i}: {e}"))?;
        check_strict_serializability(&run.history, &GraphState::new())
            .map_err(|v| format!("run {i}: {v}"))?;
        check_commutativity_isolation(&run.history).map_err(|v| format!("run {i}: {v}"))?;
        commits += run.commits;
        aborts += run.aborts;
    }
    Ok((commits, aborts))
}

fn criterion_1() -> Outcome {
    chaos::set_yield_rate(5);
    let t0 = Instant::now();
    let r = stress_runs(200, 2000);
    chaos::set_yield_rate(0);
    let wall = t0.elapsed();
    match r {
        Ok((c, a)) => verdict(
            wall < Duration::from_secs(300),
            format!(
                "200 runs, {c} commits, {a} aborts, {:.1}s",
                wall.as_secs_f64()
            ),
        ),
        Err(e) => fail(e),
    }
}

fn random_op(rng: &mut impl Rng, n: u64) -> Operation {
    let v = rng.gen_range(1..n);
    let e = rng.gen_range(1..n);
    match rng.gen_range(0..6) {
        0 => InsertVertex(v),
        1 => DeleteVertex(v),
        2 => InsertEdge(v, e),
        3 => DeleteEdge(v, e),
        4 => Find(v, None),
        _ => Find(v, Some(e)),
    }
}

fn random_txn(rng: &mut impl Rng, n: u64, max_ops: usize) -> Vec<Operation> {
    let len = rng.gen_range(1..=max_ops);
    (0..len).map(|_| random_op(rng, n)).collect()
}

fn criterion_2() -> Outcome {
    let g = AdjacencyList::new(Config::new(16, 2)).unwrap();
    let mut oracle = SeqGraph::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut commits = 0;
    for i in 0..10_000 {
        let ops = random_txn(&mut rng, 16, 4);
        let want = oracle.apply(&ops);
        let got = g.execute_ops(ops.clone()).unwrap();
        if got.results != vec![want; ops.len()] || got.committed() != want {
            return fail(format!(
                "txn {i} {ops:?}: got {:?}, oracle {want}",
                got.results
            ));
        }
        if g.snapshot() != *oracle.state() {
            return fail(format!("txn {i}: state diverged"));
        }
        commits += want as u32;
    }
    pass(format!(
        "10000 txns, {commits} committed, results and state identical"
    ))
}

fn forced_abort_check(h: &History, failing: Operation) -> Result<usize, String> {
    check_strict_serializability(h, &GraphState::new()).map_err(|v| v.to_string())?;
    let mut injected = BTreeMap::new();
    for e in &h.events {
        match e {
            HistoryEvent::Invoke { ticket, ops, .. } if ops.last() == Some(&failing) => {
                injected.insert(*ticket, None);
            }
            HistoryEvent::Status {
                ticket, outcome, ..
            } => {
                if let Some(s) = injected.get_mut(ticket) {
                    *s = Some(*outcome);
                }
            }
            _ => {}
        }
    }
    if let Some((t, s)) = injected
        .iter()
        .find(|(_, s)| **s != Some(TxStatus::Aborted))
    {
        return Err(format!("injected ticket {t} ended {s:?}"));
    }
    Ok(injected.len())
}

fn criterion_3() -> Outcome {
    chaos::set_yield_rate(5);
    let mut injected = 0;
    let mut runs = 0;
    let mut err = None;
    'outer: for mix in [Mix::VERTEX_HEAVY, Mix::EDGE_HEAVY] {
        for seed in 0..10 {
            let spec = WorkloadSpec {
                forced_abort_percent: 50,
                ..stress_spec(mix, 300 + seed, 2000)
            };
            let run = match run_recorded(&spec, 4) {
                Ok(r) => r,
                Err(e) => {
                    err = Some(e.to_string());
                    break 'outer;
                }
            };
            match forced_abort_check(&run.history, spec.failing_op()) {
                Ok(n) => injected += n,
                Err(e) => {
                    err = Some(format!("{mix:?} seed {seed}: {e}"));
                    break 'outer;
                }
            }
            runs += 1;
        }
    }
    chaos::set_yield_rate(0);
    if let Some(e) = err {
        return fail(e);
    }
    // Single-threaded: the structure against the committed-only oracle.
    let spec = WorkloadSpec {
        forced_abort_percent: 50,
        threads: vec![1],
        ..stress_spec(Mix::EDGE_HEAVY, 7, 5000)
    };
    let g = AdjacencyList::new(spec.config()).unwrap();
    let mut oracle = SeqGraph::new();
    for req in spec
        .warmup_requests()
        .iter()
        .chain(spec.stream(0).collect::<Vec<_>>().iter())
    {
        oracle.apply(req.ops());
        g.execute(req).unwrap();
    }
    verdict(
        g.snapshot() == *oracle.state(),
        format!("{runs} concurrent runs, {injected} injected aborts, final state equals committed-only replay"),
    )
}

/// One DeleteVertex(1) racing eight threads inserting edges into vertex 1.
/// Returns the number of times the delete had to be retried.
fn delete_race(iter: u64) -> Result<u32, String> {
    let g = AdjacencyList::new(Config::new(64, 3).recording()).unwrap();
    g.execute_ops(vec![InsertVertex(1), InsertEdge(1, 2), InsertEdge(1, 3)])
        .unwrap();
    let start = Barrier::new(9);
    let retries = std::thread::scope(|s| {
        let d = s.spawn(|| {
            start.wait();
            let mut retries = 0;
            while !g.delete_vertex(1).unwrap() {
                retries += 1;
            }
            retries
        });
        for t in 0..8u64 {
            let (g, start) = (&g, &start);
            s.spawn(move || {
                start.wait();
                for k in 0..3 {
                    let _ = g.insert_edge(1, 10 + t * 3 + k).unwrap();
                }
            });
        }
        d.join().unwrap()
    });
    for e in 1..64 {
        if g.find_edge(1, e).unwrap() {
            return Err(format!(
                "iteration {iter}: edge (1, {e}) visible after delete"
            ));
        }
    }
    let h = History {
        events: g.recorder().unwrap().take(),
        final_state: Some(g.snapshot()),
    };
    check_strict_serializability(&h, &GraphState::new())
        .map_err(|v| format!("iteration {iter}: {v}"))?;
    check_commutativity_isolation(&h).map_err(|v| format!("iteration {iter}: {v}"))?;
    check_delete_exclusivity(&h).map_err(|v| format!("iteration {iter}: {v}"))?;
    let mut outcome = BTreeMap::new();
    let mut inserts = BTreeMap::new();
    for e in &h.events {
        match e {
            HistoryEvent::Status {
                ticket, outcome: o, ..
            } => {
                outcome.insert(*ticket, *o);
            }
            HistoryEvent::Invoke { ticket, ops, .. } => {
                inserts.insert(*ticket, matches!(ops[..], [InsertEdge(..)]));
            }
            _ => {}
        }
    }
    let committed = |t: &u64| outcome.get(t) == Some(&TxStatus::Committed);
    let sweep = h.events.iter().find_map(|e| match *e {
        HistoryEvent::SweepDone {
            ticket,
            incarnation,
            ts,
            ..
        } if committed(&ticket) => Some((incarnation, ts)),
        _ => None,
    });
    let (inc, done) = sweep.ok_or_else(|| format!("iteration {iter}: no committed sweep"))?;
    for e in &h.events {
        if let HistoryEvent::Acquire {
            ticket,
            node: NodeKey::Edge(1, _),
            incarnation,
            ts,
            ..
        } = *e
        {
            if incarnation == inc && ts > done && inserts[&ticket] && committed(&ticket) {
                return Err(format!("iteration {iter}: committed insert {ticket} acquired an edge at {ts} after sweep end {done}"));
            }
        }
    }
    Ok(retries)
}

fn criterion_4() -> Outcome {
    chaos::set_yield_rate(50);
    let mut retries = 0;
    let mut err = None;
    for i in 0..1000 {
        match delete_race(i) {
            Ok(r) => retries += r,
            Err(e) => {
                err = Some(e);
                break;
            }
        }
    }
    chaos::set_yield_rate(0);
    match err {
        Some(e) => fail(e),
        None => pass(format!(
            "1000 iterations, 0 violations, {retries} delete retries after cycle aborts"
        )),
    }
}

fn criterion_5() -> Outcome {
    let shape = Shape::for_range(500, 3).unwrap();
    let list = MdList::new(shape);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..250 {
        list.insert_plain(rng.gen_range(1..500)).unwrap();
    }
    let bound = shape.dim * shape.base as usize;
    let mut worst = 0;
    for _ in 0..100_000 {
        let t = list.trace_search(rng.gen_range(1..500)).unwrap();
        worst = worst.max(t.steps);
    }
    verdict(
        shape.base == 8 && worst <= bound,
        format!(
            "D={} b={}, max {worst} link steps over 100000 searches, bound {bound}",
            shape.dim, shape.base
        ),
    )
}

fn criterion_6() -> Outcome {
    let g: &'static AdjacencyList =
        Box::leak(Box::new(AdjacencyList::new(Config::new(8, 2)).unwrap()));
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let req = TransactionRequest::new(vec![InsertVertex(3), InsertEdge(3, 5), InsertVertex(6)])
            .unwrap();
        let mut t = g.begin(&req).unwrap();
        t.step();
        tx.send(t.descriptor()).unwrap();
        // The owner never comes back.
        loop {
            std::thread::park();
        }
    });
    let stalled = rx.recv().unwrap();
    if !stalled.is_active() {
        return fail("descriptor not active after the first step");
    }
    let spec = WorkloadSpec {
        mix: Mix([20, 20, 20, 20, 20]),
        txn_size: 2,
        txns_per_thread: 1000,
        key_range: 8,
        dim: 2,
        warmup: false,
        ..Default::default()
    };
    let (done_tx, done_rx) = mpsc::channel();
    for tid in 0..4 {
        let (spec, done_tx) = (spec.clone(), done_tx.clone());
        std::thread::spawn(move || {
            let reqs: Vec<_> = spec.stream(tid).collect();
            for req in &reqs {
                g.execute(req).unwrap();
            }
            done_tx.send(reqs.len()).unwrap();
        });
    }
    let deadline = Instant::now() + Duration::from_secs(30);
    let mut finished = 0;
    while finished < 4 {
        match done_rx.recv_timeout(deadline.saturating_duration_since(Instant::now())) {
            Ok(1000) => finished += 1,
            _ => return fail(format!("{finished} of 4 helpers finished within 30s")),
        }
    }
    verdict(
        !stalled.is_active() && g.check_structure().is_ok(),
        format!(
            "4 helpers x 1000 txns done, stalled descriptor ended {:?}",
            stalled.status()
        ),
    )
}

fn criterion_7() -> Outcome {
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let max = hw.max(8);
    let mut sweep = vec![1, 2, 4, 8];
    if max > 8 {
        sweep.push(max);
    }
    let mut rows = Vec::new();
    for system in [SystemKind::Lftt, SystemKind::Boost] {
        let spec = WorkloadSpec {
            mix: Mix::VERTEX_HEAVY,
            threads: sweep.clone(),
            system,
            ..Default::default()
        };
        match run_bench(&spec) {
            Ok(r) => rows.extend(r.rows),
            Err(e) => return fail(e.to_string()),
        }
    }
    let mut csv = Vec::new();
    emit_report(&BenchReport { rows: rows.clone() }, Format::Csv, &mut csv).unwrap();
    print!("{}", String::from_utf8(csv).unwrap());
    let tput = |system, threads| {
        rows.iter()
            .find(|r| r.system == system && r.threads == threads)
            .map_or(0.0, |r| r.ops_per_sec)
    };
    let (lftt_max, boost_max, lftt_one) = (
        tput(SystemKind::Lftt, max),
        tput(SystemKind::Boost, max),
        tput(SystemKind::Lftt, 1),
    );
    let ratio = lftt_max / boost_max.max(1e-9);
    let ok = ratio >= 1.1 && lftt_max >= lftt_one;
    let detail = format!(
        "vertex-heavy at {max} threads on {hw} hardware threads: lftt/boost {ratio:.2}x, lftt {max}t/1t {:.2}x",
        lftt_max / lftt_one.max(1e-9)
    );
    Outcome {
        pass: ok,
        gating: hw >= 8,
        detail,
    }
}

/// Every way to interleave `lens[i]` actions of each transaction `i`.
fn interleavings(lens: &[usize]) -> Vec<Vec<usize>> {
    fn go(left: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.iter().all(|&l| l == 0) {
            out.push(cur.clone());
            return;
        }
        for i in 0..left.len() {
            if left[i] > 0 {
                left[i] -= 1;
                cur.push(i);
                go(left, cur, out);
                cur.pop();
                left[i] += 1;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut lens.to_vec(), &mut Vec::new(), &mut out);
    out
}

fn count_interleavings(lens: &[usize]) -> u64 {
    let fact = |n: usize| (1..=n as u64).product::<u64>();
    fact(lens.iter().sum()) / lens.iter().map(|&l| fact(l)).product::<u64>()
}

/// Drive the transactions on one thread in `order`. Each transaction's
/// actions are begin, one step per operation, then finish.
fn run_schedule(setup: &[Vec<Operation>], txns: &[Vec<Operation>], order: &[usize]) -> History {
    let g = AdjacencyList::new(Config::new(4, 2).recording()).unwrap();
    for ops in setup {
        g.execute_ops(ops.clone()).unwrap();
    }
    let reqs: Vec<_> = txns
        .iter()
        .map(|ops| TransactionRequest::new(ops.clone()).unwrap())
        .collect();
    let mut pending: Vec<_> = reqs.iter().map(|_| None).collect();
    let mut stage = vec![0; txns.len()];
    for &i in order {
        match stage[i] {
            0 => pending[i] = Some(g.begin(&reqs[i]).unwrap()),
            s if s <= txns[i].len() => {
                pending[i].as_mut().unwrap().step();
            }
            _ => {
                pending[i].take().unwrap().finish();
            }
        }
        stage[i] += 1;
    }
    History {
        events: g.recorder().unwrap().take(),
        final_state: Some(g.snapshot()),
    }
}

/// Brute force: some order of the committed transactions that respects
/// real-time precedence reproduces the final state.
fn brute_force_verdict(h: &History) -> bool {
    let mut txs: BTreeMap<u64, (Vec<Operation>, u64, u64, bool)> = BTreeMap::new();
    for e in &h.events {
        match e {
            HistoryEvent::Invoke { ticket, ts, ops } => {
                txs.insert(*ticket, (ops.clone(), *ts, u64::MAX, false));
            }
            HistoryEvent::Status {
                ticket, outcome, ..
            } => {
                txs.get_mut(ticket).unwrap().3 = *outcome == TxStatus::Committed;
            }
            HistoryEvent::Respond { ticket, ts, .. } => txs.get_mut(ticket).unwrap().2 = *ts,
            _ => {}
        }
    }
    let committed: Vec<_> = txs.values().filter(|t| t.3).collect();
    let mut before = Vec::new();
    for (i, a) in committed.iter().enumerate() {
        for (j, b) in committed.iter().enumerate() {
            if a.2 < b.1 {
                before.push((i, j));
            }
        }
    }
    let ops: Vec<_> = committed.iter().map(|t| t.0.clone()).collect();
    find_serial_order(
        &GraphState::new(),
        &ops,
        &before,
        h.final_state.as_ref().unwrap(),
    )
    .is_some()
}

fn replay_verdict(h: &History) -> bool {
    check_strict_serializability(h, &GraphState::new()).is_ok()
}

/// Histories that differ from `h` in one outcome or in the final state.
fn mutants(h: &History) -> Vec<History> {
    let mut out = Vec::new();
    for e in &h.events {
        let HistoryEvent::Status {
            ticket, outcome, ..
        } = *e
        else {
            continue;
        };
        let flip = if outcome == TxStatus::Committed {
            TxStatus::Aborted
        } else {
            TxStatus::Committed
        };
        let mut m = h.clone();
        for e in &mut m.events {
            match e {
                HistoryEvent::Status {
                    ticket: t, outcome, ..
                }
                | HistoryEvent::Respond {
                    ticket: t, outcome, ..
                } if *t == ticket => *outcome = flip,
                _ => {}
            }
        }
        out.push(m);
    }
    for v in 1..4 {
        let mut m = h.clone();
        let fin = m.final_state.as_mut().unwrap();
        if fin.remove(&v).is_none() {
            fin.insert(v, Default::default());
        }
        out.push(m);
    }
    out
}

fn criterion_8() -> Outcome {
    const SAMPLE: u64 = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut histories, mut accepted, mut disagree) = (0u64, 0u64, Vec::new());
    let (mut mutant_count, mut mutant_rejected, mut unsound) = (0u64, 0u64, 0u64);
    for set in 0..400 {
        let setup: Vec<_> = (0..rng.gen_range(0..=2))
            .map(|_| random_txn(&mut rng, 4, 2))
            .collect();
        let txns: Vec<_> = (0..rng.gen_range(2..=3))
            .map(|_| random_txn(&mut rng, 4, 2))
            .collect();
        let lens: Vec<_> = txns.iter().map(|t| t.len() + 2).collect();
        let orders = if count_interleavings(&lens) <= SAMPLE {
            interleavings(&lens)
        } else {
            let mut base: Vec<_> = lens
                .iter()
                .enumerate()
                .flat_map(|(i, &l)| std::iter::repeat_n(i, l))
                .collect();
            (0..SAMPLE)
                .map(|_| {
                    base.shuffle(&mut rng);
                    base.clone()
                })
                .collect()
        };
        for (k, order) in orders.iter().enumerate() {
            let h = run_schedule(&setup, &txns, order);
            histories += 1;
            let (r, b) = (replay_verdict(&h), brute_force_verdict(&h));
            accepted += (r && b) as u64;
            if r != b {
                disagree.push(format!(
                    "set {set} order {order:?}: replay {r}, brute force {b}"
                ));
            }
            if k % 10 == 0 {
                for m in mutants(&h) {
                    mutant_count += 1;
                    let (r, b) = (replay_verdict(&m), brute_force_verdict(&m));
                    mutant_rejected += (!r) as u64;
                    unsound += (r && !b) as u64;
                }
            }
        }
    }
    let detail = format!(
        "{histories} scheduled histories, {accepted} accepted by both, {} disagreements; {mutant_count} mutants, {mutant_rejected} rejected by replay, {unsound} accepted by replay but not brute force",
        disagree.len()
    );
    if !disagree.is_empty() {
        return fail(format!(
            "{detail}; {}",
            disagree[..disagree.len().min(3)].join("; ")
        ));
    }
    verdict(accepted == histories && unsound == 0, detail)
}

const CLASSES: [Class; 6] = [
    Class::Vertex,
    Class::EdgeNode,
    Class::NodeInfo,
    Class::Descriptor,
    Class::FreezeCell,
    Class::AdoptDesc,
];

fn live_counts() -> Vec<i64> {
    reclamation::drain();
    CLASSES.iter().map(|&c| live::count(c)).collect()
}

/// Reduced serializability stress on both systems, then the live-counter delta
/// once everything is dropped and the epoch drained.
fn reclamation_stress(runs: u64, txns: usize) -> Result<String, String> {
    let before = live_counts();
    chaos::set_yield_rate(5);
    let r = stress_runs(runs, txns);
    for i in 0..runs {
        let spec = WorkloadSpec {
            system: SystemKind::Boost,
            ..stress_spec(Mix::EDGE_HEAVY, 900 + i, txns)
        };
        run_recorded(&spec, 4)
            .map_err(|e| e.to_string())?
            .structure?;
    }
    chaos::set_yield_rate(0);
    r?;
    let after = live_counts();
    let delta: Vec<_> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    if !live::enabled() {
        return Ok("live counters disabled in this build".into());
    }
    if delta.iter().any(|&d| d != 0) {
        return Err(format!(
            "live objects left behind per class {CLASSES:?}: {delta:?}"
        ));
    }
    Ok(format!(
        "live-counter delta zero over {} allocation classes",
        CLASSES.len()
    ))
}

fn criterion_9() -> Outcome {
    let counters = match reclamation_stress(20, 500) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    let exe = std::env::current_exe().unwrap();
    let t0 = Instant::now();
    let status = Command::new("valgrind")
        .args([
            "-q",
            "--error-exitcode=99",
            "--leak-check=full",
            "--errors-for-leak-kinds=definite",
            "--show-leak-kinds=definite",
            "--fair-sched=yes",
        ])
        .arg(&exe)
        .env(CHILD_ENV, "1")
        .status();
    match status {
        Ok(s) => verdict(
            s.success(),
            format!(
                "{counters}; valgrind child exit {:?} in {:.0}s",
                s.code(),
                t0.elapsed().as_secs_f64()
            ),
        ),
        Err(e) => Outcome {
            pass: false,
            gating: false,
            detail: format!("{counters}; valgrind unavailable: {e}"),
        },
    }
}

fn run_criterion(n: u32, f: fn() -> Outcome) -> bool {
    let t0 = Instant::now();
    let o = f();
    let tag = if o.pass { "PASS" } else { "FAIL" };
    let note = if o.gating { "" } else { " (not gating)" };
    println!(
        "criterion {n}: {tag}{note} - {} [{:.1}s]",
        o.detail,
        t0.elapsed().as_secs_f64()
    );
    o.pass || !o.gating
}

fn main() {
    if std::env::var_os(CHILD_ENV).is_some() {
        return child_main();
    }
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let only: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut ok = true;
    for (n, f) in criteria {
        if only.is_empty() || only.contains(&n) {
            ok &= run_criterion(n, f);
        }
    }
    if !ok {
        std::process::exit(1);
    }
}

/// Runs under valgrind: the reduced stress, with memory errors and definite
/// leaks reported by the tool.
fn child_main() {
    match reclamation_stress(20, 500) {
        Ok(d) => println!("child: {d}"),
        Err(e) => {
            eprintln!("child: {e}");
            std::process::exit(1);
        }
    }
}
