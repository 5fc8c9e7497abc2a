//! Randomized workloads and the throughput harness.

use std::collections::BTreeSet;
use std::io::Write;
use std::str::FromStr;
use std::sync::Barrier;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adjacency::{AdjacencyList, Config};
use crate::boosting::BoostedGraph;
use crate::error::{Error, Result};
use crate::history::{GraphState, History, HistoryEvent, Recorder};
use crate::lftt::Operation;
use crate::oracle::SeqGraph;
use crate::txn::{TransactionRequest, TransactionResult};

/// Either implementation behind one interface.
pub trait TxGraph: Sync + Send {
    fn run(&self, req: &TransactionRequest) -> Result<TransactionResult>;
    fn logical_state(&self) -> GraphState;
    fn check_structure(&self) -> std::result::Result<(), String>;
    /// Drain recorded events, if recording.
    fn take_events(&self) -> Vec<HistoryEvent>;
}

impl TxGraph for AdjacencyList {
    fn run(&self, req: &TransactionRequest) -> Result<TransactionResult> {
        self.execute(req)
    }
    fn logical_state(&self) -> GraphState {
        self.snapshot()
    }
    fn check_structure(&self) -> std::result::Result<(), String> {
        AdjacencyList::check_structure(self)
    }
    fn take_events(&self) -> Vec<HistoryEvent> {
        self.recorder().map(Recorder::take).unwrap_or_default()
    }
}

impl TxGraph for BoostedGraph {
    fn run(&self, req: &TransactionRequest) -> Result<TransactionResult> {
        self.execute(req)
    }
    fn logical_state(&self) -> GraphState {
        self.snapshot()
    }
    fn check_structure(&self) -> std::result::Result<(), String> {
        BoostedGraph::check_structure(self)
    }
    fn take_events(&self) -> Vec<HistoryEvent> {
        self.recorder().map(Recorder::take).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Lftt,
    Boost,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Lftt => "lftt",
            SystemKind::Boost => "boost",
        }
    }

    pub fn build(&self, config: Config) -> Result<Box<dyn TxGraph>> {
        Ok(match self {
            SystemKind::Lftt => Box::new(AdjacencyList::new(config)?),
            SystemKind::Boost => Box::new(BoostedGraph::new(config)?),
        })
    }
}

impl FromStr for SystemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lftt" => Ok(SystemKind::Lftt),
            "boost" => Ok(SystemKind::Boost),
            _ => Err(Error::Workload(format!(
                "unknown system {s:?}, expected lftt or boost"
            ))),
        }
    }
}

/// Percentages for InsertVertex, DeleteVertex, InsertEdge, DeleteEdge, Find.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mix(pub [u32; 5]);

impl Mix {
    pub const VERTEX_HEAVY: Mix = Mix([40, 40, 10, 10, 0]);
    pub const EDGE_HEAVY: Mix = Mix([20, 20, 25, 25, 10]);

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "vertex-heavy" => Ok(Self::VERTEX_HEAVY),
            "edge-heavy" => Ok(Self::EDGE_HEAVY),
            _ => Err(Error::Workload(format!(
                "unknown preset {name:?}, expected vertex-heavy or edge-heavy"
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        let sum: u32 = self.0.iter().sum();
        if sum != 100 {
            return Err(Error::Workload(format!("mix sums to {sum}, expected 100")));
        }
        Ok(())
    }
}

impl FromStr for Mix {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Workload(format!("bad mix entry {p:?}")))
            })
            .collect::<Result<_>>()?;
        let arr: [u32; 5] = parts
            .try_into()
            .map_err(|_| Error::Workload("mix needs five comma-separated percentages".into()))?;
        let mix = Mix(arr);
        mix.validate()?;
        Ok(mix)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub mix: Mix,
    pub txn_size: usize,
    pub txns_per_thread: usize,
    pub key_range: u64,
    pub dim: usize,
    pub threads: Vec<usize>,
    pub system: SystemKind,
    pub seed: u64,
    pub warmup: bool,
    /// Percentage of transactions that get an extra, always-failing final
    /// operation. When non-zero the top key is reserved for it.
    pub forced_abort_percent: u32,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            mix: Mix::VERTEX_HEAVY,
            txn_size: 4,
            txns_per_thread: 20_000,
            key_range: 500,
            dim: 3,
            threads: vec![1, 2, 4, 8],
            system: SystemKind::Lftt,
            seed: 1,
            warmup: true,
            forced_abort_percent: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        self.mix.validate()?;
        if self.txn_size == 0 || self.txns_per_thread == 0 {
            return Err(Error::Workload(
                "transaction size and count must be positive".into(),
            ));
        }
        if self.key_range < 2 {
            return Err(Error::Workload(format!(
                "key range {} leaves no usable keys",
                self.key_range
            )));
        }
        if self.forced_abort_percent > 100 || (self.forced_abort_percent > 0 && self.key_range < 3)
        {
            return Err(Error::Workload(
                "forced abort percentage must be at most 100 with a key range of at least 3".into(),
            ));
        }
        if self.threads.is_empty() || self.threads.contains(&0) {
            return Err(Error::Workload("thread counts must be positive".into()));
        }
        Ok(())
    }

    pub fn config(&self) -> Config {
        Config::new(self.key_range, self.dim)
    }

    /// Keys handed to generated operations: `[1, usable_range())`.
    fn usable_range(&self) -> u64 {
        if self.forced_abort_percent > 0 {
            self.key_range - 1
        } else {
            self.key_range
        }
    }

    /// The always-failing operation used for forced aborts: a lookup of the
    /// reserved key, which is never inserted.
    pub fn failing_op(&self) -> Operation {
        Operation::Find(self.key_range - 1, None)
    }

    /// Deterministic transaction stream of one worker.
    pub fn stream(&self, tid: usize) -> impl Iterator<Item = TransactionRequest> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(tid as u64);
        let n = self.usable_range();
        (0..self.txns_per_thread).map(move |_| {
            let mut ops: Vec<_> = (0..self.txn_size)
                .map(|_| random_op(&mut rng, &self.mix, n))
                .collect();
            if self.forced_abort_percent > 0 && rng.gen_range(0..100) < self.forced_abort_percent {
                ops.push(self.failing_op());
            }
            TransactionRequest::new(ops).expect("txn_size is positive")
        })
    }

    /// Initial population: half the key range as vertices, about four edges each.
    pub fn warmup_requests(&self) -> Vec<TransactionRequest> {
        if !self.warmup {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        let n = self.usable_range();
        let target = ((self.key_range - 1) / 2).min(n - 1) as usize;
        let mut vertices = BTreeSet::new();
        while vertices.len() < target {
            vertices.insert(rng.gen_range(1..n));
        }
        vertices
            .into_iter()
            .map(|v| {
                let mut edges = BTreeSet::new();
                for _ in 0..4 {
                    edges.insert(rng.gen_range(1..n));
                }
                let mut ops = vec![Operation::InsertVertex(v)];
                ops.extend(edges.into_iter().map(|e| Operation::InsertEdge(v, e)));
                TransactionRequest::new(ops).expect("non-empty")
            })
            .collect()
    }
}

fn random_op(rng: &mut ChaCha8Rng, mix: &Mix, n: u64) -> Operation {
    let mut pick = rng.gen_range(0..100u32);
    let mut kind = 4;
    for (i, &p) in mix.0.iter().enumerate() {
        if pick < p {
            kind = i;
            break;
        }
        pick -= p;
    }
    let v = rng.gen_range(1..n);
    let e = rng.gen_range(1..n);
    match kind {
        0 => Operation::InsertVertex(v),
        1 => Operation::DeleteVertex(v),
        2 => Operation::InsertEdge(v, e),
        3 => Operation::DeleteEdge(v, e),
        _ if rng.gen_bool(0.5) => Operation::Find(v, None),
        _ => Operation::Find(v, Some(e)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub system: SystemKind,
    pub threads: usize,
    pub ops_per_sec: f64,
    pub commits: u64,
    pub aborts: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Run the workload once per thread count on a fresh structure.
pub fn run_bench(spec: &WorkloadSpec) -> Result<BenchReport> {
    spec.validate()?;
    let mut report = BenchReport::default();
    for &threads in &spec.threads {
        report.rows.push(run_once(spec, threads)?);
    }
    Ok(report)
}

fn run_once(spec: &WorkloadSpec, threads: usize) -> Result<BenchRow> {
    let graph = spec.system.build(spec.config())?;
    for req in spec.warmup_requests() {
        graph.run(&req)?;
    }
    let (commits, aborts, wall) = drive(&*graph, spec, threads)?;
    let wall = wall.max(1e-9);
    Ok(BenchRow {
        system: spec.system,
        threads,
        ops_per_sec: (commits * spec.txn_size as u64) as f64 / wall,
        commits,
        aborts,
        wall_ms: wall * 1e3,
    })
}

/// Run every worker's stream between two barriers; returns commits, aborts
/// and the wall time in seconds between the barriers.
fn drive(graph: &dyn TxGraph, spec: &WorkloadSpec, threads: usize) -> Result<(u64, u64, f64)> {
    let streams: Vec<Vec<TransactionRequest>> =
        (0..threads).map(|t| spec.stream(t).collect()).collect();
    let start = Barrier::new(threads + 1);
    let end = Barrier::new(threads + 1);
    std::thread::scope(|s| {
        let handles: Vec<_> = streams
            .iter()
            .map(|reqs| {
                let (start, end) = (&start, &end);
                s.spawn(move || -> Result<(u64, u64)> {
                    start.wait();
                    let mut counts = (0, 0);
                    let mut outcome = Ok(());
                    for req in reqs {
                        match graph.run(req) {
                            Ok(r) if r.committed() => counts.0 += 1,
                            Ok(_) => counts.1 += 1,
                            Err(e) => {
                                outcome = Err(e);
                                break;
                            }
                        }
                    }
                    end.wait();
                    outcome.map(|_| counts)
                })
            })
            .collect();
        start.wait();
        let t0 = Instant::now();
        end.wait();
        let wall = t0.elapsed().as_secs_f64();
        let (mut commits, mut aborts) = (0, 0);
        for h in handles {
            let (c, a) = h
                .join()
                .map_err(|_| Error::Workload("worker panicked".into()))??;
            commits += c;
            aborts += a;
        }
        Ok((commits, aborts, wall))
    })
}

/// A recorded concurrent run and what was observed at quiescence.
pub struct RecordedRun {
    pub history: History,
    pub commits: u64,
    pub aborts: u64,
    pub structure: std::result::Result<(), String>,
}

/// Run warm-up and `threads` workers on a fresh recording structure. The
/// history starts from the empty graph and includes the warm-up.
pub fn run_recorded(spec: &WorkloadSpec, threads: usize) -> Result<RecordedRun> {
    spec.validate()?;
    let graph = spec.system.build(spec.config().recording())?;
    for req in spec.warmup_requests() {
        graph.run(&req)?;
    }
    let (commits, aborts, _) = drive(&*graph, spec, threads)?;
    let history = History {
        events: graph.take_events(),
        final_state: Some(graph.logical_state()),
    };
    Ok(RecordedRun {
        history,
        commits,
        aborts,
        structure: graph.check_structure(),
    })
}

/// Commit and abort counts of the single-threaded stream under the
/// sequential reference.
pub fn oracle_counts(spec: &WorkloadSpec) -> (u64, u64) {
    let mut g = SeqGraph::new();
    for req in spec.warmup_requests() {
        g.apply(req.ops());
    }
    let (mut c, mut a) = (0, 0);
    for req in spec.stream(0) {
        if g.apply(req.ops()) {
            c += 1;
        } else {
            a += 1;
        }
    }
    (c, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Workload(format!(
                "unknown format {s:?}, expected csv or json"
            ))),
        }
    }
}

pub const CSV_HEADER: &str = "system,threads,ops_per_sec,commits,aborts,wall_ms";

pub fn emit_report(
    report: &BenchReport,
    format: Format,
    mut out: impl Write,
) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in &report.rows {
                writeln!(
                    out,
                    "{},{},{:.1},{},{},{:.3}",
                    r.system.name(),
                    r.threads,
                    r.ops_per_sec,
                    r.commits,
                    r.aborts,
                    r.wall_ms
                )?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report.rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
