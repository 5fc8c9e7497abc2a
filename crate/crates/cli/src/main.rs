use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use txgraph::oracle::check_history;
use txgraph::{
    emit_report, run_bench, run_recorded, Format, GraphState, History, Mix, SystemKind,
    WorkloadSpec,
};

#[derive(Parser)]
#[command(
    name = "txgraph",
    version,
    about = "Transactional adjacency list workloads and history checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Measure committed-op throughput over a thread sweep.
    Bench {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record concurrent runs and check every history.
    Stress {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[arg(long, default_value_t = 10)]
        runs: u64,
        /// Save the history of the first failing run (or the last run) as JSONL.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a JSONL history file.
    Check { path: PathBuf },
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long, default_value = "lftt")]
    system: SystemKind,
    /// Comma-separated thread counts.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8])]
    threads: Vec<usize>,
    /// Transactions per thread.
    #[arg(long, default_value_t = 20_000)]
    txns: usize,
    #[arg(long, default_value_t = 4)]
    txn_size: usize,
    #[arg(long, default_value_t = 500)]
    key_range: u64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Percentages for InsertVertex,DeleteVertex,InsertEdge,DeleteEdge,Find.
    #[arg(long, conflicts_with = "preset")]
    mix: Option<Mix>,
    #[arg(long, default_value = "vertex-heavy")]
    preset: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Append a failing lookup to this percentage of transactions.
    #[arg(long, default_value_t = 0)]
    abort_percent: u32,
    #[arg(long)]
    no_warmup: bool,
}

impl WorkloadArgs {
    fn spec(&self) -> Result<WorkloadSpec> {
        let mix = match self.mix {
            Some(m) => m,
            None => Mix::preset(&self.preset)?,
        };
        let spec = WorkloadSpec {
            mix,
            txn_size: self.txn_size,
            txns_per_thread: self.txns,
            key_range: self.key_range,
            dim: self.dim,
            threads: self.threads.clone(),
            system: self.system,
            seed: self.seed,
            warmup: !self.no_warmup,
            forced_abort_percent: self.abort_percent,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn bench(workload: &WorkloadArgs, format: Format, out: &Option<PathBuf>) -> Result<()> {
    let report = run_bench(&workload.spec()?)?;
    let mut w = output(out)?;
    emit_report(&report, format, &mut w)?;
    w.flush()?;
    Ok(())
}

fn stress(workload: &WorkloadArgs, runs: u64, out: &Option<PathBuf>) -> Result<()> {
    let base = workload.spec()?;
    let mut failed = None;
    let mut last = None;
    for run in 0..runs {
        for &threads in &base.threads {
            let spec = WorkloadSpec {
                seed: base.seed + run,
                ..base.clone()
            };
            let r = run_recorded(&spec, threads)?;
            let verdict = r
                .structure
                .clone()
                .map_err(|e| format!("structure: {e}"))
                .and_then(|_| {
                    check_history(&r.history, &GraphState::new()).map_err(|v| v.to_string())
                });
            println!(
                "seed {} threads {threads}: {} commits, {} aborts, {}",
                spec.seed,
                r.commits,
                r.aborts,
                verdict
                    .as_ref()
                    .map_or_else(|e| format!("FAIL {e}"), |_| "ok".to_string())
            );
            if verdict.is_err() {
                failed = Some(r.history);
                break;
            }
            last = Some(r.history);
        }
        if failed.is_some() {
            break;
        }
    }
    if out.is_some() {
        if let Some(h) = failed.as_ref().or(last.as_ref()) {
            let mut w = output(out)?;
            h.write_jsonl(&mut w)?;
            w.flush()?;
        }
    }
    if failed.is_some() {
        bail!("history check failed");
    }
    Ok(())
}

fn check(path: &PathBuf) -> Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let h = History::read_jsonl(BufReader::new(file))?;
    match check_history(&h, &GraphState::new()) {
        Ok(()) => {
            println!("ok: {} events", h.events.len());
            Ok(())
        }
        Err(v) => bail!("{v}"),
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Bench {
            workload,
            format,
            out,
        } => bench(&workload, format, &out),
        Cmd::Stress {
            workload,
            runs,
            out,
        } => stress(&workload, runs, &out),
        Cmd::Check { path } => check(&path),
    }
}
