use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use txgraph::{run_bench, MdList, Shape, SystemKind, WorkloadSpec};
use txgraph_bench::{fixture, spec};

const SYSTEMS: [SystemKind; 2] = [SystemKind::Lftt, SystemKind::Boost];

fn single_transactions(c: &mut Criterion) {
    let mut g = c.benchmark_group("single_txn");
    for preset in ["vertex-heavy", "edge-heavy"] {
        for system in SYSTEMS {
            let (graph, reqs) = fixture(&spec(system, preset, 4096));
            let mut i = 0;
            g.bench_function(BenchmarkId::new(system.name(), preset), |b| {
                b.iter(|| {
                    i = (i + 1) % reqs.len();
                    black_box(graph.run(&reqs[i]).unwrap())
                })
            });
        }
    }
    g.finish();
}

fn thread_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for system in SYSTEMS {
        for threads in [1, 4] {
            let s = WorkloadSpec {
                threads: vec![threads],
                ..spec(system, "vertex-heavy", 1000)
            };
            g.throughput(Throughput::Elements((threads * s.txns_per_thread) as u64));
            g.bench_function(BenchmarkId::new(system.name(), threads), |b| {
                b.iter(|| run_bench(&s).unwrap())
            });
        }
    }
    g.finish();
}

fn mdlist_search(c: &mut Criterion) {
    let list = MdList::new(Shape::for_range(500, 3).unwrap());
    for k in (1..500).step_by(3) {
        list.insert_plain(k).unwrap();
    }
    let mut k = 0;
    c.bench_function("mdlist_search", |b| {
        b.iter(|| {
            k = k % 499 + 1;
            black_box(list.trace_search(k).unwrap())
        })
    });
}

criterion_group!(benches, single_transactions, thread_sweep, mdlist_search);
criterion_main!(benches);
