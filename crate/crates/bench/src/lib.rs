//! Fixtures shared by the benchmarks.

use txgraph::{SystemKind, TransactionRequest, TxGraph, WorkloadSpec};

/// A warmed-up structure and a single-thread request stream for `spec`.
pub fn fixture(spec: &WorkloadSpec) -> (Box<dyn TxGraph>, Vec<TransactionRequest>) {
    let graph = spec.system.build(spec.config()).expect("valid spec");
    for req in spec.warmup_requests() {
        graph.run(&req).expect("warm-up keys in range");
    }
    (graph, spec.stream(0).collect())
}

pub fn spec(system: SystemKind, preset: &str, txns: usize) -> WorkloadSpec {
    WorkloadSpec {
        system,
        mix: txgraph::Mix::preset(preset).expect("known preset"),
        txns_per_thread: txns,
        ..Default::default()
    }
}
