//! Lock-free transactional adjacency list.
//!
//! Vertices live in a sorted lock-free list; each vertex owns an MDList of
//! its outgoing edge keys. Batches of operations run atomically through
//! shared descriptors and cooperative helping.

pub mod adjacency;
pub mod boosting;
pub mod chaos;
pub mod error;
pub mod history;
pub mod lftt;
pub(crate) mod link;
pub mod mdlist;
pub mod oracle;
pub mod reclamation;
pub mod txn;
pub mod workload;

pub use adjacency::{AdjacencyList, Config};
pub use boosting::{BoostedGraph, BoostedResult};
pub use error::{Error, Result};
pub use history::{GraphState, History, HistoryEvent, NodeKey, Recorder};
pub use lftt::{is_key_present, NodeInfo, OpType, Operation, TxDesc, TxStatus, UpdateResult};
pub use mdlist::{key_to_coord, Coordinate, MdList, Shape};
pub use oracle::SeqGraph;
pub use txn::{PendingTxn, TransactionRequest, TransactionResult};
pub use workload::{
    emit_report, run_bench, run_recorded, BenchReport, BenchRow, Format, Mix, RecordedRun,
    SystemKind, TxGraph, WorkloadSpec,
};
