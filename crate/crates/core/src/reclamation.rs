//! Deferred reclamation for unlinked nodes, replaced node infos and
//! terminal descriptors.
//!
//! Backed by `crossbeam-epoch`. Structures use the process-wide collector
//! through [`pin`] and [`retire`]; [`Domain`] gives an isolated collector
//! with its own participants, which is what the guard-semantics tests use.
//!
//! Debug builds also keep live-object counters per allocation class so that
//! leak checks can assert every committed-path allocation is eventually
//! returned once the owning structure is dropped and the epoch drained.

use crossbeam_epoch::{Collector, LocalHandle};

pub use crossbeam_epoch::Guard;

/// Pin the current thread in the global epoch.
pub fn pin() -> Guard {
    crossbeam_epoch::pin()
}

/// Schedule `ptr` (obtained from `Box::into_raw`) for destruction once no
/// guard that could observe it is live.
///
/// # Safety
/// `ptr` must be unreachable for threads that pin after this call, and must
/// not be retired twice.
pub unsafe fn retire<T: Send + 'static>(guard: &Guard, ptr: *mut T) {
    if ptr.is_null() {
        return;
    }
    let addr = ptr as usize;
    guard.defer_unchecked(move || drop(Box::from_raw(addr as *mut T)));
}

/// Push locally deferred work to the global queue and try to advance the
/// epoch.
pub fn advance(guard: &Guard) {
    guard.flush();
}

/// Drain everything reclaimable from the calling thread's point of view.
/// Useful at quiescence before inspecting live counters.
pub fn drain() {
    for _ in 0..128 {
        let guard = pin();
        guard.flush();
    }
}

/// An isolated reclamation domain.
pub struct Domain {
    collector: Collector,
}

impl Default for Domain {
    fn default() -> Self {
        Self::new()
    }
}

impl Domain {
    pub fn new() -> Self {
        Self {
            collector: Collector::new(),
        }
    }

    /// Register the calling thread. The returned handle is not `Send`.
    pub fn register(&self) -> Participant {
        Participant {
            handle: self.collector.register(),
        }
    }
}

pub struct Participant {
    handle: LocalHandle,
}

impl Participant {
    pub fn pin(&self) -> Guard {
        self.handle.pin()
    }

    pub fn is_pinned(&self) -> bool {
        self.handle.is_pinned()
    }
}

/// Allocation classes tracked by the debug live counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Vertex = 0,
    EdgeNode = 1,
    NodeInfo = 2,
    Descriptor = 3,
    FreezeCell = 4,
    AdoptDesc = 5,
}

pub mod live {
    use super::Class;
    use std::sync::atomic::{AtomicI64, Ordering};

    static COUNTS: [AtomicI64; 6] = [
        AtomicI64::new(0),
        AtomicI64::new(0),
        AtomicI64::new(0),
        AtomicI64::new(0),
        AtomicI64::new(0),
        AtomicI64::new(0),
    ];

    #[inline]
    pub(crate) fn alloc(class: Class) {
        if cfg!(debug_assertions) {
            COUNTS[class as usize].fetch_add(1, Ordering::Relaxed);
        }
    }

    #[inline]
    pub(crate) fn free(class: Class) {
        if cfg!(debug_assertions) {
            COUNTS[class as usize].fetch_sub(1, Ordering::Relaxed);
        }
    }

    /// Live objects of `class`; always zero in release builds.
    pub fn count(class: Class) -> i64 {
        COUNTS[class as usize].load(Ordering::Relaxed)
    }

    pub fn enabled() -> bool {
        cfg!(debug_assertions)
    }
}
