//! Scheduling noise for tests: random yields at linearization-sensitive
//! points, so that conflicts show up even with few hardware threads.

use std::cell::Cell;
use std::sync::atomic::{AtomicU32, Ordering};

static RATE: AtomicU32 = AtomicU32::new(0);

/// Yield with probability `per_mille / 1000` at each injection point. Zero
/// (the default) disables injection.
pub fn set_yield_rate(per_mille: u32) {
    RATE.store(per_mille.min(1000), Ordering::Relaxed);
}

pub fn yield_rate() -> u32 {
    RATE.load(Ordering::Relaxed)
}

thread_local! {
    static STATE: Cell<u64> = Cell::new({
        let addr = &RATE as *const _ as u64;
        let id = std::thread::current().id();
        let mut h = std::collections::hash_map::DefaultHasher::new();
        std::hash::Hash::hash(&id, &mut h);
        std::hash::Hasher::finish(&h) ^ addr | 1
    });
}

#[inline]
pub(crate) fn point() {
    let rate = RATE.load(Ordering::Relaxed);
    if rate == 0 {
        return;
    }
    let roll = STATE.with(|s| {
        let mut x = s.get();
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        s.set(x);
        x % 1000
    });
    if roll < rate as u64 {
        std::thread::yield_now();
    }
}
