//! Tagged link words.
//!
//! A link packs a pointer, three low tag bits and a 16-bit version counter
//! into one `u64` so that pointer, mark and version change together under a
//! single compare-and-exchange. The version is bumped by every [`Link::cas`],
//! which rules out ABA when a link returns to a value it held earlier (for
//! example when a freeze cell is cleared or a vertex is unlinked).

use std::marker::PhantomData;
use std::sync::atomic::{AtomicU64, Ordering};

const TAG_MASK: u64 = 0b111;
const PTR_MASK: u64 = 0x0000_FFFF_FFFF_FFF8;
const VER_SHIFT: u32 = 48;

#[derive(Debug)]
pub(crate) struct Link<T> {
    word: AtomicU64,
    _marker: PhantomData<*mut T>,
}

unsafe impl<T: Send + Sync> Send for Link<T> {}
unsafe impl<T: Send + Sync> Sync for Link<T> {}

/// A snapshot of a link word.
#[derive(Debug)]
pub(crate) struct LinkVal<T> {
    raw: u64,
    _marker: PhantomData<*mut T>,
}

impl<T> Clone for LinkVal<T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for LinkVal<T> {}

impl<T> PartialEq for LinkVal<T> {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}
impl<T> Eq for LinkVal<T> {}

impl<T> LinkVal<T> {
    fn from_raw(raw: u64) -> Self {
        Self {
            raw,
            _marker: PhantomData,
        }
    }

    pub(crate) fn ptr(self) -> *mut T {
        (self.raw & PTR_MASK) as *mut T
    }

    pub(crate) fn tag(self) -> u64 {
        self.raw & TAG_MASK
    }

    pub(crate) fn has(self, bit: u64) -> bool {
        self.raw & bit != 0
    }

    pub(crate) fn is_null(self) -> bool {
        self.raw & PTR_MASK == 0
    }

    fn version(self) -> u64 {
        self.raw >> VER_SHIFT
    }
}

fn pack<T>(ptr: *mut T, tag: u64, version: u64) -> u64 {
    let addr = ptr as u64;
    debug_assert_eq!(addr & !PTR_MASK, 0, "pointer does not fit a link word");
    debug_assert_eq!(tag & !TAG_MASK, 0);
    (addr & PTR_MASK) | tag | ((version & 0xFFFF) << VER_SHIFT)
}

impl<T> Link<T> {
    pub(crate) fn null() -> Self {
        Self::new(std::ptr::null_mut(), 0)
    }

    pub(crate) fn new(ptr: *mut T, tag: u64) -> Self {
        Self {
            word: AtomicU64::new(pack(ptr, tag, 0)),
            _marker: PhantomData,
        }
    }

    pub(crate) fn load(&self) -> LinkVal<T> {
        LinkVal::from_raw(self.word.load(Ordering::Acquire))
    }

    /// Replace `expected` with `(ptr, tag)`, bumping the version.
    pub(crate) fn cas(
        &self,
        expected: LinkVal<T>,
        ptr: *mut T,
        tag: u64,
    ) -> Result<(), LinkVal<T>> {
        let new = pack(ptr, tag, expected.version().wrapping_add(1));
        self.word
            .compare_exchange(expected.raw, new, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| ())
            .map_err(LinkVal::from_raw)
    }

    /// Atomically set tag bits without touching pointer or version.
    pub(crate) fn fetch_or(&self, bits: u64) -> LinkVal<T> {
        debug_assert_eq!(bits & !TAG_MASK, 0);
        LinkVal::from_raw(self.word.fetch_or(bits, Ordering::AcqRel))
    }

    /// Non-atomic store for nodes that are not yet published.
    pub(crate) fn store_unpublished(&self, ptr: *mut T, tag: u64) {
        self.word.store(pack(ptr, tag, 0), Ordering::Relaxed);
    }
}
