//! Buffer pool backing all matrices, tensors, and planes of one run.
//!
//! Every task tree references data through `(BufferId, element index)` pairs,
//! which is also the address format of the memory-access trace fed to the
//! cache simulator. Buffers never share cache lines because line identity is
//! `(buffer, index / B)`.
//!
//! # Space classes
//!
//! Peak-space accounting follows the convention that a run's space is the
//! storage available for the computation's output and scratch, not its
//! read-only inputs:
//!
//! * [`SpaceClass::Input`] — read-only operands, excluded from peak space.
//! * [`SpaceClass::Workspace`] — output planes and statically allocated
//!   intermediates, live for the whole run.
//! * [`SpaceClass::Dynamic`] — buffers whose lifetime is bracketed by
//!   `Alloc`/`Dealloc` task nodes; they count toward peak space only while
//!   live.
//!
//! # Concurrency contract
//!
//! The parallel executor mutates buffers from many threads without locks.
//! This is sound only because kernels guarantee that the write sets of the
//! children of every parallel node are pairwise disjoint; the engine's race
//! checker verifies exactly that property.

use std::cell::UnsafeCell;

use crate::scalar::Scalar;

/// Index of a buffer inside a [`Pool`].
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct BufferId(pub u32);

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum SpaceClass {
    Input,
    Workspace,
    Dynamic,
}

struct BufEntry<S> {
    data: UnsafeCell<Box<[S]>>,
    class: SpaceClass,
}

/// Arena of all buffers touched by one kernel run.
pub struct Pool<S: Scalar> {
    bufs: Vec<BufEntry<S>>,
}

// Sound under the disjoint-write contract documented above: distinct threads
// only ever write disjoint element sets, and reads of concurrently written
// cells never occur within one parallel step.
unsafe impl<S: Scalar> Sync for Pool<S> {}

impl<S: Scalar> Default for Pool<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Pool<S> {
    pub fn new() -> Self {
        Pool { bufs: Vec::new() }
    }

    /// Allocates a zero-filled buffer of `len` elements.
    pub fn alloc(&mut self, len: usize, class: SpaceClass) -> BufferId {
        let id = BufferId(self.bufs.len() as u32);
        self.bufs.push(BufEntry {
            data: UnsafeCell::new(vec![S::zero(); len].into_boxed_slice()),
            class,
        });
        id
    }

    pub fn len_of(&self, id: BufferId) -> usize {
        unsafe { (&*self.bufs[id.0 as usize].data.get()).len() }
    }

    pub fn class_of(&self, id: BufferId) -> SpaceClass {
        self.bufs[id.0 as usize].class
    }

    /// Total elements of all `Workspace` buffers (the statically allocated
    /// computation space, live for a whole run).
    pub fn workspace_elems(&self) -> u64 {
        self.bufs
            .iter()
            .filter(|b| b.class == SpaceClass::Workspace)
            .map(|b| unsafe { (&*b.data.get()).len() as u64 })
            .sum()
    }

    pub fn fill(&mut self, id: BufferId, values: &[S]) {
        let data = self.bufs[id.0 as usize].data.get_mut();
        assert_eq!(data.len(), values.len(), "fill length mismatch");
        data.copy_from_slice(values);
    }

    /// Fills a buffer from a closure of the element index.
    pub fn fill_with(&mut self, id: BufferId, mut f: impl FnMut(usize) -> S) {
        let data = self.bufs[id.0 as usize].data.get_mut();
        for (i, slot) in data.iter_mut().enumerate() {
            *slot = f(i);
        }
    }

    pub fn zero(&mut self, id: BufferId) {
        let data = self.bufs[id.0 as usize].data.get_mut();
        data.fill(S::zero());
    }

    pub fn snapshot(&self, id: BufferId) -> Vec<S> {
        unsafe { (*self.bufs[id.0 as usize].data.get()).to_vec() }
    }

    /// Zeroes every `Workspace` buffer; resets a pool for a repeat run of
    /// the same task tree (dynamic buffers are re-zeroed by their `Alloc`
    /// nodes).
    pub fn zero_workspace(&mut self) {
        for b in &mut self.bufs {
            if b.class == SpaceClass::Workspace {
                b.data.get_mut().fill(S::zero());
            }
        }
    }

    /// Reads one element. Safe for the executors because reads only race
    /// with writes to *other* elements (disjoint-write contract).
    #[inline]
    pub(crate) fn get(&self, id: BufferId, idx: usize) -> S {
        unsafe { (*self.bufs[id.0 as usize].data.get())[idx] }
    }

    /// Writes one element; see the module-level concurrency contract.
    #[inline]
    #[allow(clippy::mut_from_ref)]
    pub(crate) fn set(&self, id: BufferId, idx: usize, v: S) {
        unsafe {
            (*self.bufs[id.0 as usize].data.get())[idx] = v;
        }
    }

    /// Zero-fills a buffer through a shared reference; used by `Alloc` task
    /// nodes, which by construction run before any task that touches the
    /// buffer.
    pub(crate) fn zero_shared(&self, id: BufferId) {
        unsafe {
            (*self.bufs[id.0 as usize].data.get()).fill(S::zero());
        }
    }
}
