//! Tunables shared by the kernel builders, fixed for a whole run.

/// Kernel build parameters.
#[derive(Copy, Clone, Debug)]
pub struct KernelConfig {
    /// Matrix side at or below which recursion switches to the serial loop
    /// kernel.
    pub base: u32,
    /// Data block size B of the reduction kernels (elements per serial
    /// block).
    pub block: u32,
    /// Tensor contraction switches to its serial base kernel when the total
    /// footprint of the three operand views is at most this many elements.
    pub tc_base_elems: u64,
    /// Fault injection: make the static-plane recursion hand overlapping
    /// plane ranges to sibling subtrees. Results stay correct under serial
    /// execution, but the race checker must flag the overlap.
    pub overlap_fault: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            base: 8,
            block: 8,
            tc_base_elems: 512,
            overlap_fault: false,
        }
    }
}

impl KernelConfig {
    /// Config with a unit base case, used when measuring span constants.
    pub fn fine_grained() -> Self {
        KernelConfig {
            base: 1,
            tc_base_elems: 3,
            ..Default::default()
        }
    }

    pub fn with_base(mut self, base: u32) -> Self {
        self.base = base;
        self
    }

    pub fn with_block(mut self, block: u32) -> Self {
        self.block = block;
        self
    }
}
