//! Scalar ring abstraction.
//!
//! Every kernel is generic over a commutative ring. Two rings are provided:
//!
//! * [`Int31`] — integers mod 2^31 - 1. All operations are exact, so two
//!   computations that sum the same multiset of products in different orders
//!   produce bit-identical results. This is the ring used by the verification
//!   suites.
//! * `f64` — IEEE floats for benchmarking. Additions are only approximately
//!   associative; equality checks in float mode go through a tolerance.

use std::fmt::Debug;

/// Modulus for the exact integer ring (the Mersenne prime 2^31 - 1).
pub const INT31_MODULUS: u64 = (1 << 31) - 1;

/// A commutative ring element that kernels can store and combine.
pub trait Scalar: Copy + PartialEq + Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, other: Self) -> Self;
    fn mul(self, other: Self) -> Self;

    /// Deterministically folds an arbitrary u64 into the ring; used to fill
    /// inputs from a seeded RNG.
    fn from_u64(v: u64) -> Self;

    /// Number of bytes in the on-disk little-endian encoding.
    const WIRE_BYTES: usize;
    /// Identifier stored in the binary tensor header.
    const MODE_TAG: u8;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

/// Comparison tolerance for float-mode results. Integer-mode checks are
/// bit-exact and never consult this; float kernels sum in different orders,
/// so their results agree only approximately.
#[derive(Copy, Clone, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-9,
            abs: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn approx_eq(&self, a: f64, b: f64) -> bool {
        let diff = (a - b).abs();
        diff <= self.abs || diff <= self.rel * a.abs().max(b.abs())
    }
}

/// Exact integer arithmetic mod 2^31 - 1.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Default)]
pub struct Int31(pub u32);

impl Scalar for Int31 {
    fn zero() -> Self {
        Int31(0)
    }
    fn one() -> Self {
        Int31(1)
    }
    fn add(self, other: Self) -> Self {
        Int31(((self.0 as u64 + other.0 as u64) % INT31_MODULUS) as u32)
    }
    fn mul(self, other: Self) -> Self {
        Int31(((self.0 as u64 * other.0 as u64) % INT31_MODULUS) as u32)
    }
    fn from_u64(v: u64) -> Self {
        Int31((v % INT31_MODULUS) as u32)
    }

    const WIRE_BYTES: usize = 4;
    const MODE_TAG: u8 = 0;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        Int31(u32::from_le_bytes(bytes[..4].try_into().unwrap()))
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn mul(self, other: Self) -> Self {
        self * other
    }
    fn from_u64(v: u64) -> Self {
        // Small integers so that desk-scale products stay exactly
        // representable; keeps float-mode checks meaningful.
        (v % 1024) as f64 - 512.0
    }

    const WIRE_BYTES: usize = 8;
    const MODE_TAG: u8 = 1;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
}
