//! Hypercube tensors, orthant views, rank vectors, and index linearization.
//!
//! A tensor of order `d` has every axis of the same power-of-two extent `n`
//! and is stored row-major (last axis fastest). Views narrow each axis to a
//! half, so the `2^d` orthants of a view partition it exactly.

use std::sync::Arc;

use crate::error::{require_pow2, Error, Result};
use crate::pool::{BufferId, Pool, SpaceClass};
use crate::scalar::Scalar;

/// Maximum tensor order supported by the fixed-size view descriptors.
pub const MAX_ORDER: usize = 8;

/// Maps a sequence of half selectors `b_1..b_k` (each 1 or 2, `b_1` most
/// significant) to an index in `[1, 2^k]`:
///
/// `1 + sum_j (b_j - 1) * 2^(k - j)`
///
/// The map is a bijection `{1,2}^k -> [1, 2^k]`; applied level by level down
/// a halving recursion it composes to a Z-order interleaving of the index
/// group.
pub fn linearize(bits: &[u8]) -> usize {
    let mut v = 0usize;
    for &b in bits {
        assert!(b == 1 || b == 2, "half selector must be 1 or 2");
        v = v * 2 + (b - 1) as usize;
    }
    v + 1
}

/// Permutation of `1..=d` describing where each source axis lands in a
/// transposed tensor: source axis `j` becomes target axis `ranks[j]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RankVector {
    ranks: Vec<usize>,
}

impl RankVector {
    pub fn new(ranks: Vec<usize>) -> Result<RankVector> {
        let d = ranks.len();
        let mut seen = vec![false; d];
        for &r in &ranks {
            if r == 0 || r > d || seen[r - 1] {
                return Err(Error::NotAPermutation);
            }
            seen[r - 1] = true;
        }
        Ok(RankVector { ranks })
    }

    pub fn identity(d: usize) -> RankVector {
        RankVector {
            ranks: (1..=d).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.ranks.len()
    }

    /// Target position (1-based) of source axis `j` (1-based).
    pub fn rank_of(&self, j: usize) -> usize {
        self.ranks[j - 1]
    }

    pub fn inverse(&self) -> RankVector {
        let mut inv = vec![0; self.ranks.len()];
        for (src, &dst) in self.ranks.iter().enumerate() {
            inv[dst - 1] = src + 1;
        }
        RankVector { ranks: inv }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.ranks
    }
}

/// View into a hypercube tensor buffer: per-axis offsets plus the buffer's
/// natural strides.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct TenView {
    pub buf: BufferId,
    pub order: u8,
    /// Extent of every axis of this view.
    pub side: u32,
    off: [u32; MAX_ORDER],
    stride: [u64; MAX_ORDER],
}

impl TenView {
    /// Flat element index for per-axis coordinates relative to the view.
    #[inline]
    pub fn index(&self, coords: &[u32]) -> usize {
        debug_assert_eq!(coords.len(), self.order as usize);
        let mut flat = 0u64;
        for ((&c, &off), &stride) in coords.iter().zip(&self.off).zip(&self.stride) {
            debug_assert!(c < self.side);
            flat += (off + c) as u64 * stride;
        }
        flat as usize
    }

    /// Number of elements covered by the view.
    pub fn elems(&self) -> u64 {
        (self.side as u64).pow(self.order as u32)
    }

    /// View of the orthant selected by per-axis halves `p_j` in `{1, 2}`.
    pub fn orthant(&self, halves: &[u8]) -> Result<TenView> {
        if halves.len() != self.order as usize {
            return Err(Error::ShapeMismatch {
                what: "orthant selector length",
            });
        }
        if self.side < 2 {
            return Err(Error::DegenerateSplit { what: "tensor" });
        }
        let half = self.side / 2;
        let mut v = *self;
        v.side = half;
        for (a, &p) in halves.iter().enumerate() {
            assert!(p == 1 || p == 2, "half selector must be 1 or 2");
            v.off[a] += (p as u32 - 1) * half;
        }
        Ok(v)
    }

    /// All flat indices covered by the view, in row-major coordinate order.
    pub fn element_indices(&self) -> Vec<usize> {
        let d = self.order as usize;
        let mut coords = vec![0u32; d];
        let mut out = Vec::with_capacity(self.elems() as usize);
        if d == 0 {
            out.push(self.index(&coords));
            return out;
        }
        loop {
            out.push(self.index(&coords));
            // odometer increment, last axis fastest
            let mut a = d;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                coords[a] += 1;
                if coords[a] < self.side {
                    break;
                }
                coords[a] = 0;
            }
        }
    }
}

/// Owning handle for a hypercube tensor in a pool.
#[derive(Copy, Clone, Debug)]
pub struct Tensor {
    pub buf: BufferId,
    pub order: u8,
    pub side: u32,
}

impl Tensor {
    /// Allocates a zeroed order-`d` tensor of side `n` (a power of two).
    pub fn alloc<S: Scalar>(
        pool: &mut Pool<S>,
        order: u8,
        side: u32,
        class: SpaceClass,
    ) -> Result<Tensor> {
        if order as usize > MAX_ORDER {
            return Err(Error::BadAxisSpec {
                what: format!("order {order} exceeds {MAX_ORDER}"),
            });
        }
        require_pow2("tensor side", side as u64)?;
        let len = (side as u64).pow(order as u32) as usize;
        let buf = pool.alloc(len, class);
        Ok(Tensor { buf, order, side })
    }

    pub fn view(&self) -> TenView {
        let d = self.order as usize;
        let mut stride = [0u64; MAX_ORDER];
        let mut s = 1u64;
        for a in (0..d).rev() {
            stride[a] = s;
            s *= self.side as u64;
        }
        TenView {
            buf: self.buf,
            order: self.order,
            side: self.side,
            off: [0; MAX_ORDER],
            stride,
        }
    }

    pub fn elems(&self) -> usize {
        (self.side as u64).pow(self.order as u32) as usize
    }

    pub fn get<S: Scalar>(&self, pool: &Pool<S>, coords: &[u32]) -> S {
        pool.get(self.buf, self.view().index(coords))
    }

    pub fn set<S: Scalar>(&self, pool: &mut Pool<S>, coords: &[u32], v: S) {
        pool.set(self.buf, self.view().index(coords), v);
    }
}

/// Index groups of a contraction operand.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Group {
    /// Uncontracted indices of the left operand (rows of the output).
    I,
    /// Uncontracted indices of the right operand (columns of the output).
    J,
    /// Contracted indices, shared between the operands.
    K,
}

/// Role of each axis of a tensor: which index group it belongs to and its
/// 1-based subscript within that group. The subscript pairs contracted axes
/// between the two operands (`k_t` of the left operand sums against `k_t` of
/// the right).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AxisSpec {
    roles: Vec<(Group, u8)>,
}

impl AxisSpec {
    pub fn new(roles: Vec<(Group, u8)>) -> Result<AxisSpec> {
        let spec = AxisSpec { roles };
        for g in [Group::I, Group::J, Group::K] {
            let mut subs: Vec<u8> = spec
                .roles
                .iter()
                .filter(|(gr, _)| *gr == g)
                .map(|&(_, t)| t)
                .collect();
            subs.sort_unstable();
            for (pos, &t) in subs.iter().enumerate() {
                if t as usize != pos + 1 {
                    return Err(Error::BadAxisSpec {
                        what: format!("{g:?}-group subscripts must be 1..=count, got {subs:?}"),
                    });
                }
            }
        }
        Ok(spec)
    }

    /// Axes in canonical group order: all of `group` sorted by subscript.
    pub fn positions_of(&self, group: Group) -> Vec<usize> {
        let mut with_sub: Vec<(u8, usize)> = self
            .roles
            .iter()
            .enumerate()
            .filter(|(_, (g, _))| *g == group)
            .map(|(pos, &(_, t))| (t, pos))
            .collect();
        with_sub.sort_unstable();
        with_sub.into_iter().map(|(_, pos)| pos).collect()
    }

    pub fn count_of(&self, group: Group) -> usize {
        self.roles.iter().filter(|(g, _)| *g == group).count()
    }

    pub fn order(&self) -> usize {
        self.roles.len()
    }

    pub fn role_of(&self, axis: usize) -> (Group, u8) {
        self.roles[axis]
    }
}

/// Binary tensor format: `u8` order, `u64` side, `u8` scalar mode tag,
/// then the row-major payload, all little-endian.
pub fn write_tensor_bytes<S: Scalar>(pool: &Pool<S>, t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + t.elems() * S::WIRE_BYTES);
    out.push(t.order);
    out.extend_from_slice(&(t.side as u64).to_le_bytes());
    out.push(S::MODE_TAG);
    for v in pool.snapshot(t.buf) {
        v.write_le(&mut out);
    }
    out
}

/// Parses the binary tensor format, allocating the tensor in `pool`.
pub fn read_tensor_bytes<S: Scalar>(
    pool: &mut Pool<S>,
    bytes: &[u8],
    class: SpaceClass,
) -> Result<Tensor> {
    if bytes.len() < 10 {
        return Err(Error::Format {
            what: "tensor header truncated".into(),
        });
    }
    let order = bytes[0];
    let side = u64::from_le_bytes(bytes[1..9].try_into().unwrap());
    let mode = bytes[9];
    if mode != S::MODE_TAG {
        return Err(Error::Format {
            what: format!(
                "scalar mode {mode} does not match requested mode {}",
                S::MODE_TAG
            ),
        });
    }
    if side > u32::MAX as u64 {
        return Err(Error::Format {
            what: "tensor side too large".into(),
        });
    }
    let t = Tensor::alloc(pool, order, side as u32, class)?;
    let need = t.elems() * S::WIRE_BYTES;
    let payload = &bytes[10..];
    if payload.len() != need {
        return Err(Error::Format {
            what: format!("payload length {} != expected {need}", payload.len()),
        });
    }
    let values: Vec<S> = payload
        .chunks_exact(S::WIRE_BYTES)
        .map(S::read_le)
        .collect();
    pool.fill(t.buf, &values);
    Ok(t)
}

/// Shared list of same-shape tensor planes used as accumulation targets.
#[derive(Clone, Debug)]
pub struct TensorPlaneSet {
    bufs: Arc<Vec<BufferId>>,
    pub order: u8,
    pub side: u32,
}

impl TensorPlaneSet {
    pub fn alloc<S: Scalar>(
        pool: &mut Pool<S>,
        r: u32,
        order: u8,
        side: u32,
    ) -> Result<TensorPlaneSet> {
        let mut bufs = Vec::with_capacity(r as usize);
        for _ in 0..r {
            bufs.push(Tensor::alloc(pool, order, side, SpaceClass::Workspace)?.buf);
        }
        Ok(TensorPlaneSet {
            bufs: Arc::new(bufs),
            order,
            side,
        })
    }

    pub fn r(&self) -> u32 {
        self.bufs.len() as u32
    }

    pub fn buffer(&self, k: u32) -> BufferId {
        self.bufs[k as usize]
    }

    pub fn buffers(&self) -> &Arc<Vec<BufferId>> {
        &self.bufs
    }

    pub fn plane(&self, k: u32) -> Tensor {
        Tensor {
            buf: self.bufs[k as usize],
            order: self.order,
            side: self.side,
        }
    }

    pub fn zero_all<S: Scalar>(&self, pool: &mut Pool<S>) {
        for &b in self.bufs.iter() {
            pool.zero(b);
        }
    }
}
