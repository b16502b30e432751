//! Fork-join task trees.
//!
//! Kernels never compute directly; they build a [`TaskNode`] tree whose
//! leaves carry concrete view descriptors. The engine then executes the tree
//! either instrumented (serial, deterministic, metered) or in parallel.
//! Because leaves describe *where* they write independently of the data,
//! write sets and costs are derivable from the tree alone.

use std::sync::Arc;

use crate::matrix::MatView;
use crate::pool::{BufferId, Pool};
use crate::scalar::Scalar;
use crate::tensor::{TenView, MAX_ORDER};

/// One memory access of the instrumented executor, addressed as
/// `(buffer, element index)`.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct Access {
    pub buf: BufferId,
    pub idx: u64,
    pub write: bool,
}

/// Axis bookkeeping for a contraction leaf: which axes of each operand
/// belong to which index group, in canonical subscript order. The output
/// view's axes are always `(i_1..i_u, j_1..j_v)`.
#[derive(Copy, Clone, Debug)]
pub struct ContractDims {
    pub nu: u8,
    pub nv: u8,
    pub nx: u8,
    /// Position in U of i_t / k_t (first `nu` / `nx` entries valid).
    pub u_pos_i: [u8; MAX_ORDER],
    pub u_pos_k: [u8; MAX_ORDER],
    /// Position in V of j_t / k_t.
    pub v_pos_j: [u8; MAX_ORDER],
    pub v_pos_k: [u8; MAX_ORDER],
}

/// Payload of a contraction leaf (boxed to keep [`TaskNode`] small).
#[derive(Clone, Debug)]
pub struct ContractLeaf {
    pub x: TenView,
    pub u: TenView,
    pub v: TenView,
    pub dims: ContractDims,
}

/// Payload of a whole-group row-major flatten/deflatten leaf.
#[derive(Clone, Debug)]
pub struct FlattenLeaf {
    pub t: TenView,
    pub m: MatView,
    pub row_axes: u8,
    pub to_matrix: bool,
}

/// Leaf computations. Work and span both count one unit per scalar
/// multiply-add (or move); a leaf's interior is serial.
#[derive(Clone, Debug)]
pub enum LeafOp {
    /// `x += u * v` by a serial triple loop (`x: a x c`, `u: a x b`,
    /// `v: b x c`).
    MatMulAcc { x: MatView, u: MatView, v: MatView },
    /// `dst[row, col0..col0+len) += src[row, col0..col0+len)`.
    AddBlock {
        dst: MatView,
        src: MatView,
        row: u32,
        col0: u32,
        len: u32,
    },
    /// `planes[0][start..start+len) = sum_k planes[k][start..start+len)`
    /// with a local block reducer.
    ReduceBlock {
        planes: Arc<Vec<BufferId>>,
        start: u64,
        len: u32,
    },
    /// Accumulating tensor contraction over the views' common side.
    TensorContractAcc(Box<ContractLeaf>),
    /// Single-element move (base case of transposition and flattening).
    Copy {
        dst_buf: BufferId,
        dst_idx: u64,
        src_buf: BufferId,
        src_idx: u64,
    },
    /// Whole-group flatten/deflatten by the plain row-major bijection, as a
    /// single serial leaf. The alternative to the recursive interleaving.
    FlattenCopy(Box<FlattenLeaf>),
    /// Synthetic leaf for engine tests: fixed cost and declared writes.
    Stub {
        cost: u64,
        writes: Arc<Vec<(BufferId, u64)>>,
    },
}

/// Node of a fork-join task tree.
///
/// Cost model (all integer units, fixed per run):
/// * leaf: span = work = its operation count;
/// * `Tick`: 1 work and 1 span of bookkeeping per recursive call;
/// * `Fork` (an explicit fork/join of k children): `ceil(log2 k)` span each
///   way and `k - 1` work each way;
/// * `ParFor` (a parallel loop of k iterations, lowered to a binary fork
///   tree of depth `ceil(log2 k)`): `ceil(log2 k)` span and `k - 1` work;
/// * `Alloc` of s elements: `ceil(log2(s + 1))` span and work, and the
///   buffer becomes live (zero-filled) until the matching `Dealloc`.
#[derive(Clone, Debug)]
pub enum TaskNode {
    Leaf(LeafOp),
    Tick,
    Fork(Vec<TaskNode>),
    ParFor(Vec<TaskNode>),
    Seq(Vec<TaskNode>),
    Alloc { buf: BufferId, elems: u64 },
    Dealloc { buf: BufferId, elems: u64 },
}

impl TaskNode {
    pub fn empty() -> TaskNode {
        TaskNode::Seq(Vec::new())
    }
}

#[inline]
pub(crate) fn ceil_log2(k: u64) -> u64 {
    if k <= 1 {
        0
    } else {
        64 - (k - 1).leading_zeros() as u64
    }
}

/// Optional access recorder threaded through leaf execution.
pub(crate) struct Tracer<'a> {
    pub out: Option<&'a mut Vec<Access>>,
}

impl Tracer<'_> {
    pub(crate) fn none() -> Tracer<'static> {
        Tracer { out: None }
    }
    #[inline]
    fn read(&mut self, buf: BufferId, idx: usize) {
        if let Some(out) = self.out.as_deref_mut() {
            out.push(Access {
                buf,
                idx: idx as u64,
                write: false,
            });
        }
    }
    #[inline]
    fn write(&mut self, buf: BufferId, idx: usize) {
        if let Some(out) = self.out.as_deref_mut() {
            out.push(Access {
                buf,
                idx: idx as u64,
                write: true,
            });
        }
    }
}

/// Work of a leaf under the cost model.
pub(crate) fn leaf_work(op: &LeafOp) -> u64 {
    match op {
        LeafOp::MatMulAcc { x, u, .. } => x.rows as u64 * x.cols as u64 * u.cols as u64,
        LeafOp::AddBlock { len, .. } => *len as u64,
        LeafOp::ReduceBlock { planes, len, .. } => *len as u64 * planes.len() as u64,
        LeafOp::TensorContractAcc(c) => {
            let w = (c.dims.nu + c.dims.nv + c.dims.nx) as u32;
            (c.x.side as u64).pow(w)
        }
        LeafOp::Copy { .. } => 1,
        LeafOp::FlattenCopy(f) => f.t.elems(),
        LeafOp::Stub { cost, .. } => *cost,
    }
}

/// Span of a leaf. Serial inside, except the block reducer which combines
/// its r inputs in a tree: `B + ceil(log2 r)`.
pub(crate) fn leaf_span(op: &LeafOp) -> u64 {
    match op {
        LeafOp::ReduceBlock { planes, len, .. } => *len as u64 + ceil_log2(planes.len() as u64),
        other => leaf_work(other),
    }
}

/// Scalar multiply-adds performed by a leaf (the quantity the work-
/// invariance checks count; reducer additions and moves are excluded).
pub(crate) fn leaf_madds(op: &LeafOp) -> u64 {
    match op {
        LeafOp::MatMulAcc { .. } | LeafOp::TensorContractAcc { .. } => leaf_work(op),
        _ => 0,
    }
}

/// Addresses written by a leaf, independent of buffer contents.
pub(crate) fn leaf_writes(op: &LeafOp, out: &mut Vec<(BufferId, u64)>) {
    match op {
        LeafOp::MatMulAcc { x, .. } => {
            for idx in x.element_indices() {
                out.push((x.buf, idx as u64));
            }
        }
        LeafOp::AddBlock {
            dst,
            row,
            col0,
            len,
            ..
        } => {
            for j in 0..*len {
                out.push((dst.buf, dst.index(*row, col0 + j) as u64));
            }
        }
        LeafOp::ReduceBlock { planes, start, len } => {
            for j in 0..*len as u64 {
                out.push((planes[0], start + j));
            }
        }
        LeafOp::TensorContractAcc(c) => {
            for idx in c.x.element_indices() {
                out.push((c.x.buf, idx as u64));
            }
        }
        LeafOp::Copy {
            dst_buf, dst_idx, ..
        } => out.push((*dst_buf, *dst_idx)),
        LeafOp::FlattenCopy(f) => {
            if f.to_matrix {
                for idx in f.m.element_indices() {
                    out.push((f.m.buf, idx as u64));
                }
            } else {
                for idx in f.t.element_indices() {
                    out.push((f.t.buf, idx as u64));
                }
            }
        }
        LeafOp::Stub { writes, .. } => out.extend(writes.iter().copied()),
    }
}

/// Executes one leaf against the pool, optionally recording the access
/// trace. Loop orders are fixed, so execution is deterministic.
pub(crate) fn exec_leaf<S: Scalar>(op: &LeafOp, pool: &Pool<S>, tr: &mut Tracer<'_>) {
    match op {
        LeafOp::MatMulAcc { x, u, v } => {
            let inner = u.cols;
            for i in 0..x.rows {
                for j in 0..x.cols {
                    let xi = x.index(i, j);
                    tr.read(x.buf, xi);
                    let mut acc = pool.get(x.buf, xi);
                    for k in 0..inner {
                        let ui = u.index(i, k);
                        let vi = v.index(k, j);
                        tr.read(u.buf, ui);
                        tr.read(v.buf, vi);
                        acc = acc.add(pool.get(u.buf, ui).mul(pool.get(v.buf, vi)));
                    }
                    tr.write(x.buf, xi);
                    pool.set(x.buf, xi, acc);
                }
            }
        }
        LeafOp::AddBlock {
            dst,
            src,
            row,
            col0,
            len,
        } => {
            for j in 0..*len {
                let di = dst.index(*row, col0 + j);
                let si = src.index(*row, col0 + j);
                tr.read(src.buf, si);
                tr.read(dst.buf, di);
                let sum = pool.get(dst.buf, di).add(pool.get(src.buf, si));
                tr.write(dst.buf, di);
                pool.set(dst.buf, di, sum);
            }
        }
        LeafOp::ReduceBlock { planes, start, len } => {
            let mut sums = vec![S::zero(); *len as usize];
            for &p in planes.iter() {
                for (j, sum) in sums.iter_mut().enumerate() {
                    let idx = *start as usize + j;
                    tr.read(p, idx);
                    *sum = sum.add(pool.get(p, idx));
                }
            }
            for (j, s) in sums.into_iter().enumerate() {
                let idx = *start as usize + j;
                tr.write(planes[0], idx);
                pool.set(planes[0], idx, s);
            }
        }
        LeafOp::TensorContractAcc(c) => {
            exec_contract(&c.x, &c.u, &c.v, &c.dims, pool, tr);
        }
        LeafOp::Copy {
            dst_buf,
            dst_idx,
            src_buf,
            src_idx,
        } => {
            tr.read(*src_buf, *src_idx as usize);
            let val = pool.get(*src_buf, *src_idx as usize);
            tr.write(*dst_buf, *dst_idx as usize);
            pool.set(*dst_buf, *dst_idx as usize, val);
        }
        LeafOp::FlattenCopy(f) => {
            exec_flatten_row_major(&f.t, &f.m, f.row_axes as usize, f.to_matrix, pool, tr);
        }
        LeafOp::Stub { .. } => {}
    }
}

fn exec_contract<S: Scalar>(
    x: &TenView,
    u: &TenView,
    v: &TenView,
    dims: &ContractDims,
    pool: &Pool<S>,
    tr: &mut Tracer<'_>,
) {
    let n = x.side;
    let (nu, nv, nx) = (dims.nu as usize, dims.nv as usize, dims.nx as usize);
    let mut out = vec![0u32; nu + nv];
    let mut ucoords = vec![0u32; nu + nx];
    let mut vcoords = vec![0u32; nv + nx];
    let mut ks = vec![0u32; nx];
    loop {
        // out = (i_1..i_u, j_1..j_v) in the output's canonical axis order.
        let xi = x.index(&out);
        tr.read(x.buf, xi);
        let mut acc = pool.get(x.buf, xi);
        ks.fill(0);
        loop {
            for t in 0..nu {
                ucoords[dims.u_pos_i[t] as usize] = out[t];
            }
            for t in 0..nx {
                ucoords[dims.u_pos_k[t] as usize] = ks[t];
            }
            for t in 0..nv {
                vcoords[dims.v_pos_j[t] as usize] = out[nu + t];
            }
            for t in 0..nx {
                vcoords[dims.v_pos_k[t] as usize] = ks[t];
            }
            let ui = u.index(&ucoords);
            let vi = v.index(&vcoords);
            tr.read(u.buf, ui);
            tr.read(v.buf, vi);
            acc = acc.add(pool.get(u.buf, ui).mul(pool.get(v.buf, vi)));
            if !odometer(&mut ks, n) {
                break;
            }
        }
        tr.write(x.buf, xi);
        pool.set(x.buf, xi, acc);
        if !odometer(&mut out, n) {
            break;
        }
    }
}

/// Advances `coords` as a base-`n` odometer (last digit fastest); false on
/// wrap-around.
#[inline]
pub(crate) fn odometer(coords: &mut [u32], n: u32) -> bool {
    for c in coords.iter_mut().rev() {
        *c += 1;
        if *c < n {
            return true;
        }
        *c = 0;
    }
    false
}

fn exec_flatten_row_major<S: Scalar>(
    t: &TenView,
    m: &MatView,
    row_axes: usize,
    to_matrix: bool,
    pool: &Pool<S>,
    tr: &mut Tracer<'_>,
) {
    let d = t.order as usize;
    let n = t.side;
    let mut coords = vec![0u32; d];
    loop {
        let mut row = 0u64;
        for &c in &coords[..row_axes] {
            row = row * n as u64 + c as u64;
        }
        let mut col = 0u64;
        for &c in &coords[row_axes..] {
            col = col * n as u64 + c as u64;
        }
        let ti = t.index(&coords);
        let mi = m.index(row as u32, col as u32);
        if to_matrix {
            tr.read(t.buf, ti);
            let val = pool.get(t.buf, ti);
            tr.write(m.buf, mi);
            pool.set(m.buf, mi, val);
        } else {
            tr.read(m.buf, mi);
            let val = pool.get(m.buf, mi);
            tr.write(t.buf, ti);
            pool.set(t.buf, ti, val);
        }
        if !odometer(&mut coords, n) {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(0), 0);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(8), 3);
    }

    #[test]
    fn odometer_counts_in_lex_order() {
        let mut c = [0u32, 0];
        let mut seen = vec![c.to_vec()];
        while odometer(&mut c, 2) {
            seen.push(c.to_vec());
        }
        assert_eq!(seen, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
