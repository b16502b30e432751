//! Tensor contraction kernels.
//!
//! A contraction combines a `(u + x)`-order tensor and a `(v + x)`-order
//! tensor into a `(u + v)`-order output by summing over the `x` shared
//! indices:
//!
//! `X[i.., j..] = sum over k.. of U{i.., k..} * V{j.., k..}`
//!
//! Operand axes may appear in any order; an [`AxisSpec`] names each axis's
//! group and subscript. The output's axes are always `(i_1..i_u, j_1..j_v)`.
//!
//! Kernels:
//! * [`tc_loop`] / [`tc_loop_permuted`] — iterative reference; any nesting
//!   order of the `w = u + v + x` loops gives the identical result in the
//!   exact ring.
//! * [`tc`] — in-place recursion: `2^x` sequential steps, each a parallel
//!   batch of `2^(u+v)` orthant subproblems.
//! * [`tc_hs`] — hybrid static: `r = (2^x)^i` plane instances; each split
//!   runs all `2^w` children in one parallel step, routing the `2^x`
//!   same-output children to disjoint plane sub-ranges chosen by
//!   linearizing the contracted half-selectors.
//! * [`tc_mm_opt`] — transpose both operands to group-major order, flatten
//!   to matrices, run the 2.5-D rectangular multiply, deflatten.

use crate::config::KernelConfig;
use crate::error::{Error, Result};
use crate::matrix::{Matrix, PlaneSet};
use crate::pool::{Pool, SpaceClass};
use crate::reshape::{
    half_combos, tensor_deflatten_with, tensor_flatten_with, tensor_transpose, FlattenScheme,
};
use crate::rmm::rmm_opt;
use crate::scalar::Scalar;
use crate::task::{exec_leaf, odometer, ContractDims, ContractLeaf, LeafOp, TaskNode, Tracer};
use crate::tensor::{
    linearize, AxisSpec, Group, RankVector, TenView, Tensor, TensorPlaneSet, MAX_ORDER,
};

/// Validated index-group structure of one contraction.
#[derive(Clone, Debug)]
pub struct Contraction {
    u_spec: AxisSpec,
    v_spec: AxisSpec,
    nu: usize,
    nv: usize,
    nx: usize,
}

impl Contraction {
    /// Builds a contraction from the two operands' axis roles. Requires at
    /// least one axis in each group: pure outer products (`x = 0`) are not
    /// supported, and kernels assume a non-empty `i` and `j` group.
    pub fn new(u_spec: AxisSpec, v_spec: AxisSpec) -> Result<Contraction> {
        if u_spec.count_of(Group::J) != 0 || v_spec.count_of(Group::I) != 0 {
            return Err(Error::BadAxisSpec {
                what: "left operand may only carry I/K axes, right operand J/K".into(),
            });
        }
        let nu = u_spec.count_of(Group::I);
        let nv = v_spec.count_of(Group::J);
        let nx = u_spec.count_of(Group::K);
        if nx == 0 {
            return Err(Error::UnsupportedOuterProduct);
        }
        if v_spec.count_of(Group::K) != nx {
            return Err(Error::BadAxisSpec {
                what: format!(
                    "contracted counts differ: {} vs {}",
                    nx,
                    v_spec.count_of(Group::K)
                ),
            });
        }
        if nu == 0 || nv == 0 {
            return Err(Error::BadAxisSpec {
                what: "kernels require at least one uncontracted axis per operand".into(),
            });
        }
        if nu + nv > MAX_ORDER || nu + nx > MAX_ORDER || nv + nx > MAX_ORDER {
            return Err(Error::BadAxisSpec {
                what: "tensor order exceeds supported max".into(),
            });
        }
        Ok(Contraction {
            u_spec,
            v_spec,
            nu,
            nv,
            nx,
        })
    }

    pub fn nu(&self) -> usize {
        self.nu
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    /// Total loop count w = u + v + x.
    pub fn w(&self) -> usize {
        self.nu + self.nv + self.nx
    }

    fn dims(&self) -> ContractDims {
        let mut d = ContractDims {
            nu: self.nu as u8,
            nv: self.nv as u8,
            nx: self.nx as u8,
            u_pos_i: [0; MAX_ORDER],
            u_pos_k: [0; MAX_ORDER],
            v_pos_j: [0; MAX_ORDER],
            v_pos_k: [0; MAX_ORDER],
        };
        for (t, pos) in self.u_spec.positions_of(Group::I).into_iter().enumerate() {
            d.u_pos_i[t] = pos as u8;
        }
        for (t, pos) in self.u_spec.positions_of(Group::K).into_iter().enumerate() {
            d.u_pos_k[t] = pos as u8;
        }
        for (t, pos) in self.v_spec.positions_of(Group::J).into_iter().enumerate() {
            d.v_pos_j[t] = pos as u8;
        }
        for (t, pos) in self.v_spec.positions_of(Group::K).into_iter().enumerate() {
            d.v_pos_k[t] = pos as u8;
        }
        d
    }

    fn validate_views(&self, x: &TenView, u: &TenView, v: &TenView) -> Result<u32> {
        if x.order as usize != self.nu + self.nv
            || u.order as usize != self.nu + self.nx
            || v.order as usize != self.nv + self.nx
        {
            return Err(Error::ShapeMismatch {
                what: "contraction operand orders",
            });
        }
        if x.side != u.side || x.side != v.side {
            return Err(Error::ShapeMismatch {
                what: "contraction operand sides",
            });
        }
        Ok(x.side)
    }

    /// Orthant selector for U given the `i` and `k` half choices.
    fn u_orthant(&self, d: &ContractDims, iv: &[u8], kv: &[u8]) -> Vec<u8> {
        let mut sel = vec![0u8; self.nu + self.nx];
        for (t, &h) in iv.iter().enumerate() {
            sel[d.u_pos_i[t] as usize] = h;
        }
        for (t, &h) in kv.iter().enumerate() {
            sel[d.u_pos_k[t] as usize] = h;
        }
        sel
    }

    fn v_orthant(&self, d: &ContractDims, jv: &[u8], kv: &[u8]) -> Vec<u8> {
        let mut sel = vec![0u8; self.nv + self.nx];
        for (t, &h) in jv.iter().enumerate() {
            sel[d.v_pos_j[t] as usize] = h;
        }
        for (t, &h) in kv.iter().enumerate() {
            sel[d.v_pos_k[t] as usize] = h;
        }
        sel
    }
}

/// Iterative reference contraction: zeroes `x`, then accumulates every
/// `k`-term serially per output cell.
pub fn tc_loop<S: Scalar>(
    pool: &Pool<S>,
    x: TenView,
    u: TenView,
    v: TenView,
    c: &Contraction,
) -> Result<()> {
    c.validate_views(&x, &u, &v)?;
    for idx in x.element_indices() {
        pool.set(x.buf, idx, S::zero());
    }
    exec_leaf(
        &LeafOp::TensorContractAcc(Box::new(ContractLeaf {
            x,
            u,
            v,
            dims: c.dims(),
        })),
        pool,
        &mut Tracer::none(),
    );
    Ok(())
}

/// [`tc_loop`] with the `w` nested loops reordered by `order`, a
/// permutation of `0..w` over the canonical sequence
/// `(i_1..i_u, j_1..j_v, k_1..k_x)`; `order[0]` becomes the outermost loop.
/// In the exact ring every ordering produces the identical output.
pub fn tc_loop_permuted<S: Scalar>(
    pool: &Pool<S>,
    x: TenView,
    u: TenView,
    v: TenView,
    c: &Contraction,
    order: &[usize],
) -> Result<()> {
    let n = c.validate_views(&x, &u, &v)?;
    let w = c.w();
    {
        let mut seen = vec![false; w];
        if order.len() != w
            || order
                .iter()
                .any(|&a| a >= w || std::mem::replace(&mut seen[a], true))
        {
            return Err(Error::InvalidLoopOrder);
        }
    }
    for idx in x.element_indices() {
        pool.set(x.buf, idx, S::zero());
    }
    let d = c.dims();
    let (nu, nv, nx) = (c.nu, c.nv, c.nx);
    let mut digits = vec![0u32; w];
    let mut canon = vec![0u32; w];
    let mut ucoords = vec![0u32; nu + nx];
    let mut vcoords = vec![0u32; nv + nx];
    loop {
        for (t, &axis) in order.iter().enumerate() {
            canon[axis] = digits[t];
        }
        for t in 0..nu {
            ucoords[d.u_pos_i[t] as usize] = canon[t];
        }
        for t in 0..nx {
            ucoords[d.u_pos_k[t] as usize] = canon[nu + nv + t];
        }
        for t in 0..nv {
            vcoords[d.v_pos_j[t] as usize] = canon[nu + t];
        }
        for t in 0..nx {
            vcoords[d.v_pos_k[t] as usize] = canon[nu + nv + t];
        }
        let xi = x.index(&canon[..nu + nv]);
        let prod = pool
            .get(u.buf, u.index(&ucoords))
            .mul(pool.get(v.buf, v.index(&vcoords)));
        pool.set(x.buf, xi, pool.get(x.buf, xi).add(prod));
        if !odometer(&mut digits, n) {
            break;
        }
    }
    Ok(())
}

/// In-place recursive contraction, `x += contraction(u, v)`. The base
/// kernel accumulates and never zeroes.
pub fn tc(
    x: TenView,
    u: TenView,
    v: TenView,
    c: &Contraction,
    cfg: &KernelConfig,
) -> Result<TaskNode> {
    c.validate_views(&x, &u, &v)?;
    Ok(tc_node(x, u, v, c, cfg))
}

fn footprint(x: &TenView, u: &TenView, v: &TenView) -> u64 {
    x.elems() + u.elems() + v.elems()
}

fn tc_node(x: TenView, u: TenView, v: TenView, c: &Contraction, cfg: &KernelConfig) -> TaskNode {
    if x.side == 1 || footprint(&x, &u, &v) <= cfg.tc_base_elems.max(3) {
        return TaskNode::Leaf(LeafOp::TensorContractAcc(Box::new(ContractLeaf {
            x,
            u,
            v,
            dims: c.dims(),
        })));
    }
    let d = c.dims();
    // 2^x sequential steps; each forks the 2^(u+v) output orthants.
    let mut steps = Vec::with_capacity(1 << c.nx);
    for kv in half_combos(c.nx) {
        let mut batch = Vec::with_capacity(1 << (c.nu + c.nv));
        for ij in half_combos(c.nu + c.nv) {
            let (iv, jv) = ij.split_at(c.nu);
            let xq = x.orthant(&ij).expect("side >= 2");
            let uq = u.orthant(&c.u_orthant(&d, iv, &kv)).expect("side >= 2");
            let vq = v.orthant(&c.v_orthant(&d, jv, &kv)).expect("side >= 2");
            batch.push(tc_node(xq, uq, vq, c, cfg));
        }
        steps.push(TaskNode::ParFor(batch));
    }
    let mut body = vec![TaskNode::Tick];
    body.extend(steps);
    TaskNode::Seq(body)
}

/// Validates `r = (2^x)^i` with `i` in `[0, log2 n]`.
fn validate_tc_planes(r: u32, n: u32, nx: usize) -> Result<()> {
    let ok = r >= 1
        && r.is_power_of_two()
        && (r.trailing_zeros() as usize).is_multiple_of(nx)
        && r as u64 <= (n as u64).pow(nx as u32);
    if !ok {
        return Err(Error::InvalidPlaneCount {
            got: r as u64,
            expect: format!("a power of 2^{nx} at most {}", (n as u64).pow(nx as u32)),
        });
    }
    Ok(())
}

/// Hybrid static contraction over `r` pre-allocated, zeroed tensor planes;
/// plane 0 holds the contraction after the final reduction.
pub fn tc_hs(
    planes: &TensorPlaneSet,
    u: TenView,
    v: TenView,
    c: &Contraction,
    cfg: &KernelConfig,
) -> Result<TaskNode> {
    let x0 = planes.plane(0).view();
    let n = c.validate_views(&x0, &u, &v)?;
    let r = planes.r();
    validate_tc_planes(r, n, c.nx)?;
    let compute = tc_hs_node(planes, x0, u, v, 0, r - 1, c, cfg);
    Ok(TaskNode::Seq(vec![compute, tc_reduce_r(planes, cfg.block)]))
}

#[allow(clippy::too_many_arguments)]
fn tc_hs_node(
    planes: &TensorPlaneSet,
    xrect: TenView,
    u: TenView,
    v: TenView,
    lo: u32,
    hi: u32,
    c: &Contraction,
    cfg: &KernelConfig,
) -> TaskNode {
    if lo == hi {
        return tc_node(xrect.with_buffer(planes.buffer(lo)), u, v, c, cfg);
    }
    let d = c.dims();
    // Split the plane range into 2^x partitions; the child working on
    // contracted halves kv takes partition linearize(kv).
    let parts = 1u32 << c.nx;
    let sub = (hi - lo + 1) / parts;
    let mut children = Vec::with_capacity(1 << c.w());
    for ij in half_combos(c.nu + c.nv) {
        let (iv, jv) = ij.split_at(c.nu);
        let xq = xrect.orthant(&ij).expect("side >= 2");
        for kv in half_combos(c.nx) {
            let p = linearize(&kv) as u32; // 1-based partition id
            let clo = lo + (p - 1) * sub;
            let chi = clo + sub - 1;
            let uq = u.orthant(&c.u_orthant(&d, iv, &kv)).expect("side >= 2");
            let vq = v.orthant(&c.v_orthant(&d, jv, &kv)).expect("side >= 2");
            children.push(tc_hs_node(planes, xq, uq, vq, clo, chi, c, cfg));
        }
    }
    TaskNode::Seq(vec![TaskNode::Tick, TaskNode::ParFor(children)])
}

/// Sums all tensor planes into plane 0 as a flattened elementwise
/// reduction. A no-op for a single plane.
pub fn tc_reduce_r(planes: &TensorPlaneSet, block: u32) -> TaskNode {
    if planes.r() <= 1 {
        return TaskNode::empty();
    }
    let block = block.max(1);
    let total = (planes.side as u64).pow(planes.order as u32);
    let mut blocks = Vec::with_capacity(total.div_ceil(block as u64) as usize);
    let mut start = 0u64;
    while start < total {
        let len = (block as u64).min(total - start) as u32;
        blocks.push(TaskNode::Leaf(LeafOp::ReduceBlock {
            planes: planes.buffers().clone(),
            start,
            len,
        }));
        start += len as u64;
    }
    TaskNode::ParFor(blocks)
}

/// Rank vectors that move the left operand's contracted axes to the back
/// and the right operand's to the front, each group ordered by subscript.
pub fn derive_rank_vectors(c: &Contraction) -> (RankVector, RankVector) {
    let mut u_ranks = vec![0usize; c.nu + c.nx];
    for (t, pos) in c.u_spec.positions_of(Group::I).into_iter().enumerate() {
        u_ranks[pos] = t + 1;
    }
    for (t, pos) in c.u_spec.positions_of(Group::K).into_iter().enumerate() {
        u_ranks[pos] = c.nu + t + 1;
    }
    let mut v_ranks = vec![0usize; c.nv + c.nx];
    for (t, pos) in c.v_spec.positions_of(Group::K).into_iter().enumerate() {
        v_ranks[pos] = t + 1;
    }
    for (t, pos) in c.v_spec.positions_of(Group::J).into_iter().enumerate() {
        v_ranks[pos] = c.nx + t + 1;
    }
    (
        RankVector::new(u_ranks).expect("bijective by construction"),
        RankVector::new(v_ranks).expect("bijective by construction"),
    )
}

/// Contraction via matrix multiplication: transpose each operand to
/// group-major axis order, flatten to `n^u x n^x` and `n^x x n^v` matrices,
/// multiply with the static-plane rectangular kernel on `r` planes, and
/// deflatten the product into `x` (whose axes must be canonical
/// `(i_1..i_u, j_1..j_v)`).
///
/// The contracted-group flattening bijection is shared between the two
/// matrix operands by construction; `scheme` selects which bijection, and
/// either choice yields the same contraction.
#[allow(clippy::too_many_arguments)]
pub fn tc_mm_opt<S: Scalar>(
    pool: &mut Pool<S>,
    x: TenView,
    u: TenView,
    v: TenView,
    c: &Contraction,
    r: u32,
    cfg: &KernelConfig,
    scheme: FlattenScheme,
) -> Result<TaskNode> {
    let n = c.validate_views(&x, &u, &v)?;
    let (nu, nv, nx) = (c.nu, c.nv, c.nx);
    let b = (n as u64).pow(nx as u32);
    if !r.is_power_of_two() || r as u64 > b {
        return Err(Error::InvalidPlaneCount {
            got: r as u64,
            expect: format!("a power of two in [1, {b}]"),
        });
    }
    let (rv_u, rv_v) = derive_rank_vectors(c);

    let ut = Tensor::alloc(pool, (nu + nx) as u8, n, SpaceClass::Workspace)?;
    let vt = Tensor::alloc(pool, (nv + nx) as u8, n, SpaceClass::Workspace)?;
    let a_rows = (n as u64).pow(nu as u32) as u32;
    let b_cols = (n as u64).pow(nv as u32) as u32;
    let a = Matrix::alloc(pool, a_rows, b as u32, SpaceClass::Workspace)?;
    let bm = Matrix::alloc(pool, b as u32, b_cols, SpaceClass::Workspace)?;
    let planes = PlaneSet::alloc(pool, r, a_rows, b_cols)?;

    let steps = vec![
        tensor_transpose(ut.view(), u, &rv_u)?,
        tensor_transpose(vt.view(), v, &rv_v)?,
        tensor_flatten_with(a.view(), ut.view(), nu, nx, scheme)?,
        tensor_flatten_with(bm.view(), vt.view(), nx, nv, scheme)?,
        rmm_opt(&planes, a.view(), bm.view(), cfg)?,
        tensor_deflatten_with(x, planes.plane_view(0), nu, nv, scheme)?,
    ];
    Ok(TaskNode::Seq(steps))
}

impl TenView {
    /// Same view metadata over a different (same-shape) buffer; used to
    /// address one plane of a tensor plane set.
    pub(crate) fn with_buffer(mut self, buf: crate::pool::BufferId) -> TenView {
        self.buf = buf;
        self
    }
}
