//! Rectangular matrix multiplication.
//!
//! [`rmm`] splits the longest dimension: row and column splits run their two
//! halves in parallel (they write disjoint output strips), while a split of
//! the shared inner dimension runs sequentially because both halves update
//! the same output. [`rmm_opt`] removes that serial chain when extra planes
//! are available: with `r > 1` the inner-dimension split hands disjoint
//! plane sub-ranges to its halves and runs them in parallel.
//!
//! Ties between equal-longest dimensions resolve in the fixed order
//! rows (a), inner (b), cols (c), which makes the task tree deterministic.
//! One exception: while spare planes remain, the inner dimension only wins
//! a split when strictly longest, so that the subproblem reached when the
//! range hits one plane is exactly `(min(a, b/r), b/r, min(c, b/r))`.

use crate::config::KernelConfig;
use crate::error::{require_pow2, Error, Result};
use crate::matrix::{MatView, PlaneSet};
use crate::pool::BufferId;
use crate::task::{LeafOp, TaskNode};

fn conform(x: &MatView, u: &MatView, v: &MatView) -> Result<(u32, u32, u32)> {
    if x.rows != u.rows || x.cols != v.cols || u.cols != v.rows {
        return Err(Error::ShapeMismatch {
            what: "rectangular multiply operands",
        });
    }
    for dim in [x.rows, u.cols, x.cols] {
        require_pow2("matrix dimension", dim as u64)?;
    }
    Ok((x.rows, u.cols, x.cols))
}

/// Single-plane rectangular multiply, `x += u * v` with `x: a x c`,
/// `u: a x b`, `v: b x c`.
pub fn rmm(x: MatView, u: MatView, v: MatView, cfg: &KernelConfig) -> Result<TaskNode> {
    conform(&x, &u, &v)?;
    Ok(rmm_node(x, u, v, cfg))
}

fn rmm_node(x: MatView, u: MatView, v: MatView, cfg: &KernelConfig) -> TaskNode {
    let (a, b, c) = (x.rows, u.cols, x.cols);
    if a.max(b).max(c) <= cfg.base.max(1) {
        return TaskNode::Leaf(LeafOp::MatMulAcc { x, u, v });
    }
    let h = |m: MatView, half| m.row_half(half).expect("rows >= 2");
    let w = |m: MatView, half| m.col_half(half).expect("cols >= 2");
    let body = if a >= b.max(c) {
        TaskNode::ParFor(vec![
            rmm_node(h(x, 0), h(u, 0), v, cfg),
            rmm_node(h(x, 1), h(u, 1), v, cfg),
        ])
    } else if b >= a.max(c) {
        // Both halves accumulate into the same x: sequential.
        TaskNode::Seq(vec![
            rmm_node(x, w(u, 0), h(v, 0), cfg),
            rmm_node(x, w(u, 1), h(v, 1), cfg),
        ])
    } else {
        TaskNode::ParFor(vec![
            rmm_node(w(x, 0), u, w(v, 0), cfg),
            rmm_node(w(x, 1), u, w(v, 1), cfg),
        ])
    };
    TaskNode::Seq(vec![TaskNode::Tick, body])
}

/// Shape of the single-plane subproblems reached by [`rmm_opt`] when its
/// plane range narrows to one.
pub type BaseShape = (u32, u32, u32);

/// Hybrid static 2.5-D rectangular multiply over `r` pre-allocated, zeroed
/// `a x c` planes; plane 0 holds the product after the reduction.
pub fn rmm_opt(planes: &PlaneSet, u: MatView, v: MatView, cfg: &KernelConfig) -> Result<TaskNode> {
    rmm_opt_with_base_shapes(planes, u, v, cfg, &mut Vec::new())
}

/// Same as [`rmm_opt`], additionally recording the `(a, b, c)` shape at
/// every point where the recursion falls to a single plane.
pub fn rmm_opt_with_base_shapes(
    planes: &PlaneSet,
    u: MatView,
    v: MatView,
    cfg: &KernelConfig,
    base_shapes: &mut Vec<BaseShape>,
) -> Result<TaskNode> {
    let x0 = planes.plane_view(0);
    let (_, b, _) = conform(&x0, &u, &v)?;
    let r = planes.r();
    if !r.is_power_of_two() || r > b {
        return Err(Error::InvalidPlaneCount {
            got: r as u64,
            expect: format!("a power of two in [1, {b}]"),
        });
    }
    let rect = PlaneRect {
        row0: 0,
        col0: 0,
        rows: x0.rows,
        cols: x0.cols,
        stride: x0.cols,
    };
    let compute = rmm_opt_node(planes, rect, u, v, 0, r - 1, cfg, base_shapes);
    Ok(TaskNode::Seq(vec![
        compute,
        crate::mm::mm_reduce_r(planes, cfg.block),
    ]))
}

#[derive(Copy, Clone)]
struct PlaneRect {
    row0: u32,
    col0: u32,
    rows: u32,
    cols: u32,
    stride: u32,
}

impl PlaneRect {
    fn row_half(self, half: u32) -> PlaneRect {
        let h = self.rows / 2;
        PlaneRect {
            row0: self.row0 + half * h,
            rows: h,
            ..self
        }
    }
    fn col_half(self, half: u32) -> PlaneRect {
        let h = self.cols / 2;
        PlaneRect {
            col0: self.col0 + half * h,
            cols: h,
            ..self
        }
    }
    fn view_of(self, buf: BufferId) -> MatView {
        MatView {
            buf,
            row0: self.row0,
            col0: self.col0,
            rows: self.rows,
            cols: self.cols,
            stride: self.stride,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn rmm_opt_node(
    planes: &PlaneSet,
    rect: PlaneRect,
    u: MatView,
    v: MatView,
    lo: u32,
    hi: u32,
    cfg: &KernelConfig,
    base_shapes: &mut Vec<BaseShape>,
) -> TaskNode {
    let (a, b, c) = (rect.rows, u.cols, rect.cols);
    if lo == hi {
        base_shapes.push((a, b, c));
        return rmm_node(rect.view_of(planes.buffer(lo)), u, v, cfg);
    }
    let h = |m: MatView, half| m.row_half(half).expect("rows >= 2");
    let w = |m: MatView, half| m.col_half(half).expect("cols >= 2");
    // While planes remain, the inner dimension claims a split only when it
    // is strictly longest; ties go to the row/column splits, which keeps
    // the single-plane subproblems at exactly (min(a, b/r), b/r,
    // min(c, b/r)).
    let body = if a >= b.max(c) {
        TaskNode::ParFor(vec![
            rmm_opt_node(
                planes,
                rect.row_half(0),
                h(u, 0),
                v,
                lo,
                hi,
                cfg,
                base_shapes,
            ),
            rmm_opt_node(
                planes,
                rect.row_half(1),
                h(u, 1),
                v,
                lo,
                hi,
                cfg,
                base_shapes,
            ),
        ])
    } else if b > a.max(c) {
        // Spare planes let the inner split run its halves in parallel on
        // disjoint plane sub-ranges instead of chaining.
        let mid = (lo + hi) / 2;
        TaskNode::ParFor(vec![
            rmm_opt_node(planes, rect, w(u, 0), h(v, 0), lo, mid, cfg, base_shapes),
            rmm_opt_node(
                planes,
                rect,
                w(u, 1),
                h(v, 1),
                mid + 1,
                hi,
                cfg,
                base_shapes,
            ),
        ])
    } else {
        TaskNode::ParFor(vec![
            rmm_opt_node(
                planes,
                rect.col_half(0),
                u,
                w(v, 0),
                lo,
                hi,
                cfg,
                base_shapes,
            ),
            rmm_opt_node(
                planes,
                rect.col_half(1),
                u,
                w(v, 1),
                lo,
                hi,
                cfg,
                base_shapes,
            ),
        ])
    };
    TaskNode::Seq(vec![TaskNode::Tick, body])
}
