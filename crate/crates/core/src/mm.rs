//! Square matrix multiplication kernels.
//!
//! All recursive kernels accumulate (`X += U * V`); drivers zero outputs
//! before running. The family trades space for span:
//!
//! * [`mm`] — in-place 2-D recursion: two sequential parallel rounds of four
//!   quadrant subproblems, span Theta(n), space one plane.
//! * [`mm_hd`] — hybrid dynamic 2.5-D: allocates an auxiliary matrix per
//!   split at run time, sums it back with [`mm_reduce2`], r planes total.
//! * [`mm_opt`] — hybrid static 2.5-D: r pre-allocated planes, one 8-way
//!   parallel step per split with disjoint plane sub-ranges, then a single
//!   [`mm_reduce_r`] pass.
//! * [`mm_nd`] / [`mm_ns`] — the dynamic/static kernels at full scale
//!   `r = n` (3-D).
//! * [`mm_tradeoff`] — picks a plane count from the processor budget.

use crate::config::KernelConfig;
use crate::error::{require_pow2, Error, Result};
use crate::matrix::{MatView, Matrix, PlaneSet, Quadrant};
use crate::pool::{BufferId, Pool, SpaceClass};
use crate::scalar::Scalar;
use crate::task::{exec_leaf, LeafOp, TaskNode, Tracer};

/// Buffer-independent rectangle used while recursing over plane ranges.
#[derive(Copy, Clone, Debug)]
struct Rect {
    row0: u32,
    col0: u32,
    rows: u32,
    cols: u32,
    stride: u32,
}

impl Rect {
    fn full(rows: u32, cols: u32) -> Rect {
        Rect {
            row0: 0,
            col0: 0,
            rows,
            cols,
            stride: cols,
        }
    }

    fn quadrant(self, q: Quadrant) -> Rect {
        let h = self.rows / 2;
        let (rh, ch) = match q {
            Quadrant::Q11 => (0, 0),
            Quadrant::Q12 => (0, 1),
            Quadrant::Q21 => (1, 0),
            Quadrant::Q22 => (1, 1),
        };
        Rect {
            row0: self.row0 + rh * h,
            col0: self.col0 + ch * h,
            rows: h,
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

fn require_mm_conform(x: &MatView, u: &MatView, v: &MatView) -> Result<u32> {
    let n = x.rows;
    if x.cols != n || u.rows != n || u.cols != n || v.rows != n || v.cols != n {
        return Err(Error::ShapeMismatch {
            what: "square multiply operands",
        });
    }
    require_pow2("matrix side", n as u64)?;
    Ok(n)
}

fn require_rect_conform(x: &MatView, u: &MatView, v: &MatView) -> Result<(u32, u32, u32)> {
    if x.rows != u.rows || x.cols != v.cols || u.cols != v.rows {
        return Err(Error::ShapeMismatch {
            what: "rectangular multiply operands",
        });
    }
    for (what, dim) in [("a", x.rows), ("b", u.cols), ("c", x.cols)] {
        let _ = what;
        require_pow2("matrix dimension", dim as u64)?;
    }
    Ok((x.rows, u.cols, x.cols))
}

/// Serial accumulating triple loop, `x += u * v`. Also usable standalone as
/// the reference kernel for any conforming power-of-two shapes.
pub fn mm_loop<S: Scalar>(pool: &Pool<S>, x: MatView, u: MatView, v: MatView) -> Result<()> {
    require_rect_conform(&x, &u, &v)?;
    exec_leaf(&LeafOp::MatMulAcc { x, u, v }, pool, &mut Tracer::none());
    Ok(())
}

/// In-place 2-D recursion. Each internal node runs two sequential parallel
/// rounds of four quadrant subproblems; at or below the base threshold the
/// serial loop kernel takes over.
pub fn mm(x: MatView, u: MatView, v: MatView, cfg: &KernelConfig) -> Result<TaskNode> {
    require_mm_conform(&x, &u, &v)?;
    Ok(mm_node(x, u, v, cfg))
}

fn mm_node(x: MatView, u: MatView, v: MatView, cfg: &KernelConfig) -> TaskNode {
    if x.rows <= cfg.base.max(1) {
        return TaskNode::Leaf(LeafOp::MatMulAcc { x, u, v });
    }
    let q = |m: MatView, q| m.quadrant(q).expect("side >= 2");
    use Quadrant::*;
    let round1 = TaskNode::ParFor(vec![
        mm_node(q(x, Q11), q(u, Q11), q(v, Q11), cfg),
        mm_node(q(x, Q12), q(u, Q11), q(v, Q12), cfg),
        mm_node(q(x, Q21), q(u, Q21), q(v, Q11), cfg),
        mm_node(q(x, Q22), q(u, Q21), q(v, Q12), cfg),
    ]);
    let round2 = TaskNode::ParFor(vec![
        mm_node(q(x, Q11), q(u, Q12), q(v, Q21), cfg),
        mm_node(q(x, Q12), q(u, Q12), q(v, Q22), cfg),
        mm_node(q(x, Q21), q(u, Q22), q(v, Q21), cfg),
        mm_node(q(x, Q22), q(u, Q22), q(v, Q22), cfg),
    ]);
    TaskNode::Seq(vec![TaskNode::Tick, round1, round2])
}

/// Elementwise `x += y` as a parallel loop over rows and `ceil(cols / B)`
/// blocks, serial within a block.
pub fn mm_reduce2(x: MatView, y: MatView, block: u32) -> Result<TaskNode> {
    if x.rows != y.rows || x.cols != y.cols {
        return Err(Error::ShapeMismatch {
            what: "elementwise sum operands",
        });
    }
    let block = block.max(1);
    let mut rows = Vec::with_capacity(x.rows as usize);
    for i in 0..x.rows {
        let mut blocks = Vec::with_capacity(x.cols.div_ceil(block) as usize);
        let mut col0 = 0;
        while col0 < x.cols {
            let len = block.min(x.cols - col0);
            blocks.push(TaskNode::Leaf(LeafOp::AddBlock {
                dst: x,
                src: y,
                row: i,
                col0,
                len,
            }));
            col0 += len;
        }
        rows.push(TaskNode::ParFor(blocks));
    }
    Ok(TaskNode::ParFor(rows))
}

/// Sums all planes into plane 0 with per-block reducers over the plane
/// index. A no-op for a single plane.
pub fn mm_reduce_r(planes: &PlaneSet, block: u32) -> TaskNode {
    if planes.r() <= 1 {
        return TaskNode::empty();
    }
    let block = block.max(1);
    let cols = planes.cols;
    let mut rows = Vec::with_capacity(planes.rows as usize);
    for i in 0..planes.rows {
        let mut blocks = Vec::with_capacity(cols.div_ceil(block) as usize);
        let mut col0 = 0;
        while col0 < cols {
            let len = block.min(cols - col0);
            blocks.push(TaskNode::Leaf(LeafOp::ReduceBlock {
                planes: planes.buffers().clone(),
                start: i as u64 * cols as u64 + col0 as u64,
                len,
            }));
            col0 += len;
        }
        rows.push(TaskNode::ParFor(blocks));
    }
    TaskNode::ParFor(rows)
}

/// Hybrid dynamic 2.5-D multiply with a budget of `r` planes. Each split
/// allocates an auxiliary matrix of the current size at run time, hands the
/// low half of the plane budget to the four in-place children and the high
/// half to the four auxiliary children, then folds the auxiliary back.
pub fn mm_hd<S: Scalar>(
    pool: &mut Pool<S>,
    x: MatView,
    u: MatView,
    v: MatView,
    r: u32,
    cfg: &KernelConfig,
) -> Result<TaskNode> {
    let n = require_mm_conform(&x, &u, &v)?;
    validate_plane_count(r, n)?;
    Ok(mm_hd_node(pool, x, u, v, 0, r - 1, cfg))
}

fn mm_hd_node<S: Scalar>(
    pool: &mut Pool<S>,
    x: MatView,
    u: MatView,
    v: MatView,
    lo: u32,
    hi: u32,
    cfg: &KernelConfig,
) -> TaskNode {
    if lo == hi {
        return mm_node(x, u, v, cfg);
    }
    let mid = (lo + hi) / 2;
    let elems = x.rows as u64 * x.cols as u64;
    let y = Matrix::alloc(pool, x.rows, x.cols, SpaceClass::Dynamic).expect("pow2 by induction");
    let yv = y.view();
    let q = |m: MatView, q| m.quadrant(q).expect("side >= 2");
    use Quadrant::*;
    let children = TaskNode::ParFor(vec![
        mm_hd_node(pool, q(x, Q11), q(u, Q11), q(v, Q11), lo, mid, cfg),
        mm_hd_node(pool, q(x, Q12), q(u, Q11), q(v, Q12), lo, mid, cfg),
        mm_hd_node(pool, q(x, Q21), q(u, Q21), q(v, Q11), lo, mid, cfg),
        mm_hd_node(pool, q(x, Q22), q(u, Q21), q(v, Q12), lo, mid, cfg),
        mm_hd_node(pool, q(yv, Q11), q(u, Q12), q(v, Q21), mid + 1, hi, cfg),
        mm_hd_node(pool, q(yv, Q12), q(u, Q12), q(v, Q22), mid + 1, hi, cfg),
        mm_hd_node(pool, q(yv, Q21), q(u, Q22), q(v, Q21), mid + 1, hi, cfg),
        mm_hd_node(pool, q(yv, Q22), q(u, Q22), q(v, Q22), mid + 1, hi, cfg),
    ]);
    let reduce = mm_reduce2(x, yv, cfg.block).expect("same shape");
    TaskNode::Seq(vec![
        TaskNode::Tick,
        TaskNode::Alloc { buf: y.buf, elems },
        children,
        reduce,
        TaskNode::Dealloc { buf: y.buf, elems },
    ])
}

/// Hybrid static 2.5-D multiply over pre-allocated, zeroed planes. Plane 0
/// holds the product after the final reduction.
pub fn mm_opt(planes: &PlaneSet, u: MatView, v: MatView, cfg: &KernelConfig) -> Result<TaskNode> {
    let x0 = planes.plane_view(0);
    let n = require_mm_conform(&x0, &u, &v)?;
    let r = planes.r();
    validate_plane_count(r, n)?;
    let mut fault_once = cfg.overlap_fault;
    let compute = mm_opt_node(
        planes,
        Rect::full(n, n),
        u,
        v,
        0,
        r - 1,
        cfg,
        &mut fault_once,
    );
    Ok(TaskNode::Seq(vec![compute, mm_reduce_r(planes, cfg.block)]))
}

#[allow(clippy::too_many_arguments)]
fn mm_opt_node(
    planes: &PlaneSet,
    rect: Rect,
    u: MatView,
    v: MatView,
    lo: u32,
    hi: u32,
    cfg: &KernelConfig,
    fault_once: &mut bool,
) -> TaskNode {
    if lo == hi {
        return mm_node(rect.view_of(planes.buffer(lo)), u, v, cfg);
    }
    let mid = (lo + hi) / 2;
    // Under fault injection, the first two-plane split hands both groups
    // the same singleton range: a write-set overlap between sibling
    // subtrees that the race checker must catch.
    let (hlo, hhi) = if hi == lo + 1 && std::mem::take(fault_once) {
        (lo, lo)
    } else {
        (mid + 1, hi)
    };
    let q = |m: MatView, q| m.quadrant(q).expect("side >= 2");
    use Quadrant::*;
    let step = TaskNode::ParFor(vec![
        mm_opt_node(
            planes,
            rect.quadrant(Q11),
            q(u, Q11),
            q(v, Q11),
            lo,
            mid,
            cfg,
            fault_once,
        ),
        mm_opt_node(
            planes,
            rect.quadrant(Q12),
            q(u, Q11),
            q(v, Q12),
            lo,
            mid,
            cfg,
            fault_once,
        ),
        mm_opt_node(
            planes,
            rect.quadrant(Q21),
            q(u, Q21),
            q(v, Q11),
            lo,
            mid,
            cfg,
            fault_once,
        ),
        mm_opt_node(
            planes,
            rect.quadrant(Q22),
            q(u, Q21),
            q(v, Q12),
            lo,
            mid,
            cfg,
            fault_once,
        ),
        mm_opt_node(
            planes,
            rect.quadrant(Q11),
            q(u, Q12),
            q(v, Q21),
            hlo,
            hhi,
            cfg,
            fault_once,
        ),
        mm_opt_node(
            planes,
            rect.quadrant(Q12),
            q(u, Q12),
            q(v, Q22),
            hlo,
            hhi,
            cfg,
            fault_once,
        ),
        mm_opt_node(
            planes,
            rect.quadrant(Q21),
            q(u, Q22),
            q(v, Q21),
            hlo,
            hhi,
            cfg,
            fault_once,
        ),
        mm_opt_node(
            planes,
            rect.quadrant(Q22),
            q(u, Q22),
            q(v, Q22),
            hlo,
            hhi,
            cfg,
            fault_once,
        ),
    ]);
    TaskNode::Seq(vec![TaskNode::Tick, step])
}

/// Full not-in-place dynamic 3-D multiply: the dynamic kernel at `r = n`.
pub fn mm_nd<S: Scalar>(
    pool: &mut Pool<S>,
    x: MatView,
    u: MatView,
    v: MatView,
    cfg: &KernelConfig,
) -> Result<TaskNode> {
    let n = require_mm_conform(&x, &u, &v)?;
    mm_hd(pool, x, u, v, n, cfg)
}

/// Full not-in-place static 3-D multiply: the static kernel with `n` planes.
pub fn mm_ns(planes: &PlaneSet, u: MatView, v: MatView, cfg: &KernelConfig) -> Result<TaskNode> {
    if planes.r() != planes.rows {
        return Err(Error::InvalidPlaneCount {
            got: planes.r() as u64,
            expect: format!("exactly n = {} planes", planes.rows),
        });
    }
    mm_opt(planes, u, v, cfg)
}

fn validate_plane_count(r: u32, n: u32) -> Result<()> {
    if r == 0 || !r.is_power_of_two() || r > n {
        return Err(Error::InvalidPlaneCount {
            got: r as u64,
            expect: format!("a power of two in [1, {n}]"),
        });
    }
    Ok(())
}

/// How [`mm_tradeoff`] resolved a processor budget.
#[derive(Clone, Debug)]
pub struct TradeoffDispatch {
    pub tree: TaskNode,
    /// Buffer holding the product after the run (the output matrix or
    /// plane 0).
    pub output: BufferId,
    pub planes: Option<PlaneSet>,
    /// Plane count from the processor band, before rounding.
    pub band_r: u32,
    /// Plane count actually used (a power of two).
    pub chosen_r: u32,
    pub rounded_down: bool,
}

/// Dispatches on the processor count `p`: up to `n^2` processors run the
/// 2-D kernel on one plane; `(r-1) n^2 < p <= r n^2` selects the static
/// 2.5-D kernel with `r` planes (rounded down to a power of two); budgets
/// beyond `n^3` clamp to `r = n`.
pub fn mm_tradeoff<S: Scalar>(
    pool: &mut Pool<S>,
    u: MatView,
    v: MatView,
    p: u64,
    cfg: &KernelConfig,
) -> Result<TradeoffDispatch> {
    if u.rows != u.cols || v.rows != v.cols || u.rows != v.rows {
        return Err(Error::ShapeMismatch {
            what: "square multiply operands",
        });
    }
    let n = u.rows;
    require_pow2("matrix side", n as u64)?;
    let p = p.max(1);
    let n2 = n as u64 * n as u64;
    if p <= n2 {
        let x = Matrix::alloc(pool, n, n, SpaceClass::Workspace)?;
        let tree = mm(x.view(), u, v, cfg)?;
        return Ok(TradeoffDispatch {
            tree,
            output: x.buf,
            planes: None,
            band_r: 1,
            chosen_r: 1,
            rounded_down: false,
        });
    }
    let band_r = p.div_ceil(n2).min(n as u64) as u32;
    let chosen_r = prev_power_of_two(band_r);
    let planes = PlaneSet::alloc(pool, chosen_r, n, n)?;
    let tree = mm_opt(&planes, u, v, cfg)?;
    Ok(TradeoffDispatch {
        tree,
        output: planes.buffer(0),
        planes: Some(planes),
        band_r,
        chosen_r,
        rounded_down: chosen_r != band_r,
    })
}

fn prev_power_of_two(v: u32) -> u32 {
    debug_assert!(v >= 1);
    1 << (31 - v.leading_zeros())
}
