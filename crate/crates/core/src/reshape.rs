//! Cache-oblivious tensor transposition, flattening, and deflattening.
//!
//! All three walk the operands by recursive halving, so every level moves
//! whole orthants and the leaves are single-element copies. Flattening maps
//! an index group to one matrix dimension through the per-level
//! [`linearize`](crate::tensor::linearize) bijection; composed over all
//! levels that is a Z-order interleaving of the group. Any bijection works
//! as long as both multiplication operands share the contracted-group
//! mapping, so a plain row-major scheme is available behind the same
//! interface.

use crate::error::{Error, Result};
use crate::matrix::MatView;
use crate::task::{FlattenLeaf, LeafOp, TaskNode};
use crate::tensor::{linearize, RankVector, TenView};

/// Builds `w <- r` transposed by `rv`: `w[x_1..x_d] = r[x_{rv_1}..x_{rv_d}]`,
/// i.e. source axis `j` of `r` becomes axis `rv[j]` of `w`.
pub fn tensor_transpose(w: TenView, r: TenView, rv: &RankVector) -> Result<TaskNode> {
    if w.order != r.order || w.side != r.side {
        return Err(Error::ShapeMismatch {
            what: "transpose operands",
        });
    }
    if rv.order() != w.order as usize {
        return Err(Error::NotAPermutation);
    }
    Ok(transpose_node(w, r, rv))
}

fn transpose_node(w: TenView, r: TenView, rv: &RankVector) -> TaskNode {
    let d = w.order as usize;
    if w.side == 1 {
        let zeros = vec![0u32; d];
        return TaskNode::Leaf(LeafOp::Copy {
            dst_buf: w.buf,
            dst_idx: w.index(&zeros) as u64,
            src_buf: r.buf,
            src_idx: r.index(&zeros) as u64,
        });
    }
    let mut children = Vec::with_capacity(1 << d);
    for combo in half_combos(d) {
        // Orthant p of the target pulls from orthant (p_{rv_1}, ..) of the
        // source.
        let src_combo: Vec<u8> = (1..=d).map(|j| combo[rv.rank_of(j) - 1]).collect();
        let wq = w.orthant(&combo).expect("side >= 2");
        let rq = r.orthant(&src_combo).expect("side >= 2");
        children.push(transpose_node(wq, rq, rv));
    }
    TaskNode::Seq(vec![TaskNode::Tick, TaskNode::ParFor(children)])
}

/// Flattening bijection between an index group and a matrix dimension.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum FlattenScheme {
    /// Per-level linearization (composes to Z-order); the default.
    Interleaved,
    /// Whole-group row-major mapping, as a single serial pass.
    RowMajor,
}

/// Builds `m <- t` where the first `row_axes` axes of `t` map to matrix
/// rows and the remaining `col_axes` to columns.
pub fn tensor_flatten(
    m: MatView,
    t: TenView,
    row_axes: usize,
    col_axes: usize,
) -> Result<TaskNode> {
    tensor_flatten_with(m, t, row_axes, col_axes, FlattenScheme::Interleaved)
}

pub fn tensor_flatten_with(
    m: MatView,
    t: TenView,
    row_axes: usize,
    col_axes: usize,
    scheme: FlattenScheme,
) -> Result<TaskNode> {
    check_flatten_shapes(&m, &t, row_axes, col_axes)?;
    Ok(match scheme {
        FlattenScheme::Interleaved => flatten_node(m, t, row_axes, true),
        FlattenScheme::RowMajor => TaskNode::Leaf(LeafOp::FlattenCopy(Box::new(FlattenLeaf {
            t,
            m,
            row_axes: row_axes as u8,
            to_matrix: true,
        }))),
    })
}

/// Builds `t <- m`, the exact inverse of [`tensor_flatten`].
pub fn tensor_deflatten(
    t: TenView,
    m: MatView,
    row_axes: usize,
    col_axes: usize,
) -> Result<TaskNode> {
    tensor_deflatten_with(t, m, row_axes, col_axes, FlattenScheme::Interleaved)
}

pub fn tensor_deflatten_with(
    t: TenView,
    m: MatView,
    row_axes: usize,
    col_axes: usize,
    scheme: FlattenScheme,
) -> Result<TaskNode> {
    check_flatten_shapes(&m, &t, row_axes, col_axes)?;
    Ok(match scheme {
        FlattenScheme::Interleaved => flatten_node(m, t, row_axes, false),
        FlattenScheme::RowMajor => TaskNode::Leaf(LeafOp::FlattenCopy(Box::new(FlattenLeaf {
            t,
            m,
            row_axes: row_axes as u8,
            to_matrix: false,
        }))),
    })
}

fn check_flatten_shapes(m: &MatView, t: &TenView, row_axes: usize, col_axes: usize) -> Result<()> {
    if row_axes + col_axes != t.order as usize {
        return Err(Error::ShapeMismatch {
            what: "flatten axis split",
        });
    }
    let rows = (t.side as u64).pow(row_axes as u32);
    let cols = (t.side as u64).pow(col_axes as u32);
    if m.rows as u64 != rows || m.cols as u64 != cols {
        return Err(Error::ShapeMismatch {
            what: "flatten matrix extents",
        });
    }
    Ok(())
}

fn flatten_node(m: MatView, t: TenView, row_axes: usize, to_matrix: bool) -> TaskNode {
    let d = t.order as usize;
    if t.side == 1 {
        let zeros = vec![0u32; d];
        let (ti, mi) = (t.index(&zeros) as u64, m.index(0, 0) as u64);
        let (dst_buf, dst_idx, src_buf, src_idx) = if to_matrix {
            (m.buf, mi, t.buf, ti)
        } else {
            (t.buf, ti, m.buf, mi)
        };
        return TaskNode::Leaf(LeafOp::Copy {
            dst_buf,
            dst_idx,
            src_buf,
            src_idx,
        });
    }
    let col_axes = d - row_axes;
    let block_rows = m.rows >> row_axes;
    let block_cols = m.cols >> col_axes;
    let mut children = Vec::with_capacity(1 << d);
    for combo in half_combos(d) {
        let row_block = linearize(&combo[..row_axes]) as u32; // 1-based
        let col_block = linearize(&combo[row_axes..]) as u32;
        let sub = MatView {
            buf: m.buf,
            row0: m.row0 + (row_block - 1) * block_rows,
            col0: m.col0 + (col_block - 1) * block_cols,
            rows: block_rows,
            cols: block_cols,
            stride: m.stride,
        };
        let tq = t.orthant(&combo).expect("side >= 2");
        children.push(flatten_node(sub, tq, row_axes, to_matrix));
    }
    TaskNode::Seq(vec![TaskNode::Tick, TaskNode::ParFor(children)])
}

/// All half-selector tuples of length `d` in lexicographic order;
/// `linearize` maps the i-th tuple to `i + 1`.
pub(crate) fn half_combos(d: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..(1u32 << d)).map(move |mask| {
        (0..d)
            .map(|j| 1 + ((mask >> (d - 1 - j)) & 1) as u8)
            .collect()
    })
}
