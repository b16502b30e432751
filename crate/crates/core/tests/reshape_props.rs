//! Transposition, flattening, and deflattening properties: the per-element
//! permutation law, inverse round trips, bijectivity of the flattening map,
//! and its Z-order composite.

mod common;

use planefold::engine::{run_instrumented, InstrumentOpts};
use planefold::matrix::Matrix;
use planefold::pool::{Pool, SpaceClass};
use planefold::reshape::{
    tensor_deflatten, tensor_flatten, tensor_flatten_with, tensor_transpose, FlattenScheme,
};
use planefold::scalar::Int31;
use planefold::tensor::{RankVector, Tensor};

fn run(tree: &planefold::task::TaskNode, pool: &Pool<Int31>) {
    run_instrumented(tree, pool, InstrumentOpts::default());
}

fn distinct_tensor(pool: &mut Pool<Int31>, order: u8, side: u32) -> Tensor {
    let t = Tensor::alloc(pool, order, side, SpaceClass::Workspace).unwrap();
    pool.fill_with(t.buf, |i| Int31(i as u32 + 1));
    t
}

#[test]
fn identity_rank_vector_copies() {
    let mut pool = Pool::new();
    let r = distinct_tensor(&mut pool, 3, 2);
    let w = Tensor::alloc(&mut pool, 3, 2, SpaceClass::Workspace).unwrap();
    let tree = tensor_transpose(w.view(), r.view(), &RankVector::identity(3)).unwrap();
    run(&tree, &pool);
    assert_eq!(pool.snapshot(w.buf), pool.snapshot(r.buf));
}

#[test]
fn rank_vector_swap_is_matrix_transpose() {
    let mut pool = Pool::new();
    let r = Tensor::alloc(&mut pool, 2, 2, SpaceClass::Workspace).unwrap();
    pool.fill(r.buf, &[Int31(1), Int31(2), Int31(3), Int31(4)]);
    let w = Tensor::alloc(&mut pool, 2, 2, SpaceClass::Workspace).unwrap();
    let rv = RankVector::new(vec![2, 1]).unwrap();
    let tree = tensor_transpose(w.view(), r.view(), &rv).unwrap();
    run(&tree, &pool);
    let got: Vec<u32> = pool.snapshot(w.buf).iter().map(|s| s.0).collect();
    assert_eq!(got, vec![1, 3, 2, 4]);
}

/// Element law: the transposed tensor satisfies
/// `w[y_1..y_d] = r[y_{rv(1)}, .., y_{rv(d)}]`.
#[test]
fn transpose_element_law_holds() {
    let mut pool = Pool::new();
    let rv = RankVector::new(vec![2, 3, 1]).unwrap();
    let r = distinct_tensor(&mut pool, 3, 4);
    let w = Tensor::alloc(&mut pool, 3, 4, SpaceClass::Workspace).unwrap();
    let tree = tensor_transpose(w.view(), r.view(), &rv).unwrap();
    run(&tree, &pool);
    for y0 in 0..4u32 {
        for y1 in 0..4u32 {
            for y2 in 0..4u32 {
                let y = [y0, y1, y2];
                let src = [
                    y[rv.rank_of(1) - 1],
                    y[rv.rank_of(2) - 1],
                    y[rv.rank_of(3) - 1],
                ];
                assert_eq!(w.get(&pool, &y), r.get(&pool, &src), "y={y:?}");
            }
        }
    }
}

/// The worked 5-D case: under rank vector [2,1,5,4,3] the source orthant
/// (1,1,2,2,1) lands at target orthant (1,1,1,2,2).
#[test]
fn five_dim_orthant_mapping() {
    let mut pool = Pool::new();
    let rv = RankVector::new(vec![2, 1, 5, 4, 3]).unwrap();
    let r = distinct_tensor(&mut pool, 5, 2);
    let w = Tensor::alloc(&mut pool, 5, 2, SpaceClass::Workspace).unwrap();
    let tree = tensor_transpose(w.view(), r.view(), &rv).unwrap();
    run(&tree, &pool);
    let src = r.view().orthant(&[1, 1, 2, 2, 1]).unwrap();
    let dst = w.view().orthant(&[1, 1, 1, 2, 2]).unwrap();
    let r_data = pool.snapshot(r.buf);
    let w_data = pool.snapshot(w.buf);
    let src_vals: Vec<Int31> = src
        .element_indices()
        .into_iter()
        .map(|i| r_data[i])
        .collect();
    let dst_vals: Vec<Int31> = dst
        .element_indices()
        .into_iter()
        .map(|i| w_data[i])
        .collect();
    // Orthants here are single elements (n = 2), so equality is direct.
    assert_eq!(src_vals, dst_vals);
}

#[test]
fn transpose_then_inverse_restores_input() {
    let mut pool = Pool::new();
    for (d, n, ranks) in [
        (3u8, 4u32, vec![2, 3, 1]),
        (4, 2, vec![1, 3, 2, 4]),
        (5, 2, vec![2, 1, 5, 4, 3]),
    ] {
        let rv = RankVector::new(ranks).unwrap();
        let r = distinct_tensor(&mut pool, d, n);
        let w = Tensor::alloc(&mut pool, d, n, SpaceClass::Workspace).unwrap();
        let back = Tensor::alloc(&mut pool, d, n, SpaceClass::Workspace).unwrap();
        run(&tensor_transpose(w.view(), r.view(), &rv).unwrap(), &pool);
        run(
            &tensor_transpose(back.view(), w.view(), &rv.inverse()).unwrap(),
            &pool,
        );
        assert_eq!(pool.snapshot(back.buf), pool.snapshot(r.buf), "d={d} n={n}");
        // Transposition permutes: same value multiset.
        let mut a = pool.snapshot(r.buf);
        let mut b = pool.snapshot(w.buf);
        a.sort_by_key(|s| s.0);
        b.sort_by_key(|s| s.0);
        assert_eq!(a, b);
    }
}

#[test]
fn flatten_single_element() {
    let mut pool = Pool::new();
    let t = distinct_tensor(&mut pool, 2, 1);
    let m = Matrix::alloc(&mut pool, 1, 1, SpaceClass::Workspace).unwrap();
    run(&tensor_flatten(m.view(), t.view(), 1, 1).unwrap(), &pool);
    assert_eq!(pool.snapshot(m.buf), pool.snapshot(t.buf));
}

#[test]
fn flatten_of_a_matrix_is_the_identity_layout() {
    let mut pool = Pool::new();
    let t = distinct_tensor(&mut pool, 2, 4);
    let m = Matrix::alloc(&mut pool, 4, 4, SpaceClass::Workspace).unwrap();
    run(&tensor_flatten(m.view(), t.view(), 1, 1).unwrap(), &pool);
    assert_eq!(pool.snapshot(m.buf), pool.snapshot(t.buf));
}

#[test]
fn flatten_mappings_are_bijective_and_invertible() {
    // s' = 2, s'' = 1, n = 2: enumerate all 8 cells.
    let mut pool = Pool::new();
    let t = distinct_tensor(&mut pool, 3, 2);
    let m = Matrix::alloc(&mut pool, 4, 2, SpaceClass::Workspace).unwrap();
    run(&tensor_flatten(m.view(), t.view(), 2, 1).unwrap(), &pool);
    let mut seen: Vec<u32> = pool.snapshot(m.buf).iter().map(|s| s.0).collect();
    seen.sort_unstable();
    assert_eq!(
        seen,
        (1..=8).collect::<Vec<_>>(),
        "all tensor cells land exactly once"
    );

    let back = Tensor::alloc(&mut pool, 3, 2, SpaceClass::Workspace).unwrap();
    run(
        &tensor_deflatten(back.view(), m.view(), 2, 1).unwrap(),
        &pool,
    );
    assert_eq!(pool.snapshot(back.buf), pool.snapshot(t.buf));
}

#[test]
fn flatten_inverts_deflatten_on_matrices() {
    // The matrix-side identity: deflatten into a tensor, flatten back.
    let mut pool = Pool::new();
    let m = Matrix::alloc(&mut pool, 8, 2, SpaceClass::Workspace).unwrap();
    pool.fill_with(m.buf, |i| Int31(i as u32 * 7 + 1));
    let t = Tensor::alloc(&mut pool, 4, 2, SpaceClass::Workspace).unwrap();
    run(&tensor_deflatten(t.view(), m.view(), 3, 1).unwrap(), &pool);
    let m2 = Matrix::alloc(&mut pool, 8, 2, SpaceClass::Workspace).unwrap();
    run(&tensor_flatten(m2.view(), t.view(), 3, 1).unwrap(), &pool);
    assert_eq!(pool.snapshot(m2.buf), pool.snapshot(m.buf));
}

/// The composite of the per-level linearization is a Z-order interleaving:
/// with two row axes of side 4, tensor cell (a, b, j) lands in matrix row
/// whose bits interleave a's and b's (a first).
#[test]
fn interleaved_flatten_composes_to_z_order() {
    let mut pool = Pool::new();
    let t = distinct_tensor(&mut pool, 3, 4);
    let m = Matrix::alloc(&mut pool, 16, 4, SpaceClass::Workspace).unwrap();
    run(&tensor_flatten(m.view(), t.view(), 2, 1).unwrap(), &pool);
    let morton2 = |a: u32, b: u32| -> u32 {
        // 2-bit coordinates -> 4-bit interleave, first axis more
        // significant at each level.
        let (a1, a0) = (a >> 1, a & 1);
        let (b1, b0) = (b >> 1, b & 1);
        (a1 << 3) | (b1 << 2) | (a0 << 1) | b0
    };
    for a in 0..4u32 {
        for b in 0..4u32 {
            for j in 0..4u32 {
                assert_eq!(
                    m.get(&pool, morton2(a, b), j),
                    t.get(&pool, &[a, b, j]),
                    "cell ({a},{b},{j})"
                );
            }
        }
    }
}

#[test]
fn row_major_flatten_round_trips_too() {
    let mut pool = Pool::new();
    let t = distinct_tensor(&mut pool, 3, 4);
    let m = Matrix::alloc(&mut pool, 16, 4, SpaceClass::Workspace).unwrap();
    run(
        &tensor_flatten_with(m.view(), t.view(), 2, 1, FlattenScheme::RowMajor).unwrap(),
        &pool,
    );
    // Row-major: row = a * 4 + b.
    assert_eq!(m.get(&pool, 6, 3), t.get(&pool, &[1, 2, 3]));
    let back = Tensor::alloc(&mut pool, 3, 4, SpaceClass::Workspace).unwrap();
    run(
        &planefold::reshape::tensor_deflatten_with(
            back.view(),
            m.view(),
            2,
            1,
            FlattenScheme::RowMajor,
        )
        .unwrap(),
        &pool,
    );
    assert_eq!(pool.snapshot(back.buf), pool.snapshot(t.buf));
}

#[test]
fn deflatten_inverts_flatten_on_random_tensors() {
    // n = 8 exercises the per-level bijection composed over three
    // recursion levels.
    let mut pool = Pool::new();
    let mut rng = planefold::harness::seeded_rng(99);
    for order in 2u8..=4 {
        for n in [2u32, 4, 8] {
            for row_axes in 1..order as usize {
                let t = Tensor::alloc(&mut pool, order, n, SpaceClass::Workspace).unwrap();
                planefold::harness::fill_random(&mut pool, t.buf, &mut rng);
                let rows = n.pow(row_axes as u32);
                let cols = n.pow(order as u32 - row_axes as u32);
                let m = Matrix::alloc(&mut pool, rows, cols, SpaceClass::Workspace).unwrap();
                run(
                    &tensor_flatten(m.view(), t.view(), row_axes, order as usize - row_axes)
                        .unwrap(),
                    &pool,
                );
                let back = Tensor::alloc(&mut pool, order, n, SpaceClass::Workspace).unwrap();
                run(
                    &tensor_deflatten(back.view(), m.view(), row_axes, order as usize - row_axes)
                        .unwrap(),
                    &pool,
                );
                assert_eq!(
                    pool.snapshot(back.buf),
                    pool.snapshot(t.buf),
                    "order={order} n={n} rows={row_axes}"
                );
            }
        }
    }
}
