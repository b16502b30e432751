//! Independent reference computations for the integration suites. These
//! deliberately avoid the library's view/executor machinery: plain vectors,
//! plain loops.

#![allow(dead_code)]

use planefold::harness::seeded_rng;
use planefold::scalar::{Int31, Scalar};
use rand::RngCore;

/// The same seeded element stream the harness pours into its input
/// buffers: first all of U, then all of V.
pub fn seeded_pair(seed: u64, u_len: usize, v_len: usize) -> (Vec<Int31>, Vec<Int31>) {
    let mut rng = seeded_rng(seed);
    let u = (0..u_len)
        .map(|_| Int31::from_u64(rng.next_u64()))
        .collect();
    let v = (0..v_len)
        .map(|_| Int31::from_u64(rng.next_u64()))
        .collect();
    (u, v)
}

/// Plain row-major triple loop, no views, no task trees.
pub fn naive_matmul(a: usize, b: usize, c: usize, u: &[Int31], v: &[Int31]) -> Vec<Int31> {
    assert_eq!(u.len(), a * b);
    assert_eq!(v.len(), b * c);
    let mut x = vec![Int31(0); a * c];
    for i in 0..a {
        for j in 0..c {
            let mut acc = Int31(0);
            for k in 0..b {
                acc = acc.add(u[i * b + k].mul(v[k * c + j]));
            }
            x[i * c + j] = acc;
        }
    }
    x
}

/// Nested-sum contraction evaluator over group-major row-major buffers:
/// `U` has axes (i_1..i_u, k_1..k_x), `V` has (j_1..j_v, k_1..k_x), and the
/// output has (i_1..i_u, j_1..j_v), every axis of extent `n`.
pub fn naive_contract(
    nu: usize,
    nv: usize,
    nx: usize,
    n: usize,
    u: &[Int31],
    v: &[Int31],
) -> Vec<Int31> {
    assert_eq!(u.len(), n.pow((nu + nx) as u32));
    assert_eq!(v.len(), n.pow((nv + nx) as u32));
    let mut x = vec![Int31(0); n.pow((nu + nv) as u32)];
    let mut iv = vec![0usize; nu];
    loop {
        let mut jv = vec![0usize; nv];
        loop {
            let mut acc = Int31(0);
            let mut kv = vec![0usize; nx];
            loop {
                let ui = flat(&iv, &kv, n);
                let vi = flat(&jv, &kv, n);
                acc = acc.add(u[ui].mul(v[vi]));
                if !bump(&mut kv, n) {
                    break;
                }
            }
            x[flat(&iv, &jv, n)] = acc;
            if !bump(&mut jv, n) {
                break;
            }
        }
        if !bump(&mut iv, n) {
            break;
        }
    }
    x
}

fn flat(hi: &[usize], lo: &[usize], n: usize) -> usize {
    let mut idx = 0;
    for &c in hi.iter().chain(lo.iter()) {
        idx = idx * n + c;
    }
    idx
}

fn bump(coords: &mut [usize], n: usize) -> bool {
    for c in coords.iter_mut().rev() {
        *c += 1;
        if *c < n {
            return true;
        }
        *c = 0;
    }
    false
}
