//! Cache simulator properties: LRU inclusion (monotonicity in M), the
//! cold-miss floor, and the square-root capacity scaling of the recursive
//! multiply's miss count.

mod common;

use planefold::cachesim::{distinct_lines, read_trace, simulate, write_trace, CacheConfig};
use planefold::engine::{run_instrumented, InstrumentOpts};
use planefold::harness::{build_mm_run, MmKernelKind};
use planefold::pool::BufferId;
use planefold::scalar::Int31;
use planefold::task::Access;
use planefold::KernelConfig;
use proptest::prelude::*;

fn mm_trace(n: u32, base: u32) -> Vec<Access> {
    let cfg = KernelConfig::default().with_base(base);
    let run = build_mm_run::<Int31>(MmKernelKind::Mm, n, 1, &cfg, 42).unwrap();
    let (_, trace) = run_instrumented(&run.tree, &run.pool, InstrumentOpts { trace: true });
    trace.expect("trace requested")
}

#[test]
fn mm_miss_ratio_tracks_inverse_sqrt_capacity() {
    // Quadrupling M should roughly halve the misses while n^2 well exceeds
    // M (the leading n^3 / (B sqrt(M)) term).
    let trace = mm_trace(16, 1);
    let q_small = simulate(&trace, &CacheConfig::new(256, 4)).unwrap();
    let q_large = simulate(&trace, &CacheConfig::new(1024, 4)).unwrap();
    let ratio = q_small as f64 / q_large as f64;
    assert!((1.5..=2.5).contains(&ratio), "Q1(256)/Q1(1024) = {ratio}");
}

#[test]
fn cold_miss_floor() {
    let trace = mm_trace(8, 8);
    let cfg = CacheConfig::new(1 << 20, 8);
    let q1 = simulate(&trace, &cfg).unwrap();
    assert_eq!(
        q1,
        distinct_lines(&trace, 8),
        "a huge cache leaves only cold misses"
    );
}

#[test]
fn doubling_the_line_size_halves_streaming_misses() {
    // A plane reduction is pure streaming: every line is touched once, so
    // Q1 is proportional to the line count.
    use planefold::matrix::PlaneSet;
    use planefold::pool::Pool;
    let mut pool: Pool<Int31> = Pool::new();
    let planes = PlaneSet::alloc(&mut pool, 4, 32, 32).unwrap();
    let tree = planefold::mm::mm_reduce_r(&planes, 8);
    let (_, trace) = run_instrumented(&tree, &pool, InstrumentOpts { trace: true });
    let trace = trace.unwrap();
    let q_b4 = simulate(&trace, &CacheConfig::new(256, 4)).unwrap();
    let q_b8 = simulate(&trace, &CacheConfig::new(256, 8)).unwrap();
    let ratio = q_b4 as f64 / q_b8 as f64;
    assert!((1.7..=2.3).contains(&ratio), "Q1(B=4)/Q1(B=8) = {ratio}");
}

#[test]
fn simulate_from_trace_file_matches_in_memory() {
    let trace = mm_trace(8, 8);
    let cfg = CacheConfig::new(256, 8);
    let path = std::env::temp_dir().join("planefold_trace_test.bin");
    let mut file = std::fs::File::create(&path).unwrap();
    write_trace(&trace, &mut file).unwrap();
    drop(file);
    let from_file = planefold::cachesim::simulate_file(&path, &cfg).unwrap();
    let _ = std::fs::remove_file(&path);
    assert_eq!(from_file, simulate(&trace, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// LRU inclusion: growing the capacity never adds misses.
    #[test]
    fn lru_monotone_in_capacity(
        addrs in prop::collection::vec((0u32..3, 0u64..256), 1..400),
        b_exp in 0u32..3,
        m_lines in 1u64..32,
    ) {
        let b = 1u64 << b_exp;
        let trace: Vec<Access> = addrs
            .iter()
            .map(|&(buf, idx)| Access { buf: BufferId(buf), idx, write: false })
            .collect();
        let mut cfg_small = CacheConfig::new(m_lines * b, b);
        cfg_small.allow_short_cache = true;
        let mut cfg_large = CacheConfig::new(2 * m_lines * b, b);
        cfg_large.allow_short_cache = true;
        let small = simulate(&trace, &cfg_small).unwrap();
        let large = simulate(&trace, &cfg_large).unwrap();
        prop_assert!(large <= small, "misses grew from {small} to {large} with more capacity");
        prop_assert!(large >= distinct_lines(&trace, b));
    }

    /// The binary trace encoding round-trips.
    #[test]
    fn trace_encoding_round_trips(
        addrs in prop::collection::vec((0u32..8, 0u64..1024, any::<bool>()), 0..100),
    ) {
        let trace: Vec<Access> = addrs
            .iter()
            .map(|&(buf, idx, write)| Access { buf: BufferId(buf), idx, write })
            .collect();
        let mut bytes = Vec::new();
        write_trace(&trace, &mut bytes).unwrap();
        let back = read_trace(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back, trace);
    }
}
