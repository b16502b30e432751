//! Standardized kernel runs for the CLI and the test suites: seeded input
//! generation, one builder per kernel, and the oracle-equivalence /
//! race-freedom verification grids.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cachesim::{simulate, CacheConfig};
use crate::config::KernelConfig;
use crate::engine::{check_race_freedom, run_instrumented, InstrumentOpts};
use crate::error::Result;
use crate::matrix::{Matrix, PlaneSet};
use crate::mm;
use crate::pool::{BufferId, Pool, SpaceClass};
use crate::reshape::FlattenScheme;
use crate::scalar::{Int31, Scalar};
use crate::task::TaskNode;
use crate::tc::{self, Contraction};
use crate::tensor::{AxisSpec, Group, Tensor, TensorPlaneSet};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fill_random<S: Scalar>(pool: &mut Pool<S>, buf: BufferId, rng: &mut impl RngCore) {
    pool.fill_with(buf, |_| S::from_u64(rng.next_u64()));
}

/// The square multiply family.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum MmKernelKind {
    Mm,
    MmHd,
    MmOpt,
    MmNd,
    MmNs,
    MmTradeoff,
}

impl MmKernelKind {
    pub const ALL: [MmKernelKind; 6] = [
        MmKernelKind::Mm,
        MmKernelKind::MmHd,
        MmKernelKind::MmOpt,
        MmKernelKind::MmNd,
        MmKernelKind::MmNs,
        MmKernelKind::MmTradeoff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MmKernelKind::Mm => "mm",
            MmKernelKind::MmHd => "mm-hd",
            MmKernelKind::MmOpt => "mm-opt",
            MmKernelKind::MmNd => "mm-nd",
            MmKernelKind::MmNs => "mm-ns",
            MmKernelKind::MmTradeoff => "mm-tradeoff",
        }
    }

    pub fn parse(s: &str) -> Option<MmKernelKind> {
        MmKernelKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Legal sweep values for the kernel's second parameter at side `n`:
    /// plane counts for the plane kernels, processor budgets for the
    /// trade-off dispatcher, and a single placeholder for the fixed kernels.
    pub fn param_sweep(self, n: u32) -> Vec<u64> {
        let n = n as u64;
        match self {
            MmKernelKind::Mm => vec![1],
            MmKernelKind::MmHd | MmKernelKind::MmOpt => {
                (0..=n.ilog2()).map(|e| 1u64 << e).collect()
            }
            MmKernelKind::MmNd | MmKernelKind::MmNs => vec![n],
            MmKernelKind::MmTradeoff => {
                vec![1, n * n, n * n + 1, 3 * n * n, n * n * n, 2 * n * n * n]
            }
        }
    }
}

/// A kernel run ready for execution: pool, tree, and where the product
/// lands.
pub struct MmRun<S: Scalar> {
    pub pool: Pool<S>,
    pub tree: TaskNode,
    pub output: BufferId,
    pub n: u32,
    /// Planes actually used (1 for the in-place and dynamic kernels'
    /// output).
    pub r: u32,
}

/// Builds one square-multiply run with seeded inputs. `param` is the plane
/// count for the plane kernels and the processor budget for the trade-off
/// dispatcher; the fixed kernels ignore it.
pub fn build_mm_run<S: Scalar>(
    kind: MmKernelKind,
    n: u32,
    param: u64,
    cfg: &KernelConfig,
    seed: u64,
) -> Result<MmRun<S>> {
    let mut pool: Pool<S> = Pool::new();
    let mut rng = seeded_rng(seed);
    let u = Matrix::alloc(&mut pool, n, n, SpaceClass::Input)?;
    let v = Matrix::alloc(&mut pool, n, n, SpaceClass::Input)?;
    fill_random(&mut pool, u.buf, &mut rng);
    fill_random(&mut pool, v.buf, &mut rng);
    let (tree, output, r) = match kind {
        MmKernelKind::Mm => {
            let x = Matrix::alloc(&mut pool, n, n, SpaceClass::Workspace)?;
            (mm::mm(x.view(), u.view(), v.view(), cfg)?, x.buf, 1)
        }
        MmKernelKind::MmHd => {
            let x = Matrix::alloc(&mut pool, n, n, SpaceClass::Workspace)?;
            (
                mm::mm_hd(&mut pool, x.view(), u.view(), v.view(), param as u32, cfg)?,
                x.buf,
                param as u32,
            )
        }
        MmKernelKind::MmOpt => {
            let planes = PlaneSet::alloc(&mut pool, param as u32, n, n)?;
            (
                mm::mm_opt(&planes, u.view(), v.view(), cfg)?,
                planes.buffer(0),
                param as u32,
            )
        }
        MmKernelKind::MmNd => {
            let x = Matrix::alloc(&mut pool, n, n, SpaceClass::Workspace)?;
            (
                mm::mm_nd(&mut pool, x.view(), u.view(), v.view(), cfg)?,
                x.buf,
                n,
            )
        }
        MmKernelKind::MmNs => {
            let planes = PlaneSet::alloc(&mut pool, n, n, n)?;
            (
                mm::mm_ns(&planes, u.view(), v.view(), cfg)?,
                planes.buffer(0),
                n,
            )
        }
        MmKernelKind::MmTradeoff => {
            let d = mm::mm_tradeoff(&mut pool, u.view(), v.view(), param, cfg)?;
            (d.tree, d.output, d.chosen_r)
        }
    };
    Ok(MmRun {
        pool,
        tree,
        output,
        n,
        r,
    })
}

/// Product of the seeded inputs by the serial reference loop, in a fresh
/// pool.
pub fn mm_reference<S: Scalar>(n: u32, seed: u64) -> Vec<S> {
    let mut pool: Pool<S> = Pool::new();
    let mut rng = seeded_rng(seed);
    let u = Matrix::alloc(&mut pool, n, n, SpaceClass::Input).expect("pow2 side");
    let v = Matrix::alloc(&mut pool, n, n, SpaceClass::Input).expect("pow2 side");
    fill_random(&mut pool, u.buf, &mut rng);
    fill_random(&mut pool, v.buf, &mut rng);
    let x = Matrix::alloc(&mut pool, n, n, SpaceClass::Workspace).expect("pow2 side");
    mm::mm_loop(&pool, x.view(), u.view(), v.view()).expect("conforming");
    pool.snapshot(x.buf)
}

/// Contraction with both operands in group-major axis order.
pub fn canonical_contraction(u: usize, v: usize, x: usize) -> Result<Contraction> {
    let mut u_roles = Vec::with_capacity(u + x);
    for t in 1..=u {
        u_roles.push((Group::I, t as u8));
    }
    for t in 1..=x {
        u_roles.push((Group::K, t as u8));
    }
    let mut v_roles = Vec::with_capacity(v + x);
    for t in 1..=v {
        v_roles.push((Group::J, t as u8));
    }
    for t in 1..=x {
        v_roles.push((Group::K, t as u8));
    }
    Contraction::new(AxisSpec::new(u_roles)?, AxisSpec::new(v_roles)?)
}

/// The contraction kernel family.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum TcKernelKind {
    Tc,
    TcHs,
    TcMmOpt,
}

impl TcKernelKind {
    pub const ALL: [TcKernelKind; 3] =
        [TcKernelKind::Tc, TcKernelKind::TcHs, TcKernelKind::TcMmOpt];

    pub fn name(self) -> &'static str {
        match self {
            TcKernelKind::Tc => "tc",
            TcKernelKind::TcHs => "tc-hs",
            TcKernelKind::TcMmOpt => "tc-mm-opt",
        }
    }

    pub fn parse(s: &str) -> Option<TcKernelKind> {
        TcKernelKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Legal plane counts at side `n` for index-group sizes `(u, v, x)`.
    pub fn param_sweep(self, n: u32, x: usize) -> Vec<u64> {
        let nx = (n as u64).pow(x as u32);
        match self {
            TcKernelKind::Tc => vec![1],
            TcKernelKind::TcHs => {
                let radix = 1u64 << x;
                let mut r = 1;
                let mut out = Vec::new();
                while r <= nx {
                    out.push(r);
                    r *= radix;
                }
                out
            }
            TcKernelKind::TcMmOpt => (0..=nx.ilog2()).map(|e| 1u64 << e).collect(),
        }
    }
}

pub struct TcRun<S: Scalar> {
    pub pool: Pool<S>,
    pub tree: TaskNode,
    pub output: BufferId,
    pub n: u32,
    pub r: u32,
}

/// Builds one contraction run with seeded group-major inputs.
pub fn build_tc_run<S: Scalar>(
    kind: TcKernelKind,
    shape: (usize, usize, usize),
    n: u32,
    r: u64,
    cfg: &KernelConfig,
    seed: u64,
) -> Result<TcRun<S>> {
    let (nu, nv, nx) = shape;
    let c = canonical_contraction(nu, nv, nx)?;
    let mut pool: Pool<S> = Pool::new();
    let mut rng = seeded_rng(seed);
    let uu = Tensor::alloc(&mut pool, (nu + nx) as u8, n, SpaceClass::Input)?;
    let vv = Tensor::alloc(&mut pool, (nv + nx) as u8, n, SpaceClass::Input)?;
    fill_random(&mut pool, uu.buf, &mut rng);
    fill_random(&mut pool, vv.buf, &mut rng);
    let (tree, output) = match kind {
        TcKernelKind::Tc => {
            let x = Tensor::alloc(&mut pool, (nu + nv) as u8, n, SpaceClass::Workspace)?;
            (tc::tc(x.view(), uu.view(), vv.view(), &c, cfg)?, x.buf)
        }
        TcKernelKind::TcHs => {
            let planes = TensorPlaneSet::alloc(&mut pool, r as u32, (nu + nv) as u8, n)?;
            (
                tc::tc_hs(&planes, uu.view(), vv.view(), &c, cfg)?,
                planes.buffer(0),
            )
        }
        TcKernelKind::TcMmOpt => {
            let x = Tensor::alloc(&mut pool, (nu + nv) as u8, n, SpaceClass::Workspace)?;
            let tree = tc::tc_mm_opt(
                &mut pool,
                x.view(),
                uu.view(),
                vv.view(),
                &c,
                r as u32,
                cfg,
                FlattenScheme::Interleaved,
            )?;
            (tree, x.buf)
        }
    };
    Ok(TcRun {
        pool,
        tree,
        output,
        n,
        r: r as u32,
    })
}

/// Contraction of the seeded inputs by the iterative reference loop.
pub fn tc_reference<S: Scalar>(shape: (usize, usize, usize), n: u32, seed: u64) -> Vec<S> {
    let (nu, nv, nx) = shape;
    let c = canonical_contraction(nu, nv, nx).expect("valid shape");
    let mut pool: Pool<S> = Pool::new();
    let mut rng = seeded_rng(seed);
    let uu = Tensor::alloc(&mut pool, (nu + nx) as u8, n, SpaceClass::Input).expect("valid");
    let vv = Tensor::alloc(&mut pool, (nv + nx) as u8, n, SpaceClass::Input).expect("valid");
    fill_random(&mut pool, uu.buf, &mut rng);
    fill_random(&mut pool, vv.buf, &mut rng);
    let x = Tensor::alloc(&mut pool, (nu + nv) as u8, n, SpaceClass::Workspace).expect("valid");
    tc::tc_loop(&pool, x.view(), uu.view(), vv.view(), &c).expect("conforming");
    pool.snapshot(x.buf)
}

/// One verification outcome: bit-exact agreement with the reference loop
/// and a clean race check.
#[derive(Clone, Debug)]
pub struct VerifyRow {
    pub kernel: &'static str,
    pub n: u32,
    pub shape: Option<(usize, usize, usize)>,
    pub param: u64,
    pub oracle_ok: bool,
    pub race_ok: bool,
}

impl VerifyRow {
    pub fn ok(&self) -> bool {
        self.oracle_ok && self.race_ok
    }
}

/// Runs the square-multiply verification grid in the exact integer ring.
pub fn verify_mm_grid(
    kinds: &[MmKernelKind],
    sides: &[u32],
    cfg: &KernelConfig,
    seed: u64,
) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for &n in sides {
        let reference = mm_reference::<Int31>(n, seed);
        for &kind in kinds {
            for param in kind.param_sweep(n) {
                let run = build_mm_run::<Int31>(kind, n, param, cfg, seed)?;
                let race_ok = check_race_freedom(&run.tree).is_ok();
                run_instrumented(&run.tree, &run.pool, InstrumentOpts::default());
                let oracle_ok = run.pool.snapshot(run.output) == reference;
                rows.push(VerifyRow {
                    kernel: kind.name(),
                    n,
                    shape: None,
                    param,
                    oracle_ok,
                    race_ok,
                });
            }
        }
    }
    Ok(rows)
}

/// Runs the contraction verification grid in the exact integer ring.
pub fn verify_tc_grid(
    kinds: &[TcKernelKind],
    shapes: &[(usize, usize, usize)],
    sides: &[u32],
    cfg: &KernelConfig,
    seed: u64,
) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for &shape in shapes {
        for &n in sides {
            let reference = tc_reference::<Int31>(shape, n, seed);
            for &kind in kinds {
                for r in kind.param_sweep(n, shape.2) {
                    let run = build_tc_run::<Int31>(kind, shape, n, r, cfg, seed)?;
                    let race_ok = check_race_freedom(&run.tree).is_ok();
                    run_instrumented(&run.tree, &run.pool, InstrumentOpts::default());
                    let oracle_ok = run.pool.snapshot(run.output) == reference;
                    rows.push(VerifyRow {
                        kernel: kind.name(),
                        n,
                        shape: Some(shape),
                        param: r,
                        oracle_ok,
                        race_ok,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// One cache-scan measurement.
#[derive(Clone, Debug)]
pub struct CacheScanRow {
    pub m_words: u64,
    pub b_words: u64,
    pub q1: u64,
}

/// Measures Q1 of one kernel trace at each cache capacity in `m_list`.
pub fn cache_scan<S: Scalar>(
    kind: MmKernelKind,
    n: u32,
    m_list: &[u64],
    b_words: u64,
    cfg: &KernelConfig,
    seed: u64,
) -> Result<Vec<CacheScanRow>> {
    let param = kind.param_sweep(n)[0];
    let run = build_mm_run::<S>(kind, n, param, cfg, seed)?;
    let (_, trace) = run_instrumented(&run.tree, &run.pool, InstrumentOpts { trace: true });
    let trace = trace.expect("trace requested");
    m_list
        .iter()
        .map(|&m| {
            let q1 = simulate(&trace, &CacheConfig::new(m, b_words))?;
            Ok(CacheScanRow {
                m_words: m,
                b_words,
                q1,
            })
        })
        .collect()
}
