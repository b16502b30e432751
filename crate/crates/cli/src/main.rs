//! Command-line driver: verification suites, space-span trade-off sweeps,
//! and cache scans.
//!
//! Exit codes: 0 = all checks passed, 1 = a check failed, 2 = usage error.

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use planefold::analytics::tradeoff_table;
use planefold::harness::{cache_scan, verify_mm_grid, verify_tc_grid, MmKernelKind, TcKernelKind};
use planefold::KernelConfig;

#[derive(Parser)]
#[command(
    name = "planefold",
    version,
    about = "Fork-join MM/TC kernel benchmarks and checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run oracle-equivalence and race-freedom suites (exact integer mode).
    Verify(VerifyArgs),
    /// Sweep the static-plane multiply over r and emit the space-span CSV.
    Tradeoff(TradeoffArgs),
    /// Measure Q1 of one kernel across cache capacities and emit a CSV.
    Cachescan(CachescanArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Kernel to verify (mm, mm-hd, mm-opt, mm-nd, mm-ns, mm-tradeoff, tc,
    /// tc-hs, tc-mm-opt); use --all for the whole grid.
    kernel: Option<String>,
    /// Verify every kernel on the default grid.
    #[arg(long)]
    all: bool,
    /// Matrix/tensor side; may repeat. Defaults to the kernel's grid.
    #[arg(long = "n")]
    n: Vec<u32>,
    /// Plane count (or processor budget for mm-tradeoff); defaults to the
    /// full legal sweep.
    #[arg(long = "r")]
    r: Option<u64>,
    /// Contraction index-group sizes for the tc kernels.
    #[arg(long, default_value_t = 1)]
    u: usize,
    #[arg(long, default_value_t = 1)]
    v: usize,
    #[arg(long, default_value_t = 1)]
    x: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Serial base-case side for the recursive kernels.
    #[arg(long, default_value_t = 8)]
    base: u32,
    /// Reduction data block size B.
    #[arg(long = "B", default_value_t = 8)]
    block: u32,
    /// Overlap sibling plane ranges to demonstrate race detection; the run
    /// then fails with a reported violation.
    #[arg(long)]
    inject_fault: bool,
}

#[derive(Args)]
struct TradeoffArgs {
    #[arg(long = "n", default_value_t = 32)]
    n: u32,
    /// Plane counts to sweep, comma separated; defaults to all powers of
    /// two up to n.
    #[arg(long = "r", value_delimiter = ',')]
    r: Vec<u32>,
    /// Cache capacity in words.
    #[arg(long = "M", default_value_t = 512)]
    m: u64,
    /// Cache line size in words (also the reduction block size).
    #[arg(long = "B", default_value_t = 8)]
    b: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Serial base-case side; 1 exposes the full recursive span.
    #[arg(long, default_value_t = 1)]
    base: u32,
    #[arg(long, value_enum, default_value_t = ScalarMode::F64)]
    scalar: ScalarMode,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct CachescanArgs {
    /// Kernel to trace.
    #[arg(long, default_value = "mm")]
    kernel: String,
    #[arg(long = "n", default_value_t = 64)]
    n: u32,
    /// Cache capacities in words, comma separated.
    #[arg(long = "M", value_delimiter = ',', default_values_t = [512u64, 1024, 2048])]
    m: Vec<u64>,
    #[arg(long = "B", default_value_t = 8)]
    b: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    base: u32,
    #[arg(long, value_enum, default_value_t = ScalarMode::F64)]
    scalar: ScalarMode,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ScalarMode {
    Int,
    F64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Tradeoff(a) => cmd_tradeoff(a),
        Cmd::Cachescan(a) => cmd_cachescan(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

const TC_SHAPES: [(usize, usize, usize); 5] =
    [(1, 1, 1), (1, 1, 2), (2, 1, 1), (1, 2, 1), (2, 2, 2)];

fn cmd_verify(a: VerifyArgs) -> planefold::Result<bool> {
    let cfg = KernelConfig {
        base: a.base,
        block: a.block,
        overlap_fault: a.inject_fault,
        ..KernelConfig::default()
    };
    let mut rows = Vec::new();

    let mm_sides: Vec<u32> = if a.n.is_empty() {
        vec![2, 4, 8, 16]
    } else {
        a.n.clone()
    };
    let tc_sides: Vec<u32> = if a.n.is_empty() {
        vec![2, 4]
    } else {
        a.n.clone()
    };

    let selected = a.kernel.as_deref();
    let run_all = a.all || selected.is_none();

    let mm_kinds: Vec<MmKernelKind> = if run_all {
        MmKernelKind::ALL.to_vec()
    } else {
        selected.and_then(MmKernelKind::parse).into_iter().collect()
    };
    let tc_kinds: Vec<TcKernelKind> = if run_all {
        TcKernelKind::ALL.to_vec()
    } else {
        selected.and_then(TcKernelKind::parse).into_iter().collect()
    };
    if !run_all && mm_kinds.is_empty() && tc_kinds.is_empty() {
        return Err(planefold::Error::UnknownAlgo {
            got: selected.unwrap_or_default().to_string(),
        });
    }

    if !mm_kinds.is_empty() {
        if let Some(r) = a.r {
            for &kind in &mm_kinds {
                for &n in &mm_sides {
                    let run = planefold::harness::build_mm_run::<planefold::Int31>(
                        kind, n, r, &cfg, a.seed,
                    )?;
                    let race_ok = planefold::engine::check_race_freedom(&run.tree).is_ok();
                    planefold::engine::run_instrumented(
                        &run.tree,
                        &run.pool,
                        planefold::engine::InstrumentOpts::default(),
                    );
                    let oracle_ok = run.pool.snapshot(run.output)
                        == planefold::harness::mm_reference::<planefold::Int31>(n, a.seed);
                    rows.push(planefold::harness::VerifyRow {
                        kernel: kind.name(),
                        n,
                        shape: None,
                        param: r,
                        oracle_ok,
                        race_ok,
                    });
                }
            }
        } else {
            rows.extend(verify_mm_grid(&mm_kinds, &mm_sides, &cfg, a.seed)?);
        }
    }
    if !tc_kinds.is_empty() {
        let shapes: &[(usize, usize, usize)] = if run_all {
            &TC_SHAPES
        } else {
            &[(a.u, a.v, a.x)]
        };
        rows.extend(verify_tc_grid(&tc_kinds, shapes, &tc_sides, &cfg, a.seed)?);
    }

    let mut all_ok = true;
    println!("kernel        n   param  shape    oracle  race");
    for row in &rows {
        let shape = row
            .shape
            .map(|(u, v, x)| format!("{u},{v},{x}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:>3} {:>6}  {:<7}  {:<6}  {}",
            row.kernel,
            row.n,
            row.param,
            shape,
            if row.oracle_ok { "ok" } else { "FAIL" },
            if row.race_ok { "ok" } else { "RACE" },
        );
        all_ok &= row.ok();
    }
    println!(
        "{}: {} of {} checks passed",
        if all_ok { "PASS" } else { "FAIL" },
        rows.iter().filter(|r| r.ok()).count(),
        rows.len()
    );
    Ok(all_ok)
}

fn cmd_tradeoff(a: TradeoffArgs) -> planefold::Result<bool> {
    let cfg = KernelConfig {
        base: a.base,
        block: a.b as u32,
        ..KernelConfig::default()
    };
    let r_list: Vec<u32> = if a.r.is_empty() {
        (0..=a.n.ilog2()).map(|e| 1u32 << e).collect()
    } else {
        a.r.clone()
    };
    // Measured span and Q1 are data-independent, so both scalar modes
    // produce the same table; the flag selects the ring actually exercised.
    let rows = match a.scalar {
        ScalarMode::Int => {
            tradeoff_table::<planefold::Int31>(a.n, &r_list, a.m, a.b, &cfg, a.seed)?
        }
        ScalarMode::F64 => tradeoff_table::<f64>(a.n, &r_list, a.m, a.b, &cfg, a.seed)?,
    };
    let mut csv = String::from("r,space,predicted_span,measured_span,measured_q1\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.r, row.space, row.predicted_span, row.measured_span, row.measured_q1
        )
        .expect("string write");
    }
    emit(&csv, a.out.as_deref())?;
    Ok(true)
}

fn cmd_cachescan(a: CachescanArgs) -> planefold::Result<bool> {
    let kind = MmKernelKind::parse(&a.kernel).ok_or_else(|| planefold::Error::UnknownAlgo {
        got: a.kernel.clone(),
    })?;
    let cfg = KernelConfig {
        base: a.base,
        block: a.b as u32,
        ..KernelConfig::default()
    };
    let rows = match a.scalar {
        ScalarMode::Int => cache_scan::<planefold::Int31>(kind, a.n, &a.m, a.b, &cfg, a.seed)?,
        ScalarMode::F64 => cache_scan::<f64>(kind, a.n, &a.m, a.b, &cfg, a.seed)?,
    };
    let mut csv = String::from("kernel,n,M,B,q1\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            kind.name(),
            a.n,
            row.m_words,
            row.b_words,
            row.q1
        )
        .expect("string write");
    }
    emit(&csv, a.out.as_deref())?;
    Ok(true)
}

fn emit(csv: &str, out: Option<&std::path::Path>) -> planefold::Result<()> {
    match out {
        Some(path) => std::fs::write(path, csv.as_bytes()).map_err(Into::into),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
