//! Task-tree executors.
//!
//! * [`run_instrumented`] — single-threaded, deterministic (children left to
//!   right), returns exact work/span/space/fork counts under the cost model
//!   and optionally the ordered memory-access trace.
//! * [`check_race_freedom`] — verifies that the children of every parallel
//!   node have pairwise disjoint write sets. Leaf write sets are derived
//!   from the view descriptors, so the check is a pure tree analysis.
//! * [`run_parallel`] — executes the same DAG on the ambient rayon pool and
//!   reports wall time. Output buffers are bit-identical to the instrumented
//!   run because every cell's update order is fixed by the sequence
//!   structure.

use std::time::{Duration, Instant};

use crate::pool::{BufferId, Pool};
use crate::scalar::Scalar;
use crate::task::{
    ceil_log2, exec_leaf, leaf_madds, leaf_span, leaf_work, Access, TaskNode, Tracer,
};

/// Measured cost of one instrumented run.
///
/// `space` is the peak number of live computation elements: all statically
/// allocated workspace (output planes, intermediates) plus dynamic
/// allocations at their concurrent peak. Read-only inputs are not counted;
/// the space of a run is the storage handed to the computation.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ExecMetrics {
    /// Total work T1 under the cost model (includes fork and bookkeeping
    /// overheads).
    pub work: u64,
    /// Critical-path length T-infinity under the cost model.
    pub span: u64,
    /// Peak live computation space S-infinity, in elements.
    pub space: u64,
    /// Number of binary fork events.
    pub forks: u64,
    /// Scalar multiply-adds performed by leaves.
    pub madds: u64,
}

#[derive(Copy, Clone, Default, Debug)]
pub struct InstrumentOpts {
    /// Record the ordered memory-access trace for cache simulation.
    pub trace: bool,
}

#[derive(Default)]
struct SubtreeCost {
    work: u64,
    span: u64,
    forks: u64,
    madds: u64,
    /// Net change of live dynamic elements across the subtree.
    dyn_net: i64,
    /// Peak live dynamic elements within the subtree, relative to its start.
    dyn_peak: i64,
}

/// Executes the tree serially and returns exact metrics, plus the access
/// trace when requested.
pub fn run_instrumented<S: Scalar>(
    root: &TaskNode,
    pool: &Pool<S>,
    opts: InstrumentOpts,
) -> (ExecMetrics, Option<Vec<Access>>) {
    let mut trace = if opts.trace { Some(Vec::new()) } else { None };
    let cost = walk(root, pool, &mut trace);
    debug_assert!(
        cost.span <= cost.work,
        "critical path cannot exceed total work"
    );
    let metrics = ExecMetrics {
        work: cost.work,
        span: cost.span,
        space: pool.workspace_elems() + cost.dyn_peak.max(0) as u64,
        forks: cost.forks,
        madds: cost.madds,
    };
    (metrics, trace)
}

fn walk<S: Scalar>(
    node: &TaskNode,
    pool: &Pool<S>,
    trace: &mut Option<Vec<Access>>,
) -> SubtreeCost {
    match node {
        TaskNode::Leaf(op) => {
            let mut tracer = Tracer {
                out: trace.as_mut(),
            };
            exec_leaf(op, pool, &mut tracer);
            SubtreeCost {
                work: leaf_work(op),
                span: leaf_span(op),
                madds: leaf_madds(op),
                ..Default::default()
            }
        }
        TaskNode::Tick => SubtreeCost {
            work: 1,
            span: 1,
            ..Default::default()
        },
        TaskNode::Seq(children) => {
            let mut total = SubtreeCost::default();
            let mut live = 0i64;
            for c in children {
                let sub = walk(c, pool, trace);
                total.work += sub.work;
                total.span += sub.span;
                total.forks += sub.forks;
                total.madds += sub.madds;
                total.dyn_peak = total.dyn_peak.max(live + sub.dyn_peak);
                live += sub.dyn_net;
            }
            total.dyn_net = live;
            total
        }
        TaskNode::Fork(children) | TaskNode::ParFor(children) => {
            let k = children.len() as u64;
            let (oh_work, oh_span) = match node {
                // Explicit fork/join: a binary spawn tree down and a join
                // tree back up.
                TaskNode::Fork(_) => (2 * k.saturating_sub(1), 2 * ceil_log2(k)),
                // Parallel-for: binary fork tree of depth ceil(log2 k).
                _ => (k.saturating_sub(1), ceil_log2(k)),
            };
            let mut total = SubtreeCost {
                work: oh_work,
                span: 0,
                forks: k.saturating_sub(1),
                ..Default::default()
            };
            let mut max_child_span = 0;
            for c in children {
                let sub = walk(c, pool, trace);
                total.work += sub.work;
                total.forks += sub.forks;
                total.madds += sub.madds;
                max_child_span = max_child_span.max(sub.span);
                // Children are concurrent: their peaks can coincide.
                total.dyn_peak += sub.dyn_peak;
                total.dyn_net += sub.dyn_net;
            }
            total.span = oh_span + max_child_span;
            total
        }
        TaskNode::Alloc { buf, elems } => {
            pool.zero_shared(*buf);
            let c = ceil_log2(elems + 1);
            SubtreeCost {
                work: c,
                span: c,
                dyn_net: *elems as i64,
                dyn_peak: *elems as i64,
                ..Default::default()
            }
        }
        TaskNode::Dealloc { elems, .. } => SubtreeCost {
            dyn_net: -(*elems as i64),
            ..Default::default()
        },
    }
}

/// Outcome of the disjoint-write-set check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RaceCheck {
    Ok,
    Violation(RaceViolation),
}

/// A parallel node whose children write the same address. `path` is the
/// child-index route from the root to the offending node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RaceViolation {
    pub path: Vec<usize>,
    pub buf: BufferId,
    pub index: u64,
}

impl RaceCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, RaceCheck::Ok)
    }
}

/// Checks that for every `Fork`/`ParFor` node the write sets of distinct
/// children are pairwise disjoint.
pub fn check_race_freedom(root: &TaskNode) -> RaceCheck {
    let mut path = Vec::new();
    match collect_writes(root, &mut path) {
        Ok(_) => RaceCheck::Ok,
        Err(v) => RaceCheck::Violation(v),
    }
}

/// Returns the subtree's sorted, deduplicated write set, or the first
/// violation found.
fn collect_writes(
    node: &TaskNode,
    path: &mut Vec<usize>,
) -> Result<Vec<(BufferId, u64)>, RaceViolation> {
    match node {
        TaskNode::Leaf(op) => {
            let mut w = Vec::new();
            crate::task::leaf_writes(op, &mut w);
            w.sort_unstable();
            w.dedup();
            Ok(w)
        }
        TaskNode::Tick | TaskNode::Alloc { .. } | TaskNode::Dealloc { .. } => Ok(Vec::new()),
        TaskNode::Seq(children) => {
            let mut all = Vec::new();
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                let w = collect_writes(c, path)?;
                path.pop();
                all.extend(w);
            }
            all.sort_unstable();
            all.dedup();
            Ok(all)
        }
        TaskNode::Fork(children) | TaskNode::ParFor(children) => {
            // Each child set is deduplicated, so any duplicate in the merged
            // list crosses two children: that is a race.
            let mut tagged: Vec<((BufferId, u64), usize)> = Vec::new();
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                let w = collect_writes(c, path)?;
                path.pop();
                tagged.extend(w.into_iter().map(|a| (a, i)));
            }
            tagged.sort_unstable();
            for pair in tagged.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(RaceViolation {
                        path: path.clone(),
                        buf: pair[0].0 .0,
                        index: pair[0].0 .1,
                    });
                }
            }
            tagged.dedup_by(|a, b| a.0 == b.0);
            Ok(tagged.into_iter().map(|(a, _)| a).collect())
        }
    }
}

/// Executes the tree on the current rayon thread pool and returns the wall
/// time. Callers control the thread count by installing a pool.
pub fn run_parallel<S: Scalar>(root: &TaskNode, pool: &Pool<S>) -> Duration {
    // Lock-free execution is sound only for disjoint-write trees; debug
    // builds re-check the contract before running.
    debug_assert!(
        check_race_freedom(root).is_ok(),
        "run_parallel requires a race-free task tree"
    );
    let start = Instant::now();
    exec_parallel(root, pool);
    start.elapsed()
}

fn exec_parallel<S: Scalar>(node: &TaskNode, pool: &Pool<S>) {
    match node {
        TaskNode::Leaf(op) => exec_leaf(op, pool, &mut Tracer::none()),
        TaskNode::Tick | TaskNode::Dealloc { .. } => {}
        TaskNode::Alloc { buf, .. } => pool.zero_shared(*buf),
        TaskNode::Seq(children) => {
            for c in children {
                exec_parallel(c, pool);
            }
        }
        TaskNode::Fork(children) | TaskNode::ParFor(children) => {
            join_slice(children, pool);
        }
    }
}

/// Binary-forking execution of a slice of sibling tasks.
fn join_slice<S: Scalar>(children: &[TaskNode], pool: &Pool<S>) {
    match children.len() {
        0 => {}
        1 => exec_parallel(&children[0], pool),
        n => {
            let (lo, hi) = children.split_at(n / 2);
            rayon::join(|| join_slice(lo, pool), || join_slice(hi, pool));
        }
    }
}
