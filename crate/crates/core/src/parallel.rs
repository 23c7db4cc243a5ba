//! Parallel depth-first search by dynamic tree partitioning.
//!
//! Workers explore disjoint subtrees. Whenever some worker is starved, an
//! active worker detaches one unexplored right branch from its current path
//! and publishes it as a [`BobNode`]: the path from the root to that right
//! child. A starved worker takes the leftmost published path from the
//! [`GlobalPriorityQueue`], rebuilds the node by replaying the decisions on
//! the path, and continues depth-first from there.
//!
//! Two split rules are provided:
//!
//! * [`SplitRule::Spd`] detaches the *deepest* pending right branch. Combined
//!   with the leftmost cells ([`LeftmostCell`]) it returns exactly the
//!   sequential result for first-solution and optimization runs, whatever
//!   the number of workers or their scheduling.
//! * [`SplitRule::Spda`] detaches the *shallowest* pending right branch, which
//!   minimizes replay when the whole tree is explored. Its first-solution and
//!   optimization results depend on scheduling.
//!
//! The number of splits a worker may produce per consumed subtree is bounded
//! by a global threshold `S`, doubled whenever a worker has been starved for
//! a whole imbalance window while others are still busy.

use std::collections::BTreeMap;
use std::sync::Barrier;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

use crate::model::{Model, Sense};
use crate::path::{compare_paths, PathId, PathOrder, Side};
use crate::search::{may_improve, Branching, CpProblem, DfsState, Mode, Replay, SearchProblem, SolutionRecord};

/// Largest value the partitioning threshold may reach.
pub const THRESHOLD_CAP: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRule {
    /// Deepest pending right branch; deterministic results.
    Spd,
    /// Shallowest pending right branch; scheduling-dependent results.
    Spda,
}

impl SplitRule {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitRule::Spd => "spd",
            SplitRule::Spda => "spda",
        }
    }
}

/// A published subtree: the path from the root to a right child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobNode {
    pub path: PathId,
    /// Publication order, unique per run.
    pub seq: u64,
    pub producer: usize,
}

impl BobNode {
    pub fn new(path: PathId, seq: u64, producer: usize) -> Self {
        debug_assert_eq!(path.last(), Some(Side::Right), "published paths end with a right branch");
        BobNode { path, seq, producer }
    }
}

/// Published subtrees, leftmost path first.
#[derive(Debug, Default)]
pub struct GlobalPriorityQueue {
    entries: BTreeMap<(PathId, u64), BobNode>,
}

impl GlobalPriorityQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, node: BobNode) {
        self.entries.insert((node.path.clone(), node.seq), node);
    }

    /// Removes and returns the entry with the minimum path.
    pub fn pop(&mut self) -> Option<BobNode> {
        self.entries.pop_first().map(|(_, n)| n)
    }

    /// Like [`pop`](Self::pop), but discards entries right of `frontier`.
    pub fn pop_not_right_of(&mut self, frontier: Option<&PathId>) -> Option<BobNode> {
        while let Some(node) = self.pop() {
            match frontier {
                Some(f) if compare_paths(&node.path, f) == PathOrder::Right => continue,
                _ => return Some(node),
            }
        }
        None
    }

    pub fn peek_path(&self) -> Option<&PathId> {
        self.entries.keys().next().map(|(p, _)| p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops every entry whose path lies right of `frontier`; returns how
    /// many were dropped.
    pub fn purge_right_of(&mut self, frontier: &PathId) -> usize {
        let before = self.entries.len();
        self.entries
            .retain(|(p, _), _| compare_paths(p, frontier) != PathOrder::Right);
        before - self.entries.len()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    /// Leftmost solution.
    Spg,
    /// Leftmost among the best-objective solutions.
    Sopg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellUpdate {
    Updated,
    Rejected,
}

/// Shared best-solution cell. Every accepted candidate is appended to the
/// history, so monotonicity can be audited after a run.
#[derive(Debug, Clone)]
pub struct LeftmostCell {
    kind: CellKind,
    sense: Sense,
    current: Option<SolutionRecord>,
    history: Vec<(Option<i64>, PathId)>,
}

impl LeftmostCell {
    pub fn new(kind: CellKind, sense: Sense) -> Self {
        LeftmostCell {
            kind,
            sense,
            current: None,
            history: Vec::new(),
        }
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn current(&self) -> Option<&SolutionRecord> {
        self.current.as_ref()
    }

    pub fn into_current(self) -> Option<SolutionRecord> {
        self.current
    }

    pub fn history(&self) -> &[(Option<i64>, PathId)] {
        &self.history
    }

    fn install(&mut self, cand: SolutionRecord) -> CellUpdate {
        self.history.push((cand.objective, cand.path.clone()));
        self.current = Some(cand);
        CellUpdate::Updated
    }

    /// Installs `cand` iff the cell is empty or `cand` lies left of the
    /// current solution.
    pub fn try_update_spg(&mut self, cand: SolutionRecord) -> CellUpdate {
        debug_assert_eq!(self.kind, CellKind::Spg);
        match &self.current {
            Some(cur) if compare_paths(&cand.path, &cur.path) != PathOrder::Left => CellUpdate::Rejected,
            _ => self.install(cand),
        }
    }

    /// Installs `cand` iff the cell is empty, `cand` has a strictly better
    /// objective, or an equal objective and a path further left.
    pub fn try_update_sopg(&mut self, cand: SolutionRecord) -> CellUpdate {
        debug_assert_eq!(self.kind, CellKind::Sopg);
        match &self.current {
            Some(cur) if !may_improve(self.sense, cand.objective, &cand.path, (cur.objective, &cur.path)) => {
                CellUpdate::Rejected
            }
            _ => self.install(cand),
        }
    }

    pub fn try_update(&mut self, cand: SolutionRecord) -> CellUpdate {
        match self.kind {
            CellKind::Spg => self.try_update_spg(cand),
            CellKind::Sopg => self.try_update_sopg(cand),
        }
    }

    /// Baseline rule: the first candidate wins.
    fn try_install_first(&mut self, cand: SolutionRecord) -> CellUpdate {
        match self.current {
            Some(_) => CellUpdate::Rejected,
            None => self.install(cand),
        }
    }

    /// Baseline rule: strictly better objective only.
    fn try_update_strict(&mut self, cand: SolutionRecord) -> CellUpdate {
        match &self.current {
            Some(cur) if !self.sense.strictly_better(cand.objective, cur.objective) => CellUpdate::Rejected,
            _ => self.install(cand),
        }
    }
}

/// Partitioning threshold `s` (global) and the splits `p` a worker has
/// produced since it last took a subtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdState {
    pub s: u32,
    pub p: u32,
}

impl ThresholdState {
    pub fn new(s: u32) -> Self {
        ThresholdState { s: s.max(1), p: 0 }
    }

    pub fn allows_split(&self) -> bool {
        self.p < self.s
    }
}

/// Doubles `s` on an imbalance signal, capped at [`THRESHOLD_CAP`].
pub fn adjust_threshold(ts: ThresholdState, imbalance: bool) -> ThresholdState {
    if imbalance {
        ThresholdState {
            s: ts.s.saturating_mul(2).min(THRESHOLD_CAP),
            ..ts
        }
    } else {
        ts
    }
}

/// Detaches one pending right branch and hands its path to `publish` if some
/// worker is starved and the threshold allows it.
pub fn maybe_split<P: SearchProblem>(
    dfs: &mut DfsState<'_, P>,
    waiting: usize,
    ts: &mut ThresholdState,
    rule: SplitRule,
    publish: impl FnOnce(PathId),
) -> bool {
    if waiting == 0 || !ts.allows_split() {
        return false;
    }
    let detached = match rule {
        SplitRule::Spd => dfs.split_lowest_right(),
        SplitRule::Spda => dfs.split_highest_right(),
    };
    match detached {
        Some(path) => {
            publish(path);
            ts.p += 1;
            true
        }
        None => false,
    }
}

/// True iff no work is left anywhere: nothing queued, every worker waiting,
/// and no split between detachment and publication.
pub fn termination_detect(queue_empty: bool, waiting: usize, workers: usize, in_flight: usize) -> bool {
    queue_empty && waiting == workers && in_flight == 0
}

/// The subtree a worker currently owns, and its cancellation flag.
#[derive(Debug, Default)]
pub struct WorkerSlot {
    root: Mutex<Option<PathId>>,
    cancel: AtomicBool,
}

impl WorkerSlot {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a new owned subtree and clears any stale cancellation.
    pub fn assign(&self, root: Option<PathId>) {
        let mut guard = self.root.lock();
        *guard = root;
        self.cancel.store(false, Ordering::Release);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::Acquire)
    }
}

/// Flags every worker whose subtree lies right of `frontier` and purges the
/// queue entries right of it. Returns the number of workers flagged.
pub fn cancel_right_of(frontier: &PathId, slots: &[WorkerSlot], gpq: &mut GlobalPriorityQueue) -> usize {
    gpq.purge_right_of(frontier);
    slots
        .iter()
        .filter(|slot| {
            let root = slot.root.lock();
            let right = matches!(&*root, Some(r) if compare_paths(r, frontier) == PathOrder::Right);
            if right {
                slot.cancel.store(true, Ordering::Release);
            }
            right
        })
        .count()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub worker: usize,
    pub nodes_expanded: u64,
    pub nodes_replayed: u64,
    pub splits_produced: u64,
    pub bobnodes_consumed: u64,
    pub solutions_found: u64,
    pub work_ns: u64,
    pub wait_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub threshold_s0: u32,
    pub imbalance_window: Duration,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            threshold_s0: 4,
            imbalance_window: Duration::from_millis(10),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParallelOutcome {
    /// First/Optimize: zero or one record. All: every solution, by path.
    pub solutions: Vec<SolutionRecord>,
    pub stats: Vec<WorkerStats>,
    /// Accepted (objective, path) pairs of the shared cell, in order.
    pub cell_history: Vec<(Option<i64>, PathId)>,
    pub final_threshold: u32,
    pub max_depth: usize,
}

impl ParallelOutcome {
    pub fn total_nodes(&self) -> u64 {
        self.stats.iter().map(|s| s.nodes_expanded).sum()
    }

    pub fn total_replayed(&self) -> u64 {
        self.stats.iter().map(|s| s.nodes_replayed).sum()
    }

    pub fn total_consumed(&self) -> u64 {
        self.stats.iter().map(|s| s.bobnodes_consumed).sum()
    }
}

struct QueueState {
    gpq: GlobalPriorityQueue,
    waiting: usize,
    done: bool,
    next_seq: u64,
    /// Current leftmost solution path in first-solution runs.
    frontier: Option<PathId>,
}

struct Shared {
    workers: usize,
    mode: Mode,
    rule: SplitRule,
    window: Duration,
    queue: Mutex<QueueState>,
    wake: Condvar,
    waiting_hint: AtomicUsize,
    in_flight: AtomicUsize,
    threshold: AtomicU32,
    cell: Mutex<LeftmostCell>,
    cell_version: AtomicU64,
    stop_all: AtomicBool,
    slots: Vec<WorkerSlot>,
}

impl Shared {
    fn sync_hints(&self, q: &QueueState) {
        self.waiting_hint.store(q.waiting, Ordering::Relaxed);
    }

    fn publish(&self, path: PathId, producer: usize) {
        self.in_flight.fetch_add(1, Ordering::AcqRel);
        {
            let mut q = self.queue.lock();
            let seq = q.next_seq;
            q.next_seq += 1;
            q.gpq.push(BobNode::new(path, seq, producer));
            self.sync_hints(&q);
        }
        self.in_flight.fetch_sub(1, Ordering::AcqRel);
        self.wake.notify_one();
    }

    /// Blocks until a subtree is available or the run is over.
    fn next_work(&self, stats: &mut WorkerStats, first_wait: bool) -> Option<BobNode> {
        let start = Instant::now();
        let mut q = self.queue.lock();
        if !first_wait {
            q.waiting += 1;
            self.sync_hints(&q);
        }
        let mut since = Instant::now();
        let result = loop {
            if q.done {
                break None;
            }
            let frontier = q.frontier.clone();
            if let Some(node) = q.gpq.pop_not_right_of(frontier.as_ref()) {
                q.waiting -= 1;
                self.sync_hints(&q);
                break Some(node);
            }
            self.sync_hints(&q);
            if termination_detect(
                q.gpq.is_empty(),
                q.waiting,
                self.workers,
                self.in_flight.load(Ordering::Acquire),
            ) {
                q.done = true;
                self.wake.notify_all();
                break None;
            }
            let deadline = since + self.window;
            let timed_out = self.wake.wait_until(&mut q, deadline).timed_out();
            if timed_out && q.gpq.is_empty() && q.waiting < self.workers && !q.done {
                let s = self.threshold.load(Ordering::Relaxed);
                let next = adjust_threshold(ThresholdState::new(s), true).s;
                self.threshold.store(next, Ordering::Relaxed);
                since = Instant::now();
            }
        };
        stats.wait_ns += start.elapsed().as_nanos() as u64;
        result
    }

    fn stop_everything(&self) {
        self.stop_all.store(true, Ordering::Release);
        let mut q = self.queue.lock();
        q.gpq.clear();
        self.sync_hints(&q);
        drop(q);
        self.wake.notify_all();
    }
}

/// Snapshot of the shared cell, refreshed only when its version moves.
struct Incumbent {
    version: u64,
    best: Option<(Option<i64>, PathId)>,
}

impl Incumbent {
    fn refresh(&mut self, shared: &Shared) {
        let v = shared.cell_version.load(Ordering::Acquire);
        if v != self.version {
            let cell = shared.cell.lock();
            self.version = shared.cell_version.load(Ordering::Acquire);
            self.best = cell.current().map(|r| (r.objective, r.path.clone()));
        }
    }
}

struct Worker<'s, 'p, P: SearchProblem> {
    id: usize,
    shared: &'s Shared,
    problem: &'p P,
    stats: WorkerStats,
    threshold: ThresholdState,
    incumbent: Incumbent,
    found: Vec<SolutionRecord>,
}

impl<'s, 'p, P: SearchProblem> Worker<'s, 'p, P> {
    fn run(mut self, start: &Barrier) -> (WorkerStats, Vec<SolutionRecord>) {
        start.wait();
        let mut first_wait = true;
        if self.id == 0 {
            let started = Instant::now();
            self.shared.slots[0].assign(Some(PathId::root()));
            match DfsState::at_root(self.problem) {
                Some(dfs) => self.explore(dfs),
                None => self.stats.nodes_expanded += 1,
            }
            self.stats.work_ns += started.elapsed().as_nanos() as u64;
            first_wait = false;
        }
        loop {
            self.shared.slots[self.id].assign(None);
            let Some(node) = self.shared.next_work(&mut self.stats, first_wait) else {
                break;
            };
            first_wait = false;
            let started = Instant::now();
            self.shared.slots[self.id].assign(Some(node.path.clone()));
            self.stats.bobnodes_consumed += 1;
            self.threshold.p = 0;
            let (replay, cost) = DfsState::replay(self.problem, &node.path);
            self.stats.nodes_replayed += cost.replayed;
            match replay {
                Replay::Ready(dfs) => self.explore(dfs),
                Replay::Pruned => self.stats.nodes_expanded += cost.nodes,
            }
            self.stats.work_ns += started.elapsed().as_nanos() as u64;
        }
        (self.stats, self.found)
    }

    /// Whether the node at the top of `dfs` must be skipped given what the
    /// shared cell currently holds.
    fn pruned(&mut self, dfs: &DfsState<'p, P>) -> bool {
        let sh = self.shared;
        match (sh.mode, sh.rule) {
            (Mode::All, _) => false,
            (Mode::First, SplitRule::Spd) => {
                self.incumbent.refresh(sh);
                matches!(&self.incumbent.best,
                    Some((_, p)) if compare_paths(dfs.record_path(), p) == PathOrder::Right)
            }
            (Mode::First, SplitRule::Spda) => sh.stop_all.load(Ordering::Acquire),
            (Mode::Optimize, rule) => {
                self.incumbent.refresh(sh);
                let Some((obj, path)) = &self.incumbent.best else {
                    return false;
                };
                let bound = self.problem.objective_bound(dfs.state());
                match rule {
                    SplitRule::Spd => !may_improve(self.problem.sense(), bound, dfs.record_path(), (*obj, path)),
                    SplitRule::Spda => !self.problem.sense().strictly_better(bound, *obj),
                }
            }
        }
    }

    /// Hands a solution to the shared cell. Returns true if the rest of the
    /// current subtree can be abandoned.
    fn offer(&mut self, rec: SolutionRecord) -> bool {
        let sh = self.shared;
        match (sh.mode, sh.rule) {
            (Mode::All, _) => {
                self.found.push(rec);
                false
            }
            (Mode::First, SplitRule::Spd) => {
                let mut cell = sh.cell.lock();
                let frontier = rec.path.clone();
                if cell.try_update_spg(rec) == CellUpdate::Updated {
                    sh.cell_version.fetch_add(1, Ordering::AcqRel);
                    let mut q = sh.queue.lock();
                    q.frontier = Some(frontier.clone());
                    cancel_right_of(&frontier, &sh.slots, &mut q.gpq);
                    sh.sync_hints(&q);
                }
                // Everything left in this subtree is right of the solution.
                true
            }
            (Mode::First, SplitRule::Spda) => {
                let mut cell = sh.cell.lock();
                if cell.try_install_first(rec) == CellUpdate::Updated {
                    sh.cell_version.fetch_add(1, Ordering::AcqRel);
                    drop(cell);
                    sh.stop_everything();
                }
                true
            }
            (Mode::Optimize, rule) => {
                let mut cell = sh.cell.lock();
                let res = match rule {
                    SplitRule::Spd => cell.try_update_sopg(rec),
                    SplitRule::Spda => cell.try_update_strict(rec),
                };
                if res == CellUpdate::Updated {
                    sh.cell_version.fetch_add(1, Ordering::AcqRel);
                }
                false
            }
        }
    }

    fn explore(&mut self, mut dfs: DfsState<'p, P>) {
        let slot = &self.shared.slots[self.id];
        loop {
            if slot.is_cancelled() || self.pruned(&dfs) {
                // Preorder only moves right from here in First mode, and a
                // cancelled subtree is right of the leftmost solution.
                if self.shared.mode == Mode::First || slot.is_cancelled() {
                    dfs.abandon();
                }
                if !dfs.backtrack() {
                    break;
                }
                continue;
            }
            match dfs.branch() {
                Branching::Leaf => {
                    if self.problem.is_solution(dfs.state()) {
                        self.stats.solutions_found += 1;
                        if self.offer(dfs.solution_record()) {
                            dfs.abandon();
                        }
                    } else {
                        dfs.failures += 1;
                    }
                    if !dfs.backtrack() {
                        break;
                    }
                }
                Branching::Decision(d) => {
                    if !dfs.descend(d) {
                        if !dfs.backtrack() {
                            break;
                        }
                        continue;
                    }
                    self.threshold.s = self.shared.threshold.load(Ordering::Relaxed);
                    let shared = self.shared;
                    let id = self.id;
                    if maybe_split(&mut dfs, shared.waiting_hint.load(Ordering::Relaxed), &mut self.threshold, shared.rule, |p| {
                        shared.publish(p, id)
                    }) {
                        self.stats.splits_produced += 1;
                    }
                }
            }
        }
        self.stats.nodes_expanded += dfs.nodes;
    }
}

/// Parallel search over any [`SearchProblem`] with `workers` threads.
pub fn solve_par_problem<P: SearchProblem>(
    problem: &P,
    workers: usize,
    rule: SplitRule,
    mode: Mode,
    cfg: EngineConfig,
) -> ParallelOutcome {
    let workers = workers.max(1);
    let kind = match mode {
        Mode::Optimize => CellKind::Sopg,
        _ => CellKind::Spg,
    };
    let shared = Shared {
        workers,
        mode,
        rule,
        window: cfg.imbalance_window,
        queue: Mutex::new(QueueState {
            gpq: GlobalPriorityQueue::new(),
            waiting: workers - 1,
            done: false,
            next_seq: 0,
            frontier: None,
        }),
        wake: Condvar::new(),
        waiting_hint: AtomicUsize::new(workers - 1),
        in_flight: AtomicUsize::new(0),
        threshold: AtomicU32::new(cfg.threshold_s0.clamp(1, THRESHOLD_CAP)),
        cell: Mutex::new(LeftmostCell::new(kind, problem.sense())),
        cell_version: AtomicU64::new(0),
        stop_all: AtomicBool::new(false),
        slots: (0..workers).map(|_| WorkerSlot::new()).collect(),
    };

    let start = Barrier::new(workers);
    let results: Vec<(WorkerStats, Vec<SolutionRecord>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|id| {
                let shared = &shared;
                let start = &start;
                scope.spawn(move || {
                    Worker {
                        id,
                        shared,
                        problem,
                        stats: WorkerStats {
                            worker: id,
                            ..WorkerStats::default()
                        },
                        threshold: ThresholdState::new(shared.threshold.load(Ordering::Relaxed)),
                        incumbent: Incumbent {
                            version: 0,
                            best: None,
                        },
                        found: Vec::new(),
                    }
                    .run(start)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    let final_threshold = shared.threshold.load(Ordering::Relaxed);
    let cell = shared.cell.into_inner();
    let cell_history = cell.history().to_vec();
    let mut stats = Vec::with_capacity(workers);
    let mut solutions = Vec::new();
    for (s, found) in results {
        stats.push(s);
        solutions.extend(found);
    }
    match mode {
        Mode::All => solutions.sort_by(|a, b| a.path.cmp(&b.path)),
        _ => solutions = cell.into_current().into_iter().collect(),
    }
    ParallelOutcome {
        solutions,
        stats,
        cell_history,
        final_threshold,
        max_depth: problem.max_depth(),
    }
}

/// Parallel search on a constraint model.
pub fn solve_par(m: &Model, workers: usize, rule: SplitRule, mode: Mode, cfg: EngineConfig) -> ParallelOutcome {
    solve_par_problem(&CpProblem::new(m), workers, rule, mode, cfg)
}
