//! Deterministic sequential binary depth-first search.
//!
//! This is the reference semantics: the parallel engine must return exactly
//! what [`solve_seq`] returns. The search walks a binary tree, left child
//! first. Every node is identified by its [`PathId`], and the branching
//! heuristic looks only at the node's own domains, never at search history.

use serde::{Deserialize, Serialize};

use crate::model::{check_assignment, Assignment, Model, Sense};
use crate::path::{compare_paths, PathId, PathOrder, Side};
use crate::propagation::{pop_decision, push_decision, Decision, DomainStore, Propagator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    First,
    All,
    #[serde(rename = "opt")]
    Optimize,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::First => "first",
            Mode::All => "all",
            Mode::Optimize => "opt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching<D> {
    Leaf,
    Decision(D),
}

/// A binary search tree defined by a root state and a node-local branching
/// rule.
///
/// States are mutated in place: [`apply`](SearchProblem::apply) opens one
/// undo level (even when it reports infeasibility) and
/// [`undo`](SearchProblem::undo) closes it. A problem value is shared
/// read-only by every worker; each worker owns its states.
pub trait SearchProblem: Sync {
    type State: Send;
    type Decision: Clone + Send;

    /// The root state, or `None` if the root itself is infeasible.
    fn root(&self) -> Option<Self::State>;

    /// Must depend only on `state`.
    fn branch(&self, state: &Self::State) -> Branching<Self::Decision>;

    /// Moves `state` to the `side` child of `decision`. Returns `false` if
    /// that child is infeasible.
    fn apply(&self, state: &mut Self::State, decision: &Self::Decision, side: Side) -> bool;

    fn undo(&self, state: &mut Self::State);

    /// Called at leaves only.
    fn is_solution(&self, state: &Self::State) -> bool;

    fn objective(&self, state: &Self::State) -> Option<i64>;

    /// Best objective value any leaf below `state` could reach.
    fn objective_bound(&self, state: &Self::State) -> Option<i64>;

    fn sense(&self) -> Sense;

    fn assignment(&self, state: &Self::State) -> Assignment;

    /// Upper bound on the length of any node path.
    fn max_depth(&self) -> usize;
}

/// Leaf if every variable is fixed, otherwise `x = min(D(x))` on the
/// lowest-index open variable; the right child excludes that value.
pub fn branch_heuristic(store: &DomainStore) -> Branching<Decision> {
    store
        .domains()
        .iter()
        .position(|d| d.len() > 1)
        .map(|i| {
            let var = crate::model::VarId(i);
            Branching::Decision(Decision::assign(var, store.min(var)))
        })
        .unwrap_or(Branching::Leaf)
}

/// Constraint model exposed as a [`SearchProblem`].
#[derive(Debug, Clone)]
pub struct CpProblem<'m> {
    model: &'m Model,
    prop: Propagator<'m>,
}

impl<'m> CpProblem<'m> {
    pub fn new(model: &'m Model) -> Self {
        CpProblem {
            model,
            prop: Propagator::new(model),
        }
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }
}

impl SearchProblem for CpProblem<'_> {
    type State = DomainStore;
    type Decision = Decision;

    fn root(&self) -> Option<DomainStore> {
        let mut store = DomainStore::new(self.model);
        self.prop.propagate(&mut store).is_stable().then_some(store)
    }

    fn branch(&self, state: &DomainStore) -> Branching<Decision> {
        branch_heuristic(state)
    }

    fn apply(&self, state: &mut DomainStore, decision: &Decision, side: Side) -> bool {
        let d = match side {
            Side::Left => Decision::assign(decision.var, decision.value),
            Side::Right => Decision::exclude(decision.var, decision.value),
        };
        push_decision(state, &self.prop, d)
            .expect("heuristic decisions always satisfy the push precondition")
            .is_stable()
    }

    fn undo(&self, state: &mut DomainStore) {
        pop_decision(state).expect("undo is paired with apply");
    }

    fn is_solution(&self, state: &DomainStore) -> bool {
        // Ne and all-different filters are incomplete: re-check the leaf.
        check_assignment(self.model, &self.assignment(state)).unwrap_or(false)
    }

    fn objective(&self, state: &DomainStore) -> Option<i64> {
        self.model.objective.var().and_then(|v| state.value(v))
    }

    fn objective_bound(&self, state: &DomainStore) -> Option<i64> {
        let v = self.model.objective.var()?;
        Some(match self.model.sense() {
            Sense::Maximize => state.max(v),
            _ => state.min(v),
        })
    }

    fn sense(&self) -> Sense {
        self.model.sense()
    }

    fn assignment(&self, state: &DomainStore) -> Assignment {
        Assignment::new(state.domains().iter().map(|d| d[0]).collect())
    }

    fn max_depth(&self) -> usize {
        self.model.max_depth()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub assignment: Assignment,
    pub objective: Option<i64>,
    pub path: PathId,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub failures: u64,
    pub solutions_found: u64,
    pub max_depth: usize,
}

/// True if a subtree at `path` whose objective bound is `bound` may still
/// hold a leaf that beats `incumbent` under the leftmost-optimal order:
/// a strictly better objective, or an equal one further left.
pub fn may_improve(sense: Sense, bound: Option<i64>, path: &PathId, incumbent: (Option<i64>, &PathId)) -> bool {
    if sense.strictly_better(bound, incumbent.0) {
        return true;
    }
    bound == incumbent.0 && compare_paths(path, incumbent.1) == PathOrder::Left
}

struct Frame<D> {
    decision: D,
    side: Side,
    right_pending: bool,
}

/// Nodes computed while rebuilding a path, and how many of them were
/// already computed by the producer of the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayCost {
    pub nodes: u64,
    pub replayed: u64,
}

/// Outcome of rebuilding a node from its path.
pub enum Replay<'p, P: SearchProblem> {
    Ready(DfsState<'p, P>),
    /// Some decision on the path failed: the subtree holds no work.
    Pruned,
}

/// The state of one depth-first walk: the problem state at the current node
/// plus the decisions on the path to it and which right branches are still
/// unexplored.
///
/// Frames below `base` come from a replayed prefix and are never backtracked
/// into; the walk owns exactly the subtree rooted at depth `base`.
pub struct DfsState<'p, P: SearchProblem> {
    problem: &'p P,
    state: P::State,
    frames: Vec<Frame<P::Decision>>,
    path: PathId,
    base: usize,
    /// Nodes whose state has been computed, replayed ones included.
    pub nodes: u64,
    /// Nodes recomputed only to rebuild a prefix.
    pub replayed: u64,
    pub failures: u64,
    pub max_depth: usize,
}

impl<'p, P: SearchProblem> DfsState<'p, P> {
    fn empty(problem: &'p P, state: P::State) -> Self {
        DfsState {
            problem,
            state,
            frames: Vec::new(),
            path: PathId::root(),
            base: 0,
            nodes: 1,
            replayed: 0,
            failures: 0,
            max_depth: 0,
        }
    }

    /// Positions a walk at the root. `None` if the root is infeasible.
    pub fn at_root(problem: &'p P) -> Option<Self> {
        problem.root().map(|s| Self::empty(problem, s))
    }

    /// Recomputes the node at `path` from the root, one decision at a time.
    /// The root and every proper prefix count as replayed nodes; the target
    /// node itself is new work.
    pub fn replay(problem: &'p P, path: &PathId) -> (Replay<'p, P>, ReplayCost) {
        let len = path.len() as u64;
        let cost = |nodes: u64| ReplayCost {
            nodes,
            replayed: nodes.min(len),
        };
        let Some(state) = problem.root() else {
            return (Replay::Pruned, cost(1));
        };
        let mut dfs = Self::empty(problem, state);
        for &side in path.sides() {
            let Branching::Decision(d) = problem.branch(&dfs.state) else {
                return (Replay::Pruned, cost(dfs.nodes));
            };
            let ok = problem.apply(&mut dfs.state, &d, side);
            dfs.frames.push(Frame {
                decision: d,
                side,
                right_pending: false,
            });
            dfs.path.push(side);
            dfs.nodes += 1;
            if !ok {
                return (Replay::Pruned, cost(dfs.nodes));
            }
        }
        dfs.base = dfs.frames.len();
        dfs.replayed = len;
        dfs.max_depth = dfs.path.len();
        let c = cost(dfs.nodes);
        (Replay::Ready(dfs), c)
    }

    pub fn problem(&self) -> &'p P {
        self.problem
    }

    pub fn state(&self) -> &P::State {
        &self.state
    }

    /// Branch sequence from the root to the current node.
    pub fn record_path(&self) -> &PathId {
        &self.path
    }

    /// Path of the subtree this walk owns.
    pub fn subtree_root(&self) -> PathId {
        PathId::from_sides(self.path.sides()[..self.base].to_vec())
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn branch(&self) -> Branching<P::Decision> {
        self.problem.branch(&self.state)
    }

    /// Moves to the left child of `decision`, keeping the right child
    /// pending. Returns whether the child is feasible; an infeasible child
    /// still has to be left with [`backtrack`](Self::backtrack).
    pub fn descend(&mut self, decision: P::Decision) -> bool {
        let ok = self.problem.apply(&mut self.state, &decision, Side::Left);
        self.frames.push(Frame {
            decision,
            side: Side::Left,
            right_pending: true,
        });
        self.path.push(Side::Left);
        self.nodes += 1;
        self.max_depth = self.max_depth.max(self.frames.len());
        if !ok {
            self.failures += 1;
        }
        ok
    }

    /// Leaves the current node and moves to the next feasible node in
    /// preorder within the owned subtree. Returns `false` once the subtree
    /// is exhausted.
    pub fn backtrack(&mut self) -> bool {
        while self.frames.len() > self.base {
            self.problem.undo(&mut self.state);
            let top = self.frames.last_mut().expect("frame above base");
            if top.right_pending {
                top.right_pending = false;
                top.side = Side::Right;
                self.path.pop();
                self.path.push(Side::Right);
                self.nodes += 1;
                if self.problem.apply(&mut self.state, &top.decision, Side::Right) {
                    return true;
                }
                self.failures += 1;
            } else {
                self.frames.pop();
                self.path.pop();
            }
        }
        false
    }

    /// Abandons the rest of the owned subtree.
    pub fn abandon(&mut self) {
        for f in &mut self.frames[self.base..] {
            f.right_pending = false;
        }
    }

    fn pending_depths(&self) -> impl DoubleEndedIterator<Item = usize> + '_ {
        (self.base..self.frames.len()).filter(|&k| self.frames[k].right_pending)
    }

    pub fn has_pending_right(&self) -> bool {
        self.pending_depths().next().is_some()
    }

    fn detach(&mut self, k: usize) -> PathId {
        self.frames[k].right_pending = false;
        let mut p = PathId::from_sides(self.path.sides()[..k].to_vec());
        p.push(Side::Right);
        p
    }

    /// Detaches the deepest unexplored right branch on the current path and
    /// returns its path.
    pub fn split_lowest_right(&mut self) -> Option<PathId> {
        let k = self.pending_depths().next_back()?;
        Some(self.detach(k))
    }

    /// Detaches the shallowest unexplored right branch on the current path.
    pub fn split_highest_right(&mut self) -> Option<PathId> {
        let k = self.pending_depths().next()?;
        Some(self.detach(k))
    }

    pub fn solution_record(&self) -> SolutionRecord {
        SolutionRecord {
            assignment: self.problem.assignment(&self.state),
            objective: self.problem.objective(&self.state),
            path: self.path.clone(),
        }
    }
}

/// Sequential search over any [`SearchProblem`].
///
/// `First` stops at the leftmost solution; `All` returns every solution in
/// increasing path order; `Optimize` is depth-first branch and bound with
/// strict bounding, returning the leftmost among optimal solutions.
pub fn solve_seq_problem<P: SearchProblem>(problem: &P, mode: Mode) -> (Vec<SolutionRecord>, SearchStats) {
    let sense = problem.sense();
    let mut out: Vec<SolutionRecord> = Vec::new();
    let mut stats = SearchStats::default();
    let Some(mut dfs) = DfsState::at_root(problem) else {
        stats.nodes_expanded = 1;
        stats.failures = 1;
        return (out, stats);
    };
    'search: loop {
        if mode == Mode::Optimize {
            if let Some(inc) = out.first() {
                let bound = problem.objective_bound(dfs.state());
                if !may_improve(sense, bound, dfs.record_path(), (inc.objective, &inc.path)) {
                    if !dfs.backtrack() {
                        break 'search;
                    }
                    continue;
                }
            }
        }
        match dfs.branch() {
            Branching::Leaf => {
                if problem.is_solution(dfs.state()) {
                    stats.solutions_found += 1;
                    let rec = dfs.solution_record();
                    match mode {
                        Mode::First => {
                            out.push(rec);
                            break 'search;
                        }
                        Mode::All => out.push(rec),
                        Mode::Optimize => {
                            let better = match out.first() {
                                None => true,
                                Some(inc) => may_improve(sense, rec.objective, &rec.path, (inc.objective, &inc.path)),
                            };
                            if better {
                                out.clear();
                                out.push(rec);
                            }
                        }
                    }
                } else {
                    dfs.failures += 1;
                }
                if !dfs.backtrack() {
                    break 'search;
                }
            }
            Branching::Decision(d) => {
                if !dfs.descend(d) && !dfs.backtrack() {
                    break 'search;
                }
            }
        }
    }
    stats.nodes_expanded = dfs.nodes;
    stats.failures = dfs.failures;
    stats.max_depth = dfs.max_depth;
    (out, stats)
}

/// Sequential search on a constraint model.
pub fn solve_seq(m: &Model, mode: Mode) -> (Vec<SolutionRecord>, SearchStats) {
    solve_seq_problem(&CpProblem::new(m), mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, Objective, VarDecl, VarId};

    pub(crate) fn queens(n: usize) -> Model {
        let vars: Vec<VarDecl> = (0..n)
            .map(|i| VarDecl::interval(format!("q{i}"), 0, n as i64 - 1))
            .collect();
        let mut cs = vec![Constraint::all_different((0..n).map(VarId).collect())];
        for i in 0..n {
            for j in i + 1..n {
                let d = (j - i) as i64;
                cs.push(Constraint::lin_ne(vec![1, -1], vec![VarId(i), VarId(j)], d));
                cs.push(Constraint::lin_ne(vec![1, -1], vec![VarId(i), VarId(j)], -d));
            }
        }
        Model::new(vars, cs, Objective::Satisfy)
    }

    #[test]
    fn heuristic_examples() {
        let s = DomainStore::from_domains(vec![vec![4], vec![2, 5, 7]]);
        assert_eq!(branch_heuristic(&s), Branching::Decision(Decision::assign(VarId(1), 2)));
        let s = DomainStore::from_domains(vec![vec![4], vec![7]]);
        assert_eq!(branch_heuristic(&s), Branching::Leaf);
        let s = DomainStore::from_domains(vec![vec![0, 1]]);
        assert_eq!(branch_heuristic(&s), Branching::Decision(Decision::assign(VarId(0), 0)));
    }

    #[test]
    fn four_queens() {
        let m = queens(4);
        let (first, _) = solve_seq(&m, Mode::First);
        assert_eq!(first[0].assignment.values, vec![1, 3, 0, 2]);
        let (all, stats) = solve_seq(&m, Mode::All);
        assert_eq!(all.len(), 2);
        assert!(all[0].path < all[1].path);
        assert_eq!(first[0], all[0]);
        assert_eq!(stats.solutions_found, 2);
    }

    #[test]
    fn minimize_example() {
        let m = Model::new(
            vec![VarDecl::interval("x", 0, 3), VarDecl::interval("y", 0, 3)],
            vec![Constraint::lin_le(vec![-1, -1], vec![VarId(0), VarId(1)], -3)],
            Objective::Minimize(VarId(0)),
        );
        let (best, _) = solve_seq(&m, Mode::Optimize);
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].objective, Some(0));
        assert_eq!(best[0].assignment.values, vec![0, 3]);
    }

    #[test]
    fn unsat_root_returns_empty() {
        let m = Model::new(
            vec![VarDecl::interval("x", 0, 1)],
            vec![Constraint::lin_eq(vec![1], vec![VarId(0)], 5)],
            Objective::Satisfy,
        );
        let (sols, stats) = solve_seq(&m, Mode::First);
        assert!(sols.is_empty());
        assert_eq!(stats.nodes_expanded, 1);
    }

    #[test]
    fn record_path_follows_the_walk() {
        let m = Model::new(
            vec![VarDecl::interval("x", 0, 2), VarDecl::interval("y", 0, 2)],
            vec![],
            Objective::Satisfy,
        );
        let p = CpProblem::new(&m);
        let mut dfs = DfsState::at_root(&p).unwrap();
        assert_eq!(dfs.record_path(), &PathId::root());
        let Branching::Decision(d) = dfs.branch() else { panic!() };
        assert!(dfs.descend(d));
        // x fixed to 0: branch on y and take the right branch via backtrack
        let Branching::Decision(d) = dfs.branch() else { panic!() };
        assert!(dfs.descend(d));
        assert_eq!(dfs.record_path(), &PathId::from_bits(&[0, 0]).unwrap());
        assert!(dfs.backtrack());
        assert_eq!(dfs.record_path(), &PathId::from_bits(&[0, 1]).unwrap());
        // [0,1] has no pending right: backtracking lands on the sibling of [0]
        assert!(dfs.backtrack());
        assert_eq!(dfs.record_path(), &PathId::from_bits(&[1]).unwrap());
    }

    #[test]
    fn split_rules_pick_deepest_and_shallowest() {
        let m = Model::new(
            (0..3).map(|i| VarDecl::interval(format!("v{i}"), 0, 1)).collect(),
            vec![],
            Objective::Satisfy,
        );
        let p = CpProblem::new(&m);
        let mut dfs = DfsState::at_root(&p).unwrap();
        for _ in 0..3 {
            let Branching::Decision(d) = dfs.branch() else { panic!() };
            assert!(dfs.descend(d));
        }
        // at [0,0,0] with pending rights at depths 1, 2 and 3
        let mut other = DfsState::at_root(&p).unwrap();
        for _ in 0..3 {
            let Branching::Decision(d) = other.branch() else { panic!() };
            assert!(other.descend(d));
        }
        assert_eq!(dfs.split_lowest_right(), PathId::from_bits(&[0, 0, 1]));
        assert_eq!(dfs.split_lowest_right(), PathId::from_bits(&[0, 1]));
        assert_eq!(other.split_highest_right(), PathId::from_bits(&[1]));
        assert_eq!(other.split_highest_right(), PathId::from_bits(&[0, 1]));
        assert_eq!(dfs.split_lowest_right(), PathId::from_bits(&[1]));
        assert_eq!(dfs.split_lowest_right(), None);
    }

    #[test]
    fn replay_counts_prefix_nodes() {
        let m = queens(4);
        let p = CpProblem::new(&m);
        let (r, cost) = DfsState::replay(&p, &PathId::from_bits(&[1]).unwrap());
        let Replay::Ready(dfs) = r else { panic!("feasible") };
        assert_eq!(dfs.replayed, 1);
        assert_eq!(cost, ReplayCost { nodes: 2, replayed: 1 });
        assert_eq!(dfs.subtree_root(), PathId::from_bits(&[1]).unwrap());
        assert_eq!(dfs.state().domain(VarId(0)), &[1, 2, 3]);

        let (r, _) = DfsState::replay(&p, &PathId::root());
        let Replay::Ready(dfs) = r else { panic!() };
        assert_eq!(dfs.replayed, 0);
    }

    #[test]
    fn replay_of_failing_path_is_pruned() {
        // [0] fixes q0 = 0, leaving q1 in {2,3}; [0,1] forces q1 = 3, which
        // propagates to q2 = 1, q3 = 2 and a diagonal clash.
        let m = queens(4);
        let p = CpProblem::new(&m);
        let (r, cost) = DfsState::replay(&p, &PathId::from_bits(&[0, 1]).unwrap());
        assert!(matches!(r, Replay::Pruned));
        assert_eq!(cost, ReplayCost { nodes: 3, replayed: 2 });
    }

    #[test]
    fn reproducible_runs() {
        let m = queens(6);
        let a = solve_seq(&m, Mode::All);
        let b = solve_seq(&m, Mode::All);
        assert_eq!(a, b);
    }

    #[test]
    fn may_improve_rules() {
        let inc_path = PathId::from_bits(&[1, 0]).unwrap();
        let left = PathId::from_bits(&[0, 1]).unwrap();
        let right = PathId::from_bits(&[1, 1]).unwrap();
        let inc = (Some(18), &inc_path);
        assert!(may_improve(Sense::Minimize, Some(17), &right, inc));
        assert!(may_improve(Sense::Minimize, Some(18), &left, inc));
        assert!(!may_improve(Sense::Minimize, Some(18), &right, inc));
        assert!(!may_improve(Sense::Minimize, Some(19), &left, inc));
        assert!(may_improve(Sense::Maximize, Some(19), &right, inc));
        assert!(may_improve(Sense::Satisfy, None, &left, (None, &inc_path)));
        assert!(!may_improve(Sense::Satisfy, None, &right, (None, &inc_path)));
    }
}
