//! Worker-local domain store with a decision trail, and fixpoint propagation.
//!
//! Filtering is deliberately weak: bounds reasoning for linear `≤`/`=`,
//! value elimination for `≠` once a single variable is left open, and value
//! elimination for all-different once a variable is fixed. All filters are
//! monotone, so the fixpoint does not depend on the order constraints are
//! scheduled in.

use std::collections::VecDeque;

use crate::model::{Constraint, ContractError, LinearKind, Model, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Polarity {
    Assign,
    Exclude,
}

/// A branching decision. The left child of a node applies `var = value`,
/// the right child `var ≠ value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decision {
    pub var: VarId,
    pub value: i64,
    pub polarity: Polarity,
}

impl Decision {
    pub fn assign(var: VarId, value: i64) -> Self {
        Decision {
            var,
            value,
            polarity: Polarity::Assign,
        }
    }

    pub fn exclude(var: VarId, value: i64) -> Self {
        Decision {
            var,
            value,
            polarity: Polarity::Exclude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TrailEntry {
    var: VarId,
    removed: Vec<i64>,
}

/// Per-variable sorted domains plus the trail needed to undo decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainStore {
    domains: Vec<Vec<i64>>,
    trail: Vec<TrailEntry>,
    /// Trail length at the start of each decision level.
    levels: Vec<usize>,
}

/// Marker for a domain wipe-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wipeout;

impl DomainStore {
    pub fn new(m: &Model) -> Self {
        DomainStore {
            domains: m.vars.iter().map(|v| v.domain.clone()).collect(),
            trail: Vec::new(),
            levels: Vec::new(),
        }
    }

    pub fn from_domains(domains: Vec<Vec<i64>>) -> Self {
        DomainStore {
            domains,
            trail: Vec::new(),
            levels: Vec::new(),
        }
    }

    pub fn domain(&self, var: VarId) -> &[i64] {
        &self.domains[var.index()]
    }

    pub fn domains(&self) -> &[Vec<i64>] {
        &self.domains
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn is_fixed(&self, var: VarId) -> bool {
        self.domains[var.index()].len() == 1
    }

    pub fn all_fixed(&self) -> bool {
        self.domains.iter().all(|d| d.len() == 1)
    }

    pub fn value(&self, var: VarId) -> Option<i64> {
        match self.domains[var.index()].as_slice() {
            [v] => Some(*v),
            _ => None,
        }
    }

    pub fn min(&self, var: VarId) -> i64 {
        self.domains[var.index()][0]
    }

    pub fn max(&self, var: VarId) -> i64 {
        *self.domains[var.index()].last().expect("non-empty domain")
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Removes every value for which `drop` holds. Returns whether anything
    /// changed.
    fn remove_where(&mut self, var: VarId, mut drop: impl FnMut(i64) -> bool) -> Result<bool, Wipeout> {
        let dom = &mut self.domains[var.index()];
        let mut removed = Vec::new();
        dom.retain(|&v| {
            if drop(v) {
                removed.push(v);
                false
            } else {
                true
            }
        });
        if removed.is_empty() {
            return Ok(false);
        }
        let empty = dom.is_empty();
        self.trail.push(TrailEntry { var, removed });
        if empty {
            Err(Wipeout)
        } else {
            Ok(true)
        }
    }

    pub fn remove_value(&mut self, var: VarId, value: i64) -> Result<bool, Wipeout> {
        if self.domains[var.index()].binary_search(&value).is_err() {
            return Ok(false);
        }
        self.remove_where(var, |v| v == value)
    }

    pub fn restrict_max(&mut self, var: VarId, ub: i64) -> Result<bool, Wipeout> {
        if self.max(var) <= ub {
            return Ok(false);
        }
        self.remove_where(var, |v| v > ub)
    }

    pub fn restrict_min(&mut self, var: VarId, lb: i64) -> Result<bool, Wipeout> {
        if self.min(var) >= lb {
            return Ok(false);
        }
        self.remove_where(var, |v| v < lb)
    }

    pub fn assign(&mut self, var: VarId, value: i64) -> Result<bool, Wipeout> {
        self.remove_where(var, |v| v != value)
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let TrailEntry { var, removed } = self.trail.pop().expect("trail entry");
            let dom = &mut self.domains[var.index()];
            let mut merged = Vec::with_capacity(dom.len() + removed.len());
            let (mut i, mut j) = (0, 0);
            while i < dom.len() && j < removed.len() {
                if dom[i] < removed[j] {
                    merged.push(dom[i]);
                    i += 1;
                } else {
                    merged.push(removed[j]);
                    j += 1;
                }
            }
            merged.extend_from_slice(&dom[i..]);
            merged.extend_from_slice(&removed[j..]);
            *dom = merged;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationOutcome {
    Stable,
    /// Index of the constraint whose filter emptied a domain.
    Failure(usize),
}

impl PropagationOutcome {
    pub fn is_stable(self) -> bool {
        self == PropagationOutcome::Stable
    }
}

fn floor_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

/// Propagation engine bound to one model: holds the variable → constraint
/// watch lists. Cheap to share; all mutable state lives in the store.
#[derive(Debug, Clone)]
pub struct Propagator<'m> {
    model: &'m Model,
    watches: Vec<Vec<usize>>,
}

struct Queue {
    items: VecDeque<usize>,
    queued: Vec<bool>,
}

impl Queue {
    fn new(n: usize) -> Self {
        Queue {
            items: VecDeque::new(),
            queued: vec![false; n],
        }
    }

    fn push(&mut self, c: usize) {
        if !self.queued[c] {
            self.queued[c] = true;
            self.items.push_back(c);
        }
    }

    fn pop(&mut self) -> Option<usize> {
        let c = self.items.pop_front()?;
        self.queued[c] = false;
        Some(c)
    }
}

impl<'m> Propagator<'m> {
    pub fn new(model: &'m Model) -> Self {
        let mut watches = vec![Vec::new(); model.num_vars()];
        for (idx, c) in model.constraints.iter().enumerate() {
            for v in c.vars() {
                if watches[v.index()].last() != Some(&idx) {
                    watches[v.index()].push(idx);
                }
            }
        }
        Propagator { model, watches }
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    /// Runs every constraint filter to a fixpoint.
    pub fn propagate(&self, store: &mut DomainStore) -> PropagationOutcome {
        let mut queue = Queue::new(self.model.constraints.len());
        for idx in 0..self.model.constraints.len() {
            queue.push(idx);
        }
        self.run(store, queue)
    }

    fn propagate_from(&self, store: &mut DomainStore, var: VarId) -> PropagationOutcome {
        let mut queue = Queue::new(self.model.constraints.len());
        for &idx in &self.watches[var.index()] {
            queue.push(idx);
        }
        self.run(store, queue)
    }

    fn run(&self, store: &mut DomainStore, mut queue: Queue) -> PropagationOutcome {
        let mut changed = Vec::new();
        while let Some(idx) = queue.pop() {
            changed.clear();
            if self.filter(idx, store, &mut changed).is_err() {
                return PropagationOutcome::Failure(idx);
            }
            for var in &changed {
                for &c in &self.watches[var.index()] {
                    queue.push(c);
                }
            }
        }
        PropagationOutcome::Stable
    }

    fn filter(&self, idx: usize, store: &mut DomainStore, changed: &mut Vec<VarId>) -> Result<(), Wipeout> {
        match &self.model.constraints[idx] {
            Constraint::Linear {
                kind,
                coeffs,
                vars,
                rhs,
            } => match kind {
                LinearKind::Le => filter_le(store, coeffs.iter().copied(), vars, *rhs, changed),
                LinearKind::Eq => {
                    filter_le(store, coeffs.iter().copied(), vars, *rhs, changed)?;
                    filter_le(store, coeffs.iter().map(|c| -c), vars, -rhs, changed)
                }
                LinearKind::Ne => filter_ne(store, coeffs, vars, *rhs, changed),
            },
            Constraint::AllDifferent { vars } => filter_all_different(store, vars, changed),
        }
    }
}

/// Bounds reasoning for `Σ c·x ≤ rhs`.
fn filter_le(
    store: &mut DomainStore,
    coeffs: impl Iterator<Item = i64> + Clone,
    vars: &[VarId],
    rhs: i64,
    changed: &mut Vec<VarId>,
) -> Result<(), Wipeout> {
    let min_term = |store: &DomainStore, c: i64, x: VarId| {
        if c >= 0 {
            c * store.min(x)
        } else {
            c * store.max(x)
        }
    };
    let total_min: i64 = coeffs.clone().zip(vars).map(|(c, &x)| min_term(store, c, x)).sum();
    if total_min > rhs {
        return Err(Wipeout);
    }
    // Tightening one variable only cuts the side that does not contribute to
    // total_min, so total_min stays valid across the loop.
    for (c, &x) in coeffs.zip(vars) {
        if c == 0 {
            continue;
        }
        let slack = rhs - (total_min - min_term(store, c, x));
        let did = if c > 0 {
            store.restrict_max(x, floor_div(slack, c))?
        } else {
            store.restrict_min(x, ceil_div(slack, c))?
        };
        if did {
            changed.push(x);
        }
    }
    Ok(())
}

fn filter_ne(
    store: &mut DomainStore,
    coeffs: &[i64],
    vars: &[VarId],
    rhs: i64,
    changed: &mut Vec<VarId>,
) -> Result<(), Wipeout> {
    let mut open = None;
    let mut fixed_sum = 0i64;
    for (&c, &x) in coeffs.iter().zip(vars) {
        if c == 0 {
            continue;
        }
        match store.value(x) {
            Some(v) => fixed_sum += c * v,
            None => {
                if open.is_some() {
                    return Ok(());
                }
                open = Some((c, x));
            }
        }
    }
    match open {
        None if fixed_sum == rhs => Err(Wipeout),
        None => Ok(()),
        Some((c, x)) => {
            let rest = rhs - fixed_sum;
            if rest % c == 0 && store.remove_value(x, rest / c)? {
                changed.push(x);
            }
            Ok(())
        }
    }
}

fn filter_all_different(store: &mut DomainStore, vars: &[VarId], changed: &mut Vec<VarId>) -> Result<(), Wipeout> {
    for (i, &x) in vars.iter().enumerate() {
        let Some(v) = store.value(x) else { continue };
        for (j, &y) in vars.iter().enumerate() {
            if i != j && y != x && store.remove_value(y, v)? {
                changed.push(y);
            }
        }
    }
    Ok(())
}

/// One-shot full propagation; builds watch lists on every call.
pub fn propagate(store: &mut DomainStore, m: &Model) -> PropagationOutcome {
    Propagator::new(m).propagate(store)
}

/// Opens a decision level, applies `d`, and propagates. On `Failure` the
/// store is left at the new level so that [`pop_decision`] restores it.
pub fn push_decision(
    store: &mut DomainStore,
    prop: &Propagator<'_>,
    d: Decision,
) -> Result<PropagationOutcome, ContractError> {
    let dom = store.domain(d.var);
    if dom.binary_search(&d.value).is_err() {
        return Err(ContractError::ValueNotInDomain {
            var: d.var,
            value: d.value,
        });
    }
    if d.polarity == Polarity::Exclude && dom.len() < 2 {
        return Err(ContractError::ExcludeOnFixed { var: d.var });
    }
    store.levels.push(store.trail.len());
    let applied = match d.polarity {
        Polarity::Assign => store.assign(d.var, d.value),
        Polarity::Exclude => store.remove_value(d.var, d.value),
    };
    Ok(match applied {
        Ok(_) => prop.propagate_from(store, d.var),
        // Only reachable through the precondition checks above failing.
        Err(Wipeout) => PropagationOutcome::Failure(usize::MAX),
    })
}

/// Restores the domains exactly as they were before the matching push.
pub fn pop_decision(store: &mut DomainStore) -> Result<(), ContractError> {
    let mark = store.levels.pop().ok_or(ContractError::EmptyTrail)?;
    store.undo_to(mark);
    Ok(())
}
