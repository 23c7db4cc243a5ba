//! Immutable problem representation: variables with finite integer domains,
//! linear and all-different constraints, and an optional objective variable.
//!
//! A [`Model`] is built once and then shared read-only by every search
//! worker. [`validate_model`] reports every structural problem at once;
//! the parser refuses any model for which that list is non-empty.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a variable in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    /// Sorted, duplicate-free initial domain.
    pub domain: Vec<i64>,
}

impl VarDecl {
    pub fn interval(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        VarDecl {
            name: name.into(),
            domain: if lo <= hi { (lo..=hi).collect() } else { Vec::new() },
        }
    }

    pub fn set(name: impl Into<String>, values: impl IntoIterator<Item = i64>) -> Self {
        let mut domain: Vec<i64> = values.into_iter().collect();
        domain.sort_unstable();
        domain.dedup();
        VarDecl {
            name: name.into(),
            domain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearKind {
    Eq,
    Le,
    Ne,
}

impl LinearKind {
    pub fn builtin_name(self) -> &'static str {
        match self {
            LinearKind::Eq => "int_lin_eq",
            LinearKind::Le => "int_lin_le",
            LinearKind::Ne => "int_lin_ne",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            LinearKind::Eq => lhs == rhs,
            LinearKind::Le => lhs <= rhs,
            LinearKind::Ne => lhs != rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `Σ coeffs[i] * vars[i]  (= | ≤ | ≠)  rhs`
    Linear {
        kind: LinearKind,
        coeffs: Vec<i64>,
        vars: Vec<VarId>,
        rhs: i64,
    },
    AllDifferent { vars: Vec<VarId> },
}

impl Constraint {
    pub fn lin_eq(coeffs: Vec<i64>, vars: Vec<VarId>, rhs: i64) -> Self {
        Constraint::Linear {
            kind: LinearKind::Eq,
            coeffs,
            vars,
            rhs,
        }
    }

    pub fn lin_le(coeffs: Vec<i64>, vars: Vec<VarId>, rhs: i64) -> Self {
        Constraint::Linear {
            kind: LinearKind::Le,
            coeffs,
            vars,
            rhs,
        }
    }

    pub fn lin_ne(coeffs: Vec<i64>, vars: Vec<VarId>, rhs: i64) -> Self {
        Constraint::Linear {
            kind: LinearKind::Ne,
            coeffs,
            vars,
            rhs,
        }
    }

    pub fn all_different(vars: Vec<VarId>) -> Self {
        Constraint::AllDifferent { vars }
    }

    pub fn vars(&self) -> &[VarId] {
        match self {
            Constraint::Linear { vars, .. } | Constraint::AllDifferent { vars } => vars,
        }
    }

    /// Evaluates the constraint on a complete value vector.
    pub fn is_satisfied(&self, values: &[i64]) -> bool {
        match self {
            Constraint::Linear {
                kind,
                coeffs,
                vars,
                rhs,
            } => {
                let lhs: i64 = coeffs
                    .iter()
                    .zip(vars)
                    .map(|(c, v)| c * values[v.index()])
                    .sum();
                kind.holds(lhs, *rhs)
            }
            Constraint::AllDifferent { vars } => {
                let mut seen = HashSet::with_capacity(vars.len());
                vars.iter().all(|v| seen.insert(values[v.index()]))
            }
        }
    }
}

/// Direction of optimization. `Satisfy` models have no objective variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Satisfy,
    Minimize,
    Maximize,
}

impl Sense {
    /// True iff `a` is strictly better than `b` under this sense.
    /// Satisfy treats every value as equal.
    pub fn strictly_better(self, a: Option<i64>, b: Option<i64>) -> bool {
        match (self, a, b) {
            (Sense::Minimize, Some(a), Some(b)) => a < b,
            (Sense::Maximize, Some(a), Some(b)) => a > b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    Satisfy,
    Minimize(VarId),
    Maximize(VarId),
}

impl Objective {
    pub fn sense(self) -> Sense {
        match self {
            Objective::Satisfy => Sense::Satisfy,
            Objective::Minimize(_) => Sense::Minimize,
            Objective::Maximize(_) => Sense::Maximize,
        }
    }

    pub fn var(self) -> Option<VarId> {
        match self {
            Objective::Satisfy => None,
            Objective::Minimize(v) | Objective::Maximize(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub vars: Vec<VarDecl>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl Model {
    pub fn new(vars: Vec<VarDecl>, constraints: Vec<Constraint>, objective: Objective) -> Self {
        Model {
            vars,
            constraints,
            objective,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn name_of(&self, var: VarId) -> &str {
        &self.vars[var.index()].name
    }

    pub fn sense(&self) -> Sense {
        self.objective.sense()
    }

    /// Upper bound on the depth of any binary search tree built with
    /// `x = v` / `x ≠ v` decisions: each decision removes at least one value.
    pub fn max_depth(&self) -> usize {
        self.vars
            .iter()
            .map(|v| v.domain.len().saturating_sub(1))
            .sum()
    }

    /// Product of the initial domain sizes, saturating at `u128::MAX`.
    pub fn search_space(&self) -> u128 {
        self.vars
            .iter()
            .fold(1u128, |acc, v| acc.saturating_mul(v.domain.len() as u128))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnknownVariable { constraint: usize, var: VarId },
    UnknownObjectiveVariable { var: VarId },
    EmptyDomain { var: String },
    UnsortedDomain { var: String },
    DuplicateName { var: String },
    ArityMismatch { constraint: usize, coeffs: usize, vars: usize },
    EmptyScope { constraint: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UnknownVariable { constraint, var } => {
                write!(f, "unknown variable {var} in constraint {constraint}")
            }
            Diagnostic::UnknownObjectiveVariable { var } => {
                write!(f, "unknown variable {var} in objective")
            }
            Diagnostic::EmptyDomain { var } => write!(f, "empty domain for variable {var}"),
            Diagnostic::UnsortedDomain { var } => {
                write!(f, "domain of variable {var} is not a sorted set")
            }
            Diagnostic::DuplicateName { var } => write!(f, "duplicate variable {var}"),
            Diagnostic::ArityMismatch {
                constraint,
                coeffs,
                vars,
            } => write!(
                f,
                "arity mismatch in constraint {constraint}: {coeffs} coefficients, {vars} variables"
            ),
            Diagnostic::EmptyScope { constraint } => {
                write!(f, "constraint {constraint} has no variables")
            }
        }
    }
}

/// Returns every invariant violation of `m`; an empty list means valid.
pub fn validate_model(m: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut names = HashSet::new();
    for decl in &m.vars {
        if !names.insert(decl.name.as_str()) {
            out.push(Diagnostic::DuplicateName {
                var: decl.name.clone(),
            });
        }
        if decl.domain.is_empty() {
            out.push(Diagnostic::EmptyDomain {
                var: decl.name.clone(),
            });
        } else if decl.domain.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Diagnostic::UnsortedDomain {
                var: decl.name.clone(),
            });
        }
    }
    let known = |v: &VarId| v.index() < m.vars.len();
    for (idx, c) in m.constraints.iter().enumerate() {
        if c.vars().is_empty() {
            out.push(Diagnostic::EmptyScope { constraint: idx });
        }
        if let Constraint::Linear { coeffs, vars, .. } = c {
            if coeffs.len() != vars.len() {
                out.push(Diagnostic::ArityMismatch {
                    constraint: idx,
                    coeffs: coeffs.len(),
                    vars: vars.len(),
                });
            }
        }
        for v in c.vars() {
            if !known(v) {
                out.push(Diagnostic::UnknownVariable {
                    constraint: idx,
                    var: *v,
                });
            }
        }
    }
    if let Some(v) = m.objective.var() {
        if !known(&v) {
            out.push(Diagnostic::UnknownObjectiveVariable { var: v });
        }
    }
    out
}

/// A complete assignment, indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<i64>,
}

impl Assignment {
    pub fn new(values: Vec<i64>) -> Self {
        Assignment { values }
    }

    pub fn get(&self, var: VarId) -> i64 {
        self.values[var.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("incomplete assignment: {got} values for {expected} variables")]
    IncompleteAssignment { expected: usize, got: usize },
    #[error("decision on {var} with value {value} not in its domain")]
    ValueNotInDomain { var: VarId, value: i64 },
    #[error("exclusion on {var} requires at least two values in its domain")]
    ExcludeOnFixed { var: VarId },
    #[error("pop on a store without decision levels")]
    EmptyTrail,
    #[error("search space of {size} assignments exceeds the cap of {cap}")]
    OracleCapExceeded { size: u128, cap: u128 },
}

/// True iff every constraint holds under `a`.
pub fn check_assignment(m: &Model, a: &Assignment) -> Result<bool, ContractError> {
    if a.values.len() != m.vars.len() {
        return Err(ContractError::IncompleteAssignment {
            expected: m.vars.len(),
            got: a.values.len(),
        });
    }
    Ok(m.constraints.iter().all(|c| c.is_satisfied(&a.values)))
}
