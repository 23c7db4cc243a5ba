//! Exhaustive enumeration over the full Cartesian product of the initial
//! domains. Used only as a reference for small instances.

use crate::model::{check_assignment, Assignment, ContractError, Model, Sense};
use crate::search::Mode;

/// Default cap on the number of enumerated assignments.
pub const DEFAULT_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRecord {
    pub assignment: Assignment,
    pub objective: Option<i64>,
}

/// Enumerates assignments in lexicographic order (declaration order,
/// ascending values).
///
/// `First` returns the lexicographically first feasible assignment, `All`
/// every feasible one in order, `Optimize` the lexicographically first
/// assignment among those with the best objective value.
pub fn brute_force_solve(m: &Model, mode: Mode, cap: u128) -> Result<Vec<OracleRecord>, ContractError> {
    let size = m.search_space();
    if size > cap {
        return Err(ContractError::OracleCapExceeded { size, cap });
    }
    let n = m.num_vars();
    if m.vars.iter().any(|v| v.domain.is_empty()) {
        return Ok(Vec::new());
    }
    let sense = m.sense();
    let objective_of = |values: &[i64]| m.objective.var().map(|v| values[v.index()]);

    let mut digits = vec![0usize; n];
    let mut values: Vec<i64> = m.vars.iter().map(|v| v.domain[0]).collect();
    let mut found = Vec::new();
    let mut best: Option<OracleRecord> = None;
    loop {
        let a = Assignment::new(values.clone());
        if check_assignment(m, &a)? {
            let objective = objective_of(&values);
            match mode {
                Mode::First => return Ok(vec![OracleRecord { assignment: a, objective }]),
                Mode::All => found.push(OracleRecord { assignment: a, objective }),
                Mode::Optimize => {
                    let replace = match &best {
                        None => true,
                        Some(b) => sense != Sense::Satisfy && sense.strictly_better(objective, b.objective),
                    };
                    if replace {
                        best = Some(OracleRecord { assignment: a, objective });
                    }
                }
            }
        }
        // odometer increment, last variable fastest
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(match mode {
                    Mode::Optimize => best.into_iter().collect(),
                    _ => found,
                });
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < m.vars[i].domain.len() {
                values[i] = m.vars[i].domain[digits[i]];
                break;
            }
            digits[i] = 0;
            values[i] = m.vars[i].domain[0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, Objective, VarDecl, VarId};

    fn queens(n: usize) -> Model {
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
    fn four_queens_first_and_all() {
        let m = queens(4);
        let first = brute_force_solve(&m, Mode::First, DEFAULT_CAP).unwrap();
        assert_eq!(first[0].assignment.values, vec![1, 3, 0, 2]);
        let all = brute_force_solve(&m, Mode::All, DEFAULT_CAP).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].assignment.values, vec![2, 0, 3, 1]);
    }

    #[test]
    fn minimize_x_with_sum_at_least_three() {
        let m = Model::new(
            vec![VarDecl::interval("x", 0, 3), VarDecl::interval("y", 0, 3)],
            vec![Constraint::lin_le(vec![-1, -1], vec![VarId(0), VarId(1)], -3)],
            Objective::Minimize(VarId(0)),
        );
        let best = brute_force_solve(&m, Mode::Optimize, DEFAULT_CAP).unwrap();
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].assignment.values, vec![0, 3]);
        assert_eq!(best[0].objective, Some(0));
    }

    #[test]
    fn all_mode_is_strictly_increasing() {
        let all = brute_force_solve(&queens(6), Mode::All, DEFAULT_CAP).unwrap();
        assert_eq!(all.len(), 4);
        assert!(all.windows(2).all(|w| w[0].assignment < w[1].assignment));
    }

    #[test]
    fn cap_is_enforced() {
        let err = brute_force_solve(&queens(8), Mode::First, DEFAULT_CAP).unwrap_err();
        assert!(matches!(err, ContractError::OracleCapExceeded { .. }));
    }
}
