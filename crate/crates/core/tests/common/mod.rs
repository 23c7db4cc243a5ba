#![allow(dead_code)]

use detcp::model::{Constraint, Model, Objective, VarDecl, VarId};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

/// Small random model: 2 to 6 variables, up to 5 constraints of any kind.
pub fn random_model(rng: &mut StdRng) -> Model {
    random_model_with(rng, false)
}

/// Same, with a random minimize or maximize objective when `optimize`.
pub fn random_model_with(rng: &mut StdRng, optimize: bool) -> Model {
    let n = rng.gen_range(2..=6);
    let vars: Vec<VarDecl> = (0..n)
        .map(|i| {
            if rng.gen_bool(0.5) {
                let lo = rng.gen_range(-3..=2);
                VarDecl::interval(format!("v{i}"), lo, lo + rng.gen_range(1..=5))
            } else {
                let k = rng.gen_range(2..=5);
                VarDecl::set(format!("v{i}"), (0..k).map(|_| rng.gen_range(-6..=6)).chain([7]))
            }
        })
        .collect();
    let mut cs = Vec::new();
    for _ in 0..rng.gen_range(0..=5) {
        let k = rng.gen_range(1..=n.min(4));
        let mut scope: Vec<usize> = (0..n).collect();
        scope.shuffle(rng);
        let scope: Vec<VarId> = scope[..k].iter().map(|&i| VarId(i)).collect();
        let coeffs: Vec<i64> = (0..k).map(|_| rng.gen_range(-3..=3)).collect();
        let rhs = rng.gen_range(-5..=8);
        cs.push(match rng.gen_range(0..4) {
            0 => Constraint::lin_eq(coeffs, scope, rhs),
            1 => Constraint::lin_le(coeffs, scope, rhs),
            2 => Constraint::lin_ne(coeffs, scope, rhs),
            _ => Constraint::all_different(scope),
        });
    }
    let objective = if !optimize {
        Objective::Satisfy
    } else if rng.gen() {
        Objective::Minimize(VarId(rng.gen_range(0..n)))
    } else {
        Objective::Maximize(VarId(rng.gen_range(0..n)))
    };
    Model::new(vars, cs, objective)
}

