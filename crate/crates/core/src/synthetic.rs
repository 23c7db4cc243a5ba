//! Synthetic binary trees with a chosen solution layout.
//!
//! Nodes carry no constraints: the state is the path itself and feasibility
//! is decided at the leaves, so the engine has to descend the whole way.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Assignment, Sense};
use crate::path::{PathId, Side};
use crate::search::{Branching, SearchProblem};

pub const MAX_SYNTHETIC_DEPTH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Single solution at the rightmost leaf.
    #[serde(alias = "best")]
    BestCase,
    /// Single solution at the leftmost leaf.
    #[serde(alias = "worst")]
    WorstCase,
    /// `solution_count` evenly spaced solution leaves, the first one leftmost.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub depth: usize,
    pub shape: Shape,
    #[serde(default = "one")]
    pub solution_count: u64,
    /// Busy-loop iterations per expanded node, to give nodes a cost.
    #[serde(default)]
    pub work_per_node: u32,
}

fn one() -> u64 {
    1
}

impl SyntheticSpec {
    pub fn new(shape: Shape, depth: usize) -> Self {
        SyntheticSpec {
            depth,
            shape,
            solution_count: 1,
            work_per_node: 0,
        }
    }

    pub fn balanced(depth: usize, solution_count: u64) -> Self {
        SyntheticSpec {
            solution_count,
            ..Self::new(Shape::Balanced, depth)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyntheticError {
    DepthOutOfRange(usize),
    BadSolutionCount { count: u64, leaves: u64 },
}

impl fmt::Display for SyntheticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticError::DepthOutOfRange(d) => {
                write!(f, "depth {d} out of range 1..={MAX_SYNTHETIC_DEPTH}")
            }
            SyntheticError::BadSolutionCount { count, leaves } => {
                write!(f, "solution count {count} not in 1..={leaves}")
            }
        }
    }
}

impl std::error::Error for SyntheticError {}

#[derive(Debug, Clone)]
pub struct SyntheticTree {
    spec: SyntheticSpec,
    stride: u64,
}

pub fn gen_synthetic(spec: SyntheticSpec) -> Result<SyntheticTree, SyntheticError> {
    if spec.depth == 0 || spec.depth > MAX_SYNTHETIC_DEPTH {
        return Err(SyntheticError::DepthOutOfRange(spec.depth));
    }
    let leaves = 1u64 << spec.depth;
    let count = match spec.shape {
        Shape::Balanced => spec.solution_count,
        _ => 1,
    };
    if count == 0 || count > leaves {
        return Err(SyntheticError::BadSolutionCount { count, leaves });
    }
    Ok(SyntheticTree {
        spec,
        stride: leaves / count,
    })
}

impl SyntheticTree {
    pub fn spec(&self) -> SyntheticSpec {
        self.spec
    }

    /// Leaf indices (left to right) that are solutions.
    pub fn solution_leaves(&self) -> Vec<u64> {
        let last = (1u64 << self.spec.depth) - 1;
        match self.spec.shape {
            Shape::BestCase => vec![last],
            Shape::WorstCase => vec![0],
            Shape::Balanced => (0..self.spec.solution_count).map(|i| i * self.stride).collect(),
        }
    }

    pub fn leaf_path(&self, index: u64) -> PathId {
        let d = self.spec.depth;
        PathId::from_sides(
            (0..d)
                .map(|i| if index >> (d - 1 - i) & 1 == 1 { Side::Right } else { Side::Left })
                .collect(),
        )
    }

    fn leaf_index(path: &PathId) -> u64 {
        path.sides().iter().fold(0, |acc, s| acc << 1 | s.bit() as u64)
    }

    fn burn(&self) {
        let mut x = 0u64;
        for i in 0..self.spec.work_per_node {
            x = std::hint::black_box(x.wrapping_mul(31).wrapping_add(i as u64));
        }
        std::hint::black_box(x);
    }
}

impl SearchProblem for SyntheticTree {
    type State = PathId;
    type Decision = ();

    fn root(&self) -> Option<PathId> {
        self.burn();
        Some(PathId::root())
    }

    fn branch(&self, state: &PathId) -> Branching<()> {
        if state.len() == self.spec.depth {
            Branching::Leaf
        } else {
            Branching::Decision(())
        }
    }

    fn apply(&self, state: &mut PathId, _: &(), side: Side) -> bool {
        self.burn();
        state.push(side);
        true
    }

    fn undo(&self, state: &mut PathId) {
        state.pop();
    }

    fn is_solution(&self, state: &PathId) -> bool {
        if state.len() != self.spec.depth {
            return false;
        }
        let idx = Self::leaf_index(state);
        match self.spec.shape {
            Shape::BestCase => idx == (1u64 << self.spec.depth) - 1,
            Shape::WorstCase => idx == 0,
            Shape::Balanced => idx % self.stride == 0 && idx / self.stride < self.spec.solution_count,
        }
    }

    fn objective(&self, _: &PathId) -> Option<i64> {
        None
    }

    fn objective_bound(&self, _: &PathId) -> Option<i64> {
        None
    }

    fn sense(&self) -> Sense {
        Sense::Satisfy
    }

    fn assignment(&self, state: &PathId) -> Assignment {
        Assignment::new(state.sides().iter().map(|s| s.bit() as i64).collect())
    }

    fn max_depth(&self) -> usize {
        self.spec.depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{solve_seq_problem, Mode};

    fn p(bits: &[u8]) -> PathId {
        PathId::from_bits(bits).unwrap()
    }

    #[test]
    fn best_and_worst_depth_three() {
        let best = gen_synthetic(SyntheticSpec::new(Shape::BestCase, 3)).unwrap();
        let (sols, stats) = solve_seq_problem(&best, Mode::All);
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].path, p(&[1, 1, 1]));
        assert_eq!(stats.nodes_expanded, 15);

        let worst = gen_synthetic(SyntheticSpec::new(Shape::WorstCase, 3)).unwrap();
        let (sols, _) = solve_seq_problem(&worst, Mode::First);
        assert_eq!(sols[0].path, p(&[0, 0, 0]));
    }

    #[test]
    fn balanced_depth_three_two_solutions() {
        let t = gen_synthetic(SyntheticSpec::balanced(3, 2)).unwrap();
        let (sols, _) = solve_seq_problem(&t, Mode::All);
        let paths: Vec<_> = sols.iter().map(|s| s.path.clone()).collect();
        assert_eq!(paths, vec![p(&[0, 0, 0]), p(&[1, 0, 0])]);
        assert_eq!(t.solution_leaves(), vec![0, 4]);
        assert_eq!(t.leaf_path(4), p(&[1, 0, 0]));
    }

    #[test]
    fn out_of_range() {
        assert_eq!(
            gen_synthetic(SyntheticSpec::new(Shape::BestCase, 31)).unwrap_err(),
            SyntheticError::DepthOutOfRange(31)
        );
        assert!(gen_synthetic(SyntheticSpec::new(Shape::BestCase, 0)).is_err());
        assert!(gen_synthetic(SyntheticSpec::balanced(2, 5)).is_err());
    }
}
