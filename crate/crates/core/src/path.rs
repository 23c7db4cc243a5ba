//! Node identifiers in a binary search tree.
//!
//! A [`PathId`] is the sequence of branch choices from the root. Its order is
//! depth-first preorder: at the first differing branch the left one comes
//! first, and a strict prefix comes before all of its extensions. Under this
//! order the first solution reached by a sequential left-first search is
//! exactly the minimum solution path, which is what makes parallel results
//! reproducible.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn bit(self) -> u8 {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Side> {
        match bit {
            0 => Some(Side::Left),
            1 => Some(Side::Right),
            _ => None,
        }
    }
}

/// Result of [`compare_paths`]: where `a` sits relative to `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOrder {
    Left,
    Equal,
    Right,
}

impl From<Ordering> for PathOrder {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Less => PathOrder::Left,
            Ordering::Equal => PathOrder::Equal,
            Ordering::Greater => PathOrder::Right,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathId(Vec<Side>);

impl PathId {
    pub fn root() -> Self {
        PathId(Vec::new())
    }

    pub fn from_sides(sides: Vec<Side>) -> Self {
        PathId(sides)
    }

    /// Builds a path from 0/1 branch indices; `None` on any other value.
    pub fn from_bits(bits: &[u8]) -> Option<Self> {
        bits.iter().map(|&b| Side::from_bit(b)).collect::<Option<Vec<_>>>().map(PathId)
    }

    pub fn sides(&self) -> &[Side] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, side: Side) {
        self.0.push(side);
    }

    pub fn pop(&mut self) -> Option<Side> {
        self.0.pop()
    }

    pub fn child(&self, side: Side) -> PathId {
        let mut p = self.clone();
        p.0.push(side);
        p
    }

    pub fn last(&self) -> Option<Side> {
        self.0.last().copied()
    }

    pub fn is_prefix_of(&self, other: &PathId) -> bool {
        other.0.starts_with(&self.0)
    }

    /// `0`/`1` string, empty for the root.
    pub fn to_bit_string(&self) -> String {
        self.0.iter().map(|s| if *s == Side::Left { '0' } else { '1' }).collect()
    }

    pub fn parse_bit_string(s: &str) -> Option<PathId> {
        s.chars()
            .map(|c| match c {
                '0' => Some(Side::Left),
                '1' => Some(Side::Right),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(PathId)
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", s.bit())?;
        }
        write!(f, "]")
    }
}

impl Ord for PathId {
    fn cmp(&self, other: &Self) -> Ordering {
        // Slice ordering is lexicographic with prefixes first, and Left < Right.
        self.0.as_slice().cmp(other.0.as_slice())
    }
}

impl PartialOrd for PathId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// DFS preorder comparison of two node paths.
pub fn compare_paths(a: &PathId, b: &PathId) -> PathOrder {
    a.cmp(b).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(bits: &[u8]) -> PathId {
        PathId::from_bits(bits).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(compare_paths(&p(&[0, 1]), &p(&[1, 0])), PathOrder::Left);
        assert_eq!(compare_paths(&p(&[0, 1, 1]), &p(&[0, 1, 1])), PathOrder::Equal);
        assert_eq!(compare_paths(&p(&[0]), &p(&[0, 1])), PathOrder::Left);
        assert_eq!(compare_paths(&p(&[1]), &p(&[0, 1, 1])), PathOrder::Right);
    }

    #[test]
    fn bit_strings() {
        assert_eq!(p(&[0, 1, 1]).to_bit_string(), "011");
        assert_eq!(PathId::parse_bit_string("011"), Some(p(&[0, 1, 1])));
        assert_eq!(PathId::parse_bit_string("012"), None);
        assert_eq!(PathId::root().to_bit_string(), "");
        assert_eq!(p(&[1, 0]).to_string(), "[1,0]");
        assert!(PathId::from_bits(&[2]).is_none());
    }

    #[test]
    fn prefix() {
        assert!(p(&[0, 1]).is_prefix_of(&p(&[0, 1, 0])));
        assert!(!p(&[0, 1]).is_prefix_of(&p(&[0, 0, 0])));
        assert!(PathId::root().is_prefix_of(&p(&[1])));
    }
}
