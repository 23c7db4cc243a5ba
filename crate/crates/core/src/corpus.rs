//! Instances bundled with the crate.

use crate::model::Model;
use crate::parser::{parse, ModelSource, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub name: &'static str,
    pub text: &'static str,
}

impl Instance {
    pub fn source(&self) -> ModelSource {
        ModelSource {
            text: self.text.to_string(),
            origin: format!("{}.dfzn", self.name),
        }
    }

    pub fn model(&self) -> Result<Model, ParseError> {
        parse(&self.source())
    }
}

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        &[$(Instance { name: $name, text: include_str!(concat!("../instances/", $name, ".dfzn")) }),*]
    };
}

/// Satisfaction instances.
pub const CSP: &[Instance] = bundle!(
    "queens4",
    "queens6",
    "queens8",
    "magic5",
    "magic7",
    "schedule",
    "queens3_unsat",
);

/// Optimization instances.
pub const COP: &[Instance] = bundle!("sum_min", "knapsack5", "assign3", "coins", "knapsack12", "knapsack20");

pub fn all() -> impl Iterator<Item = &'static Instance> {
    CSP.iter().chain(COP)
}

pub fn find(name: &str) -> Option<&'static Instance> {
    let name = name.strip_suffix(".dfzn").unwrap_or(name);
    all().find(|i| i.name == name)
}
