//! Predicate handles over bundles.
//!
//! Bonus valuations are parameterized by two boolean predicates; the
//! interesting instantiations probe a mechanism (see the menus module),
//! so the interface is an abstract callable with a serializable
//! description tag.

use super::ValError;
use crate::bundle::Bundle;
use serde_json::json;

pub trait BundlePredicate: Send + Sync {
    fn eval(&self, s: Bundle) -> Result<bool, ValError>;

    /// Serializable description of this predicate.
    fn describe(&self) -> serde_json::Value;

    /// Exhaustive monotonicity check over `{0,..,m-1}`. Callers cap `m`.
    fn is_monotone(&self, m: usize) -> Result<bool, ValError> {
        let mut table = vec![false; 1 << m];
        for s in Bundle::all_subsets(m) {
            table[s.0 as usize] = self.eval(s)?;
        }
        for s in Bundle::all_subsets(m) {
            if !table[s.0 as usize] {
                continue;
            }
            for j in 0..m {
                if !s.contains(j) && !table[(s.0 | (1 << j)) as usize] {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Constant predicate.
#[derive(Debug, Clone, Copy)]
pub struct ConstPredicate(pub bool);

impl BundlePredicate for ConstPredicate {
    fn eval(&self, _: Bundle) -> Result<bool, ValError> {
        Ok(self.0)
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "predicate": "const", "value": self.0 })
    }
}

/// Explicit truth table over all subsets of a small ground set; entry
/// index is the bundle mask.
#[derive(Debug, Clone)]
pub struct TruthTablePredicate {
    m: usize,
    table: Vec<bool>,
}

impl TruthTablePredicate {
    pub fn new(m: usize, table: Vec<bool>) -> Result<Self, ValError> {
        if m > 20 {
            return Err(ValError::BadParams(format!(
                "truth table over m={m} items would need 2^{m} entries"
            )));
        }
        if table.len() != 1 << m {
            return Err(ValError::BadParams(format!(
                "truth table needs {} entries for m={m}, got {}",
                1usize << m,
                table.len()
            )));
        }
        Ok(TruthTablePredicate { m, table })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }
}

impl BundlePredicate for TruthTablePredicate {
    fn eval(&self, s: Bundle) -> Result<bool, ValError> {
        super::check_ground(s, self.m)?;
        Ok(self.table[s.0 as usize])
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "predicate": "truth_table",
            "m": self.m,
            "table": self.table.iter().map(|&b| b as u8).collect::<Vec<u8>>(),
        })
    }
}

/// `|S| >= threshold`; monotone by construction.
#[derive(Debug, Clone, Copy)]
pub struct SizeAtLeastPredicate(pub usize);

impl BundlePredicate for SizeAtLeastPredicate {
    fn eval(&self, s: Bundle) -> Result<bool, ValError> {
        Ok(s.len() >= self.0)
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "predicate": "size_at_least", "threshold": self.0 })
    }
}
