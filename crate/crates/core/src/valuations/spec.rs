//! Versioned JSON interchange for valuations.
//!
//! Every constructible family round-trips through [`ValuationSpec`].
//! Probe-backed predicates (built around a live mechanism) serialize
//! descriptively via `ValuationFn::describe` but cannot be rebuilt from
//! JSON alone; `build` reports that explicitly.

use super::families::*;
use super::multiunit::MultiUnitValuation;
use super::predicate::*;
use super::{ValError, ValuationFn, ValuationHandle};
use crate::bundle::Bundle;
use crate::rational::{rat_from_str, rat_to_string};
use crate::satkit::Formula;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

pub const VALUATION_FORMAT_VERSION: u32 = 1;

fn default_version() -> u32 {
    VALUATION_FORMAT_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "predicate", rename_all = "snake_case")]
pub enum PredicateSpec {
    Const { value: bool },
    TruthTable { m: usize, table: Vec<u8> },
    SizeAtLeast { threshold: usize },
}

impl PredicateSpec {
    pub fn build(&self) -> Result<Arc<dyn BundlePredicate>, ValError> {
        Ok(match self {
            PredicateSpec::Const { value } => Arc::new(ConstPredicate(*value)),
            PredicateSpec::TruthTable { m, table } => Arc::new(TruthTablePredicate::new(
                *m,
                table.iter().map(|&b| b != 0).collect(),
            )?),
            PredicateSpec::SizeAtLeast { threshold } => Arc::new(SizeAtLeastPredicate(*threshold)),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ValuationFamily {
    Additive {
        per_item: Vec<String>,
    },
    PolarAdditive {
        m: usize,
        high_set: Vec<usize>,
        omega: String,
    },
    Bonus {
        m: usize,
        t: String,
        k: usize,
        p: PredicateSpec,
        b: PredicateSpec,
    },
    DoublePeak {
        m: usize,
        a: Vec<usize>,
        b: Vec<usize>,
        alpha: String,
        beta: String,
    },
    SymmetricDoublePeak {
        m: usize,
        c: Vec<usize>,
        alpha: String,
    },
    Coverage {
        universe_size: usize,
        item_sets: Vec<Vec<usize>>,
        scale: String,
    },
    MultiUnitSingleMinded {
        r: u64,
        m: u64,
    },
    MultiUnitSatBonus {
        num_vars: usize,
        clauses: Vec<Vec<i64>>,
        m: u64,
    },
    MultiUnitLinear {
        slope: String,
        m: u64,
    },
}

/// A versioned, self-describing valuation document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ValuationSpec {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(flatten)]
    pub family: ValuationFamily,
}

impl ValuationSpec {
    pub fn new(family: ValuationFamily) -> Self {
        ValuationSpec { version: VALUATION_FORMAT_VERSION, family }
    }

    /// Builds the set-function families. Multi-unit families are
    /// count-based, not bundle-based; build them with
    /// [`ValuationSpec::build_multiunit`].
    pub fn build(&self) -> Result<ValuationHandle, ValError> {
        if self.version != VALUATION_FORMAT_VERSION {
            return Err(ValError::BadParams(format!(
                "unsupported valuation format version {} (expected {VALUATION_FORMAT_VERSION})",
                self.version
            )));
        }
        Ok(match &self.family {
            ValuationFamily::Additive { per_item } => {
                let values = per_item
                    .iter()
                    .map(|s| rat_from_str(s).map_err(|e| ValError::BadParams(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                Arc::new(AdditiveValuation::new(values)?)
            }
            ValuationFamily::PolarAdditive { m, high_set, omega } => {
                let omega = rat_from_str(omega).map_err(|e| ValError::BadParams(e.to_string()))?;
                let high: BTreeSet<usize> = high_set.iter().copied().collect();
                Arc::new(PolarAdditiveValuation::new(*m, high, omega)?)
            }
            ValuationFamily::Bonus { m, t, k, p, b } => {
                let t = rat_from_str(t).map_err(|e| ValError::BadParams(e.to_string()))?;
                Arc::new(BonusValuation::new(*m, t, *k, p.build()?, b.build()?)?)
            }
            ValuationFamily::DoublePeak { m, a, b, alpha, beta } => {
                let alpha = rat_from_str(alpha).map_err(|e| ValError::BadParams(e.to_string()))?;
                let beta = rat_from_str(beta).map_err(|e| ValError::BadParams(e.to_string()))?;
                Arc::new(DoublePeakValuation::new(
                    *m,
                    Bundle::from_indices(a.iter().copied()),
                    Bundle::from_indices(b.iter().copied()),
                    alpha,
                    beta,
                )?)
            }
            ValuationFamily::SymmetricDoublePeak { m, c, alpha } => {
                let alpha = rat_from_str(alpha).map_err(|e| ValError::BadParams(e.to_string()))?;
                Arc::new(SymmetricDoublePeak::new(
                    *m,
                    Bundle::from_indices(c.iter().copied()),
                    alpha,
                )?)
            }
            ValuationFamily::Coverage { universe_size, item_sets, scale } => {
                let scale = rat_from_str(scale).map_err(|e| ValError::BadParams(e.to_string()))?;
                let sets: Vec<BTreeSet<usize>> =
                    item_sets.iter().map(|s| s.iter().copied().collect()).collect();
                Arc::new(CoverageValuation::new(*universe_size, sets, scale)?)
            }
            ValuationFamily::MultiUnitSingleMinded { .. }
            | ValuationFamily::MultiUnitSatBonus { .. }
            | ValuationFamily::MultiUnitLinear { .. } => {
                return Err(ValError::NotConstructible(
                    "multi-unit valuations are count-based; use build_multiunit".into(),
                ))
            }
        })
    }

    pub fn build_multiunit(&self) -> Result<MultiUnitValuation, ValError> {
        match &self.family {
            ValuationFamily::MultiUnitSingleMinded { r, m } => {
                MultiUnitValuation::single_minded(*r, *m)
            }
            ValuationFamily::MultiUnitSatBonus { num_vars, clauses, m } => {
                let formula = Formula::new(*num_vars, clauses.clone())?;
                MultiUnitValuation::sat_bonus(formula, *m)
            }
            ValuationFamily::MultiUnitLinear { slope, m } => {
                let slope = rat_from_str(slope).map_err(|e| ValError::BadParams(e.to_string()))?;
                MultiUnitValuation::linear(slope, *m)
            }
            _ => Err(ValError::NotConstructible("not a multi-unit family".into())),
        }
    }

    pub fn additive(values: &[crate::rational::Rat]) -> Self {
        ValuationSpec::new(ValuationFamily::Additive {
            per_item: values.iter().map(rat_to_string).collect(),
        })
    }

    pub fn polar(v: &PolarAdditiveValuation) -> Self {
        ValuationSpec::new(ValuationFamily::PolarAdditive {
            m: v.m(),
            high_set: v.high_set().iter().copied().collect(),
            omega: rat_to_string(v.omega()),
        })
    }
}
