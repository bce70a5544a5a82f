//! Valuation families with exact-rational evaluation.
//!
//! Every family implements [`ValuationFn`]; evaluation never rounds.
//! The constructions downstream mix magnitudes like `t = 2^(2m)` with
//! gaps of `1/m^4` and `1/m^5`, so all comparisons must stay exact.

mod checks;
mod families;
mod multiunit;
mod predicate;
mod spec;

pub use checks::{
    check_monotone, check_submodular, check_submodular_marginals, ValueTable, CHECK_CAP,
};
pub use families::{
    psi_tilde, sample_random_polar, AdditiveValuation, BonusValuation, CoverageValuation,
    DoublePeakValuation, PolarAdditiveValuation, PolarVariant, ScaledValuation,
    SymmetricDoublePeak,
};
pub use multiunit::{MultiUnitKind, MultiUnitValuation};
pub use predicate::{
    BundlePredicate, ConstPredicate, SizeAtLeastPredicate, TruthTablePredicate,
};
pub use spec::{PredicateSpec, ValuationSpec, VALUATION_FORMAT_VERSION};

use crate::bundle::Bundle;
use crate::rational::Rat;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValError {
    #[error("bundle {bundle:?} contains items outside the ground set of size {m}")]
    ItemOutOfRange { bundle: Vec<usize>, m: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("ground set size {m} exceeds the exhaustive check cap of {cap}")]
    CheckCapExceeded { m: usize, cap: usize },
    #[error("predicate evaluation failed: {0}")]
    PredicateFailure(String),
    #[error("count {s} out of range [0, {m}]")]
    CountOutOfRange { s: u64, m: u64 },
    #[error("cannot build this valuation from its description alone: {0}")]
    NotConstructible(String),
    #[error(transparent)]
    Sat(#[from] crate::satkit::SatError),
}

/// A set-function valuation over a ground set `{0, .., m-1}`.
///
/// Implementations must be immutable after construction and re-entrant;
/// internal memo caches take locks.
pub trait ValuationFn: Send + Sync {
    /// Ground-set size.
    fn m(&self) -> usize;

    /// Exact value of the bundle. Must satisfy `value(EMPTY) = 0` and
    /// monotonicity for every family constructed with valid parameters.
    fn value(&self, s: Bundle) -> Result<Rat, ValError>;

    /// Serializable description of this valuation (family tag plus
    /// parameters; probe-backed predicates describe their probe).
    fn describe(&self) -> serde_json::Value;

    /// Per-item values when this valuation is exactly additive, enabling
    /// closed-form welfare computations. `None` for every family that is
    /// not additive.
    fn additive_item_values(&self) -> Option<Vec<Rat>> {
        None
    }
}

/// Checks `s` against the ground set, the shared precondition of every
/// evaluation.
pub(crate) fn check_ground(s: Bundle, m: usize) -> Result<(), ValError> {
    if !s.is_subset_of(Bundle::full(m)) {
        return Err(ValError::ItemOutOfRange { bundle: s.to_vec(), m });
    }
    Ok(())
}

/// Convenience alias used by instances and mechanisms.
pub type ValuationHandle = Arc<dyn ValuationFn>;
