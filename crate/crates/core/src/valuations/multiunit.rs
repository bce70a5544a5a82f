//! Multi-unit valuations: `m` identical items, values over counts.

use super::ValError;
use crate::rational::{rat_to_string, Rat};
use crate::satkit::{eval_formula, Assignment, Formula};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultiUnitKind {
    /// Value 1 for `s >= r`, else 0. `r >= 1` so that `v(0) = 0`.
    SingleMinded { r: u64 },
    /// `v(s) = 2s + [phi(bits(s))]` where `s < m = 2^l` is read as an
    /// l-bit assignment (big-endian: variable 1 is the most significant
    /// bit). The all-items count `s = m` has no l-bit reading; it gets
    /// no bonus, which keeps the valuation monotone.
    SatBonus { formula: Formula },
    /// `v(s) = slope * s`.
    Linear { slope: Rat },
}

/// A valuation over item counts `s in {0, .., m}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiUnitValuation {
    kind: MultiUnitKind,
    m: u64,
    /// True when the kind is SatBonus and `phi(0..0)` holds, making
    /// `v(0) = 1` rather than 0. Flagged at construction; evaluation
    /// follows the formula as written.
    zero_anomaly: bool,
}

impl MultiUnitValuation {
    pub fn single_minded(r: u64, m: u64) -> Result<Self, ValError> {
        if r == 0 {
            return Err(ValError::BadParams("single-minded threshold must be >= 1".into()));
        }
        if r > m {
            return Err(ValError::BadParams(format!("threshold r={r} exceeds supply m={m}")));
        }
        Ok(MultiUnitValuation { kind: MultiUnitKind::SingleMinded { r }, m, zero_anomaly: false })
    }

    pub fn sat_bonus(formula: Formula, m: u64) -> Result<Self, ValError> {
        if !m.is_power_of_two() {
            return Err(ValError::BadParams(format!("supply m={m} must be a power of two")));
        }
        let ell = m.trailing_zeros() as usize;
        if formula.num_vars() != ell {
            return Err(ValError::BadParams(format!(
                "formula has {} variables, supply m={m} requires log2(m)={ell}",
                formula.num_vars()
            )));
        }
        let zero_anomaly = eval_formula(&formula, &Assignment(vec![false; ell]))?;
        Ok(MultiUnitValuation { kind: MultiUnitKind::SatBonus { formula }, m, zero_anomaly })
    }

    pub fn linear(slope: Rat, m: u64) -> Result<Self, ValError> {
        if slope.is_negative() {
            return Err(ValError::BadParams("slope must be nonnegative".into()));
        }
        Ok(MultiUnitValuation { kind: MultiUnitKind::Linear { slope }, m, zero_anomaly: false })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn kind(&self) -> &MultiUnitKind {
        &self.kind
    }

    /// True when this is a SatBonus whose formula is satisfied by the
    /// all-false assignment, so `v(0) = 1` instead of 0.
    pub fn zero_anomaly(&self) -> bool {
        self.zero_anomaly
    }

    pub fn value(&self, s: u64) -> Result<Rat, ValError> {
        if s > self.m {
            return Err(ValError::CountOutOfRange { s, m: self.m });
        }
        match &self.kind {
            MultiUnitKind::SingleMinded { r } => {
                Ok(if s >= *r { Rat::from_integer(BigInt::from(1)) } else { Rat::zero() })
            }
            MultiUnitKind::SatBonus { formula } => {
                let base = Rat::from_integer(BigInt::from(2 * s));
                let bonus = if s < self.m {
                    let bits = Assignment::from_count(s, formula.num_vars());
                    eval_formula(formula, &bits)?
                } else {
                    false
                };
                Ok(base + Rat::from_integer(BigInt::from(bonus as u64)))
            }
            MultiUnitKind::Linear { slope } => Ok(slope * Rat::from_integer(BigInt::from(s))),
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match &self.kind {
            MultiUnitKind::SingleMinded { r } => {
                json!({ "family": "multi_unit", "kind": "single_minded", "r": r, "m": self.m })
            }
            MultiUnitKind::SatBonus { formula } => json!({
                "family": "multi_unit",
                "kind": "sat_bonus",
                "num_vars": formula.num_vars(),
                "clauses": formula.clauses(),
                "m": self.m,
                "zero_anomaly": self.zero_anomaly,
            }),
            MultiUnitKind::Linear { slope } => json!({
                "family": "multi_unit",
                "kind": "linear",
                "slope": rat_to_string(slope),
                "m": self.m,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rint};

    #[test]
    fn single_minded_threshold() {
        let v = MultiUnitValuation::single_minded(3, 8).unwrap();
        assert_eq!(v.value(2).unwrap(), Rat::zero());
        assert_eq!(v.value(3).unwrap(), rint(1));
        assert_eq!(v.value(8).unwrap(), rint(1));
        assert_eq!(v.value(0).unwrap(), Rat::zero());
    }

    #[test]
    fn single_minded_rejects_zero_threshold() {
        assert!(MultiUnitValuation::single_minded(0, 8).is_err());
    }

    #[test]
    fn sat_bonus_at_satisfying_count() {
        // Unique satisfying assignment (1,0,1), i.e. s = 5, over m = 8.
        let phi = Formula::pinned(&[true, false, true]).unwrap();
        let v = MultiUnitValuation::sat_bonus(phi, 8).unwrap();
        assert_eq!(v.value(5).unwrap(), rint(11));
        assert_eq!(v.value(6).unwrap(), rint(12));
        assert_eq!(v.value(0).unwrap(), Rat::zero());
        assert!(!v.zero_anomaly());
    }

    #[test]
    fn sat_bonus_full_supply_has_no_bonus() {
        let phi = Formula::pinned(&[true, false, true]).unwrap();
        let v = MultiUnitValuation::sat_bonus(phi, 8).unwrap();
        assert_eq!(v.value(8).unwrap(), rint(16));
    }

    #[test]
    fn sat_bonus_zero_anomaly_flagged() {
        let phi = Formula::pinned(&[false, false]).unwrap();
        let v = MultiUnitValuation::sat_bonus(phi, 4).unwrap();
        assert!(v.zero_anomaly());
        assert_eq!(v.value(0).unwrap(), rint(1));
    }

    #[test]
    fn sat_bonus_requires_matching_sizes() {
        let phi = Formula::pinned(&[true, false]).unwrap();
        assert!(MultiUnitValuation::sat_bonus(phi.clone(), 6).is_err());
        assert!(MultiUnitValuation::sat_bonus(phi, 8).is_err());
    }

    #[test]
    fn linear_slope() {
        let v = MultiUnitValuation::linear(rat(2, 1), 8).unwrap();
        assert_eq!(v.value(3).unwrap(), rint(6));
        assert!(v.value(9).is_err());
    }

    #[test]
    fn monotone_over_counts() {
        let phi = Formula::pinned(&[true, false, true]).unwrap();
        let vals = [
            MultiUnitValuation::single_minded(3, 8).unwrap(),
            MultiUnitValuation::sat_bonus(phi, 8).unwrap(),
            MultiUnitValuation::linear(rat(1, 3), 8).unwrap(),
        ];
        for v in &vals {
            for s in 0..8 {
                assert!(v.value(s).unwrap() <= v.value(s + 1).unwrap());
            }
        }
    }
}
