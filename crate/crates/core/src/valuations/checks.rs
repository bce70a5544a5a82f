//! Exhaustive structural validators: monotonicity and submodularity.
//!
//! Both checks enumerate the full subset lattice against a memoized
//! value table, so they double as independent oracles for every family.
//! Exact arithmetic, no tolerance anywhere.

use super::{ValError, ValuationFn};
use crate::bundle::Bundle;
use crate::rational::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::One;

/// Exhaustive checks are refused above this ground-set size.
pub const CHECK_CAP: usize = 14;

fn value_table(v: &dyn ValuationFn, m: usize) -> Result<Vec<Rat>, ValError> {
    if m > CHECK_CAP {
        return Err(ValError::CheckCapExceeded { m, cap: CHECK_CAP });
    }
    let mut table = Vec::with_capacity(1 << m);
    for s in Bundle::all_subsets(m) {
        table.push(v.value(s)?);
    }
    Ok(table)
}

/// Every subset's value, rescaled to integer numerators over the
/// common denominator. One oracle call per subset; both structural
/// scans then run on integer arithmetic, which keeps the big suites
/// exact without per-comparison gcd work.
pub struct ValueTable {
    m: usize,
    nums: Vec<BigInt>,
}

impl ValueTable {
    pub fn build(v: &dyn ValuationFn, m: usize) -> Result<Self, ValError> {
        let table = value_table(v, m)?;
        let mut denom = BigInt::one();
        for r in &table {
            denom = denom.lcm(r.denom());
        }
        let nums = table.iter().map(|r| r.numer() * (&denom / r.denom())).collect();
        Ok(ValueTable { m, nums })
    }

    /// `v(S) <= v(S ∪ {j})` for every `S` and every `j` outside `S`.
    pub fn monotone(&self) -> bool {
        for s in 0..(1u64 << self.m) {
            for j in 0..self.m {
                if (s >> j) & 1 == 0 && self.nums[s as usize] > self.nums[(s | (1 << j)) as usize]
                {
                    return false;
                }
            }
        }
        true
    }

    /// Diminishing marginals: for every `S` and distinct `i, j`
    /// outside `S`, `v(S+i) - v(S) >= v(S+i+j) - v(S+j)`.
    pub fn submodular_marginals(&self) -> bool {
        for s in 0..(1u64 << self.m) {
            for i in 0..self.m {
                if (s >> i) & 1 == 1 {
                    continue;
                }
                for j in (i + 1)..self.m {
                    if (s >> j) & 1 == 1 {
                        continue;
                    }
                    let si = (s | (1 << i)) as usize;
                    let sj = (s | (1 << j)) as usize;
                    let sij = (s | (1 << i) | (1 << j)) as usize;
                    if &self.nums[si] + &self.nums[sj]
                        < &self.nums[s as usize] + &self.nums[sij]
                    {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// True iff `v(S) <= v(S ∪ {j})` for every subset `S` of `{0,..,m-1}`
/// and every item `j` outside `S`.
pub fn check_monotone(v: &dyn ValuationFn, m: usize) -> Result<bool, ValError> {
    Ok(ValueTable::build(v, m)?.monotone())
}

/// True iff `v(S) + v(T) >= v(S ∩ T) + v(S ∪ T)` for every pair of
/// subsets of `{0,..,m-1}`.
pub fn check_submodular(v: &dyn ValuationFn, m: usize) -> Result<bool, ValError> {
    Ok(find_submodularity_violation(v, m)?.is_none())
}

/// Submodularity via diminishing marginals: for every `S` and distinct
/// `i, j` outside `S`, `v(S+i) - v(S) >= v(S+i+j) - v(S+j)`.
///
/// Equivalent to [`check_submodular`] but `O(2^m m^2)` instead of
/// `O(4^m)`, so the large structural suites use this form. The
/// equivalence is pinned by a test comparing both on mixed fixtures.
pub fn check_submodular_marginals(v: &dyn ValuationFn, m: usize) -> Result<bool, ValError> {
    Ok(ValueTable::build(v, m)?.submodular_marginals())
}

/// First violating pair if one exists, for diagnostics in negative
/// controls.
pub fn find_submodularity_violation(
    v: &dyn ValuationFn,
    m: usize,
) -> Result<Option<(Bundle, Bundle)>, ValError> {
    let table = value_table(v, m)?;
    let n = 1u64 << m;
    for s in 0..n {
        for t in (s + 1)..n {
            // Nested pairs satisfy the inequality with equality.
            let meet = s & t;
            if meet == s || meet == t {
                continue;
            }
            let join = s | t;
            let lhs = &table[s as usize] + &table[t as usize];
            let rhs = &table[meet as usize] + &table[join as usize];
            if lhs < rhs {
                return Ok(Some((Bundle(s), Bundle(t))));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::super::families::*;
    use super::super::predicate::*;
    use super::*;
    use crate::rational::{rat, rint};
    use std::collections::BTreeSet;
    use std::sync::Arc;

    #[test]
    fn additive_is_modular() {
        let v = AdditiveValuation::new(vec![rat(3, 1), rat(4, 1), rat(1, 2)]).unwrap();
        assert!(check_monotone(&v, 3).unwrap());
        assert!(check_submodular(&v, 3).unwrap());
    }

    #[test]
    fn bonus_with_monotone_p_is_monotone_submodular() {
        for seed in 0..6u64 {
            // Monotone P: upset generated by a pseudo-random anchor set.
            let m = 5usize;
            let anchor = Bundle((seed * 7 + 3) % (1 << m));
            let table: Vec<bool> =
                (0..(1u64 << m)).map(|mask| anchor.is_subset_of(Bundle(mask))).collect();
            let p = Arc::new(TruthTablePredicate::new(m, table).unwrap());
            // Arbitrary B.
            let b_table: Vec<bool> = (0..(1u64 << m)).map(|mask| mask.count_ones() % 2 == 0).collect();
            let b = Arc::new(TruthTablePredicate::new(m, b_table).unwrap());
            let v = BonusValuation::new(m, BonusValuation::paper_t(m), 3, p, b).unwrap();
            assert!(check_monotone(&v, m).unwrap(), "seed {seed}");
            assert!(check_submodular(&v, m).unwrap(), "seed {seed}");
        }
    }

    #[test]
    fn non_monotone_p_breaks_structure() {
        // P true exactly on one size-2 set: not monotone. The bonus
        // formula then jumps back down on supersets.
        let m = 4usize;
        let special = 0b0011u64;
        let table: Vec<bool> = (0..(1u64 << m)).map(|mask| mask == special).collect();
        let p = Arc::new(TruthTablePredicate::new(m, table).unwrap());
        let v = BonusValuation::new_unchecked(
            m,
            BonusValuation::paper_t(m),
            2,
            p,
            Arc::new(ConstPredicate(true)),
        )
        .unwrap();
        assert!(!check_monotone(&v, m).unwrap());
        let violation = find_submodularity_violation(&v, m).unwrap();
        assert!(violation.is_some());
    }

    #[test]
    fn double_peak_structure_small_grid() {
        let v = DoublePeakValuation::new(
            4,
            Bundle::from_indices([0, 1]),
            Bundle::from_indices([2, 3]),
            rint(1),
            rat(1, 10),
        )
        .unwrap();
        assert!(check_monotone(&v, 4).unwrap());
        assert!(check_submodular(&v, 4).unwrap());
    }

    #[test]
    fn coverage_structure() {
        let sets: Vec<BTreeSet<usize>> =
            vec![[0, 1].into(), [1, 2].into(), [2, 3].into(), [0, 3].into()];
        let v = CoverageValuation::new(4, sets, rat(2, 3)).unwrap();
        assert!(check_monotone(&v, 4).unwrap());
        assert!(check_submodular(&v, 4).unwrap());
    }

    #[test]
    fn cap_is_enforced() {
        let v = AdditiveValuation::new(vec![rint(1); 15]).unwrap();
        assert!(matches!(
            check_monotone(&v, 15),
            Err(ValError::CheckCapExceeded { m: 15, cap: CHECK_CAP })
        ));
    }

    #[test]
    fn pairwise_and_marginal_submodularity_agree() {
        // Mixed fixtures: submodular families plus the non-monotone-P
        // negative control; both routes must give the same verdict.
        let m = 4usize;
        let good = DoublePeakValuation::new(
            m,
            Bundle::from_indices([0, 1]),
            Bundle::from_indices([2, 3]),
            rint(1),
            rat(1, 10),
        )
        .unwrap();
        assert!(check_submodular(&good, m).unwrap());
        assert!(check_submodular_marginals(&good, m).unwrap());

        let special = 0b0011u64;
        let table: Vec<bool> = (0..(1u64 << m)).map(|mask| mask == special).collect();
        let p = Arc::new(TruthTablePredicate::new(m, table).unwrap());
        let bad = BonusValuation::new_unchecked(
            m,
            BonusValuation::paper_t(m),
            2,
            p,
            Arc::new(ConstPredicate(true)),
        )
        .unwrap();
        assert_eq!(
            check_submodular(&bad, m).unwrap(),
            check_submodular_marginals(&bad, m).unwrap()
        );
        assert!(!check_submodular_marginals(&bad, m).unwrap());
    }
}
