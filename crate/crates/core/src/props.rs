//! Structural property suite: exhaustive monotonicity and
//! submodularity sweeps over every calibrated valuation family.
//!
//! Each case builds one valuation, runs both exhaustive checks, and is
//! recorded with its parameters; the suite passes only with zero
//! violations. All arithmetic is exact.

use crate::bundle::Bundle;
use crate::codes::CodeSpec;
use crate::rational::{rat, Rat};
use crate::reductions::tie::EncodedDoublePeak;
use crate::reductions::{derive_seed, ReductionError};
use crate::satkit::Formula;
use crate::valuations::{
    BonusValuation, BundlePredicate, CoverageValuation, DoublePeakValuation,
    SymmetricDoublePeak, TruthTablePredicate, ValuationFn, ValueTable,
};
use num_traits::One;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

/// The calibration grid for the two-peak profiles.
pub fn alpha_grid() -> Vec<Rat> {
    vec![rat(1, 4), rat(1, 2), Rat::one()]
}

pub fn beta_grid() -> Vec<Rat> {
    vec![rat(1, 20), rat(1, 10), rat(1, 4)]
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteCase {
    pub family: String,
    pub params: serde_json::Value,
    pub monotone: bool,
    pub submodular: bool,
}

impl SuiteCase {
    pub fn passes(&self) -> bool {
        self.monotone && self.submodular
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub cases: usize,
    pub violations: Vec<SuiteCase>,
    pub elapsed_ms: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    /// Seeded bonus-valuation draws; each gets a fresh random monotone
    /// `P`, random `B`, and a coin flip between the two value scales.
    pub bonus_cases: usize,
    /// Ground-set ceiling for the bonus draws.
    pub bonus_m_max: usize,
    /// Seeded random coverage valuations.
    pub coverage_cases: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { bonus_cases: 200, bonus_m_max: 10, coverage_cases: 24, seed: 0 }
    }
}

/// A random monotone predicate: the upward closure of a few random
/// anchor bundles (constructively monotone; re-verified by the bonus
/// constructor).
fn random_monotone_table(rng: &mut ChaCha8Rng, m: usize) -> Vec<bool> {
    let anchors: Vec<u64> = (0..rng.gen_range(1..=3))
        .map(|_| rng.gen_range(0..(1u64 << m)))
        .collect();
    (0..(1u64 << m)).map(|mask| anchors.iter().any(|a| mask & a == *a)).collect()
}

fn check_case(
    family: &str,
    v: &dyn ValuationFn,
    m: usize,
) -> Result<SuiteCase, ReductionError> {
    let table = ValueTable::build(v, m)?;
    Ok(SuiteCase {
        family: family.to_string(),
        params: v.describe(),
        monotone: table.monotone(),
        submodular: table.submodular_marginals(),
    })
}

/// Runs the whole structural sweep:
/// - seeded bonus valuations (random monotone `P`, random `B`, both
///   value scales), exhaustively checked;
/// - double-peak valuations over the full `alpha x beta x size` grid
///   with disjoint equal peaks, both in canonical and in scrambled
///   position;
/// - symmetric profiles over the `alpha` grid and even carrier sizes;
/// - seeded coverage valuations;
/// - encoded double-peaks over the grid, repetition and random-linear
///   codes, satisfiable and contradictory formulas.
pub fn run_structural_suite(config: &SuiteConfig) -> Result<SuiteReport, ReductionError> {
    if config.bonus_m_max < 2 || config.bonus_m_max > 12 {
        return Err(ReductionError::BadConfig(
            "bonus ground sets must stay within [2, 12] for exhaustive checks".into(),
        ));
    }
    let started = Instant::now();
    let mut report = SuiteReport {
        cases: 0,
        violations: Vec::new(),
        elapsed_ms: 0,
        seed: config.seed,
    };
    fn push(case: SuiteCase, report: &mut SuiteReport) {
        report.cases += 1;
        if !case.passes() {
            report.violations.push(case);
        }
    }

    for i in 0..config.bonus_cases {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x424f4e, i as u64));
        let m = rng.gen_range(3..=config.bonus_m_max);
        let k = rng.gen_range(1..=m);
        let t = if rng.gen::<bool>() {
            BonusValuation::paper_t(m)
        } else {
            BonusValuation::scaled_t(m)
        };
        let p = Arc::new(TruthTablePredicate::new(m, random_monotone_table(&mut rng, m))?);
        let b_table: Vec<bool> = (0..(1u64 << m)).map(|_| rng.gen()).collect();
        let b = Arc::new(TruthTablePredicate::new(m, b_table)?);
        let v = BonusValuation::new(m, t, k, p as Arc<dyn BundlePredicate>, b)?;
        push(check_case("bonus", &v, m)?, &mut report);
    }

    for alpha in alpha_grid() {
        for beta in beta_grid() {
            for size in 2..=6usize {
                let m = 2 * size;
                let a = Bundle::full(size);
                let b = Bundle::full(m).difference(a);
                let v = DoublePeakValuation::new(m, a, b, alpha.clone(), beta.clone())?;
                push(check_case("double_peak", &v, m)?, &mut report);
                // Interleaved peaks: odd items against even items.
                let a = Bundle::from_indices((0..m).filter(|i| i % 2 == 0));
                let b = Bundle::full(m).difference(a);
                let v = DoublePeakValuation::new(m, a, b, alpha.clone(), beta.clone())?;
                push(check_case("double_peak", &v, m)?, &mut report);
            }
        }
    }

    for alpha in alpha_grid() {
        for size in [4usize, 6, 8, 10, 12] {
            let v = SymmetricDoublePeak::new(size, Bundle::full(size), alpha.clone())?;
            push(check_case("symmetric_double_peak", &v, size)?, &mut report);
        }
    }

    for i in 0..config.coverage_cases {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x434f56, i as u64));
        let universe = rng.gen_range(4..=12usize);
        let m = rng.gen_range(2..=8usize);
        let sets: Vec<BTreeSet<usize>> = (0..m)
            .map(|_| (0..universe).filter(|_| rng.gen::<bool>()).collect())
            .collect();
        let scale = if rng.gen::<bool>() { Rat::one() } else { rat(3, 2) };
        let v = CoverageValuation::new(universe, sets, scale)?;
        push(check_case("coverage", &v, m)?, &mut report);
    }

    let sat_formula = |m_msg: usize| {
        let bits: Vec<bool> = (0..m_msg).map(|i| i % 2 == 0).collect();
        Formula::pinned(&bits)
    };
    for alpha in alpha_grid() {
        for beta in beta_grid() {
            let codes = vec![
                CodeSpec::repetition(4, 1, beta.clone())?,
                CodeSpec::repetition(3, 2, beta.clone())?,
                CodeSpec::random_linear(3, 5, beta.clone(), 1009)?,
                CodeSpec::random_linear(4, 6, beta.clone(), 1013)?,
            ];
            for code in codes {
                let m = 2 * code.m_code();
                for phi in [sat_formula(code.m_msg())?, Formula::contradiction(code.m_msg())?]
                {
                    let v = EncodedDoublePeak::new(
                        m,
                        (0..m).collect(),
                        phi,
                        alpha.clone(),
                        beta.clone(),
                        code.clone(),
                        0,
                    )?;
                    push(check_case("encoded_double_peak", &v, m)?, &mut report);
                }
            }
        }
    }

    report.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_scale_suite_finds_no_violations() {
        let config = SuiteConfig { bonus_cases: 12, bonus_m_max: 6, coverage_cases: 6, seed: 3 };
        let report = run_structural_suite(&config).unwrap();
        assert!(report.violations.is_empty(), "violations: {:#?}", report.violations);
        // 12 bonus + 9 * 5 * 2 double-peak + 15 symmetric + 6 coverage
        // + 9 * 4 * 2 encoded.
        assert_eq!(report.cases, 12 + 90 + 15 + 6 + 72);
    }

    #[test]
    fn suite_is_deterministic_in_its_seed() {
        let config = SuiteConfig { bonus_cases: 5, bonus_m_max: 5, coverage_cases: 3, seed: 9 };
        let a = run_structural_suite(&config).unwrap();
        let b = run_structural_suite(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&a.violations).unwrap(),
            serde_json::to_string(&b.violations).unwrap()
        );
        assert_eq!(a.cases, b.cases);
    }

    #[test]
    fn random_monotone_tables_are_monotone() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = 5;
            let p = TruthTablePredicate::new(m, random_monotone_table(&mut rng, m)).unwrap();
            assert!(p.is_monotone(m).unwrap(), "seed {seed}");
        }
    }
}
