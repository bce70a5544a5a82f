//! The mechanism abstraction and the exact reference implementations:
//! exhaustive VCG, the single-bidder fixed-size maximizer, the two-bidder
//! multi-unit allocator, a non-truthful greedy baseline, a dictator, and
//! a truthfulness auditor.
//!
//! `run(instance, seed)` is bit-identical across repeated invocations
//! with the same seed; the deterministic mechanisms ignore the seed.
//! Welfare search is exact over `BigRational`s, so tie detection is
//! never a tolerance question.

use crate::bundle::Bundle;
use crate::rational::{serde_rat_vec, Rat};
use crate::valuations::{MultiUnitValuation, ValError, ValuationFn, ValuationHandle};
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MechError {
    #[error("instance exceeds the exhaustive cap: {0}")]
    CapExceeded(String),
    #[error("bidder {bidder} has ground-set size {got}, instance expects {expected}")]
    GroundSetMismatch { bidder: usize, got: usize, expected: usize },
    #[error("invalid instance: {0}")]
    BadInstance(String),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("{0} does not support {1}")]
    Unsupported(&'static str, &'static str),
    #[error(transparent)]
    Valuation(#[from] ValError),
}

/// One m-item market: a shared ground set and one valuation per bidder.
#[derive(Clone)]
pub struct Instance {
    m: usize,
    valuations: Vec<ValuationHandle>,
}

impl Instance {
    pub fn new(m: usize, valuations: Vec<ValuationHandle>) -> Result<Self, MechError> {
        if valuations.is_empty() {
            return Err(MechError::BadInstance("at least one bidder required".into()));
        }
        for (i, v) in valuations.iter().enumerate() {
            if v.m() != m {
                return Err(MechError::GroundSetMismatch { bidder: i, got: v.m(), expected: m });
            }
        }
        Ok(Instance { m, valuations })
    }

    /// Builds an instance by inserting `special`'s valuation among the
    /// other bidders' valuations at position `special`.
    pub fn with_special(
        m: usize,
        others: &[ValuationHandle],
        special: usize,
        v: ValuationHandle,
    ) -> Result<Self, MechError> {
        if special > others.len() {
            return Err(MechError::BadInstance(format!(
                "special index {special} exceeds bidder count {}",
                others.len() + 1
            )));
        }
        let mut valuations = others.to_vec();
        valuations.insert(special, v);
        Instance::new(m, valuations)
    }

    /// The same instance with bidder `i`'s valuation replaced, for
    /// misreport experiments.
    pub fn with_replaced(&self, i: usize, v: ValuationHandle) -> Result<Self, MechError> {
        let mut valuations = self.valuations.clone();
        valuations[i] = v;
        Instance::new(self.m, valuations)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    pub fn valuation(&self, i: usize) -> &ValuationHandle {
        &self.valuations[i]
    }

    pub fn valuations(&self) -> &[ValuationHandle] {
        &self.valuations
    }

    /// All other bidders' valuations, in order, with bidder `i` removed.
    pub fn others(&self, i: usize) -> Vec<ValuationHandle> {
        let mut out = self.valuations.clone();
        out.remove(i);
        out
    }
}

/// Disjoint bundles plus nonnegative payments, one per bidder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub allocation: Vec<Bundle>,
    #[serde(with = "serde_rat_vec")]
    pub payments: Vec<Rat>,
}

impl Outcome {
    /// Checks the structural invariants: pairwise-disjoint bundles
    /// within the ground set, and payments that are nonnegative, one
    /// per bidder.
    pub fn validate(&self, inst: &Instance) -> Result<(), MechError> {
        if self.allocation.len() != inst.n() || self.payments.len() != inst.n() {
            return Err(MechError::BadInstance("outcome arity mismatch".into()));
        }
        let full = Bundle::full(inst.m());
        let mut seen = Bundle::EMPTY;
        for s in &self.allocation {
            if !s.is_subset_of(full) {
                return Err(MechError::BadInstance("allocated items outside ground set".into()));
            }
            if !seen.intersection(*s).is_empty() {
                return Err(MechError::BadInstance("allocation not disjoint".into()));
            }
            seen = seen.union(*s);
        }
        if self.payments.iter().any(|p| p < &Rat::zero()) {
            return Err(MechError::BadInstance("negative payment".into()));
        }
        Ok(())
    }

    pub fn welfare(&self, inst: &Instance) -> Result<Rat, ValError> {
        let mut total = Rat::zero();
        for (i, s) in self.allocation.iter().enumerate() {
            total += inst.valuation(i).value(*s)?;
        }
        Ok(total)
    }

    pub fn utility(&self, inst: &Instance, i: usize) -> Result<Rat, ValError> {
        Ok(inst.valuation(i).value(self.allocation[i])? - &self.payments[i])
    }
}

/// A finite-support distribution over outcomes with exact positive
/// probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeDistribution {
    support: Vec<(Outcome, Rat)>,
}

impl OutcomeDistribution {
    pub fn new(support: Vec<(Outcome, Rat)>) -> Result<Self, MechError> {
        if support.is_empty() {
            return Err(MechError::BadInput("empty distribution support".into()));
        }
        let mut total = Rat::zero();
        for (_, p) in &support {
            if p <= &Rat::zero() {
                return Err(MechError::BadInput("non-positive probability".into()));
            }
            total += p;
        }
        if total != Rat::from_integer(1.into()) {
            return Err(MechError::BadInput(format!("probabilities sum to {total}, not 1")));
        }
        Ok(OutcomeDistribution { support })
    }

    pub fn point(outcome: Outcome) -> Self {
        OutcomeDistribution { support: vec![(outcome, Rat::from_integer(1.into()))] }
    }

    pub fn support(&self) -> &[(Outcome, Rat)] {
        &self.support
    }

    /// Expected utility of bidder `i`, with `true_v` as the payoff
    /// valuation (which may differ from the reported one).
    pub fn expected_utility(&self, true_v: &dyn ValuationFn, i: usize) -> Result<Rat, ValError> {
        let mut total = Rat::zero();
        for (o, p) in &self.support {
            let u = true_v.value(o.allocation[i])? - &o.payments[i];
            total += u * p;
        }
        Ok(total)
    }
}

/// Closed-form menu availability of a mechanism, consumed by the menus
/// module. Black boxes report `None` and are handled by probing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MenuSupport {
    Vcg,
    DictatorTo(usize),
    None,
}

/// A black-box auction. Implementations must be re-entrant: concurrent
/// `run` calls with distinct seeds must not interfere.
pub trait Mechanism: Send + Sync {
    fn name(&self) -> &'static str;

    /// Deterministic in `(instance, seed)`.
    fn run(&self, inst: &Instance, seed: u64) -> Result<Outcome, MechError>;

    /// Exact law of `run` for reference mechanisms. Mechanisms without
    /// a closed form report `Unsupported`; callers fall back to seeded
    /// Monte Carlo.
    fn full_distribution(&self, inst: &Instance) -> Result<OutcomeDistribution, MechError> {
        let _ = inst;
        Err(MechError::Unsupported(self.name(), "full_distribution"))
    }

    /// Closed-form menu classification (reference mechanisms only).
    fn menu_support(&self) -> MenuSupport {
        MenuSupport::None
    }
}

pub type MechanismHandle = Arc<dyn Mechanism>;

// === Exhaustive welfare search ===

/// Per-bidder value tables over every subset mask of `{0,..,m-1}`.
fn value_tables(inst: &Instance) -> Result<Vec<Vec<Rat>>, MechError> {
    let mut tables = Vec::with_capacity(inst.n());
    for v in inst.valuations() {
        let mut t = Vec::with_capacity(1 << inst.m());
        for s in Bundle::all_subsets(inst.m()) {
            t.push(v.value(s)?);
        }
        tables.push(t);
    }
    Ok(tables)
}

/// Suffix welfare tables: `level[i][x]` is the optimal welfare from
/// allocating (a subset of) item mask `x` among bidders `i..n`.
/// `level[n]` is identically zero, absorbing leftovers.
fn suffix_welfare(tables: &[Vec<Rat>], m: usize) -> Vec<Vec<Rat>> {
    let full = 1usize << m;
    let n = tables.len();
    let mut levels = vec![vec![Rat::zero(); full]; n + 1];
    for i in (0..n).rev() {
        for x in 0..full as u64 {
            let mut best = Rat::zero();
            let mut first = true;
            for sub in Bundle(x).submasks() {
                let cand = &tables[i][sub.0 as usize]
                    + &levels[i + 1][(x & !sub.0) as usize];
                if first || cand > best {
                    best = cand;
                    first = false;
                }
            }
            levels[i][x as usize] = best;
        }
    }
    levels
}

/// Optimal welfare restricted to the items of `mask`, over all listed
/// bidders. An empty bidder list yields zero everywhere.
pub fn optimal_welfare_on(
    valuations: &[ValuationHandle],
    m: usize,
    mask: Bundle,
) -> Result<Rat, MechError> {
    Ok(optimal_welfare_table(valuations, m)?[mask.0 as usize].clone())
}

/// Optimal welfare for every item mask at once (entry `x` is the best
/// welfare achievable allocating items of `x` among all the listed
/// bidders). One dynamic program serves all `2^m` queries.
pub fn optimal_welfare_table(
    valuations: &[ValuationHandle],
    m: usize,
) -> Result<Vec<Rat>, MechError> {
    if m > VcgMechanism::DEFAULT_M_CAP {
        return Err(MechError::CapExceeded(format!(
            "m = {m} exceeds the welfare-table cap {}",
            VcgMechanism::DEFAULT_M_CAP
        )));
    }
    if valuations.is_empty() {
        return Ok(vec![Rat::zero(); 1 << m]);
    }
    let inst = Instance::new(m, valuations.to_vec())?;
    let tables = value_tables(&inst)?;
    let mut levels = suffix_welfare(&tables, m);
    Ok(levels.swap_remove(0))
}

/// Exhaustive VCG: welfare-maximizing allocation with Clarke payments.
///
/// Ties between welfare-equal allocations are broken deterministically:
/// allocations are encoded as the tuple `(S_0, .., S_{n-1})` of bundle
/// masks and the lexicographically smallest encoding wins. In
/// consequence, ties push items toward higher-indexed bidders, and an
/// item nobody values stays unallocated.
#[derive(Debug, Clone)]
pub struct VcgMechanism {
    pub m_cap: usize,
    pub n_cap: usize,
}

impl Default for VcgMechanism {
    fn default() -> Self {
        VcgMechanism { m_cap: Self::DEFAULT_M_CAP, n_cap: Self::DEFAULT_N_CAP }
    }
}

impl VcgMechanism {
    pub const DEFAULT_M_CAP: usize = 12;
    pub const DEFAULT_N_CAP: usize = 4;

    fn check_caps(&self, inst: &Instance) -> Result<(), MechError> {
        if inst.m() > self.m_cap || inst.n() > self.n_cap {
            return Err(MechError::CapExceeded(format!(
                "m = {}, n = {} exceeds VCG caps (m <= {}, n <= {})",
                inst.m(),
                inst.n(),
                self.m_cap,
                self.n_cap
            )));
        }
        Ok(())
    }

    /// Per-item argmax route, valid exactly when every bidder is
    /// additive. Provably equal to the general enumeration under the
    /// shared tie-break (pinned by a dual-route test).
    fn run_additive(&self, inst: &Instance, weights: &[Vec<Rat>]) -> Outcome {
        let n = inst.n();
        let m = inst.m();
        let mut allocation = vec![Bundle::EMPTY; n];
        for j in 0..m {
            let mut best = Rat::zero();
            let mut assignee: Option<usize> = None;
            for (i, w) in weights.iter().enumerate() {
                // `>=` keeps the highest-indexed argmax bidder, which
                // minimizes the (S_0, .., S_{n-1}) encoding; a zero
                // maximum leaves the item unallocated.
                if w[j] > Rat::zero() && w[j] >= best {
                    best = w[j].clone();
                    assignee = Some(i);
                }
            }
            if let Some(i) = assignee {
                allocation[i].insert(j);
            }
        }
        let mut payments = Vec::with_capacity(n);
        for i in 0..n {
            // Others' optimum without i, minus others' welfare as allocated.
            let mut opt_without = Rat::zero();
            let mut others_now = Rat::zero();
            for j in 0..m {
                let mut best = Rat::zero();
                for (i2, w) in weights.iter().enumerate() {
                    if i2 != i && w[j] > best {
                        best = w[j].clone();
                    }
                }
                opt_without += best;
            }
            for (i2, s) in allocation.iter().enumerate() {
                if i2 != i {
                    for j in s.iter() {
                        others_now += &weights[i2][j];
                    }
                }
            }
            let p = opt_without - others_now;
            debug_assert!(p >= Rat::zero());
            payments.push(p);
        }
        Outcome { allocation, payments }
    }

    fn run_general(&self, inst: &Instance) -> Result<Outcome, MechError> {
        let m = inst.m();
        let n = inst.n();
        let tables = value_tables(inst)?;
        let levels = suffix_welfare(&tables, m);
        let full = Bundle::full(m);

        // Reconstruct the lexicographically smallest optimal allocation:
        // scan submasks in ascending order, taking the first bundle that
        // still attains the suffix optimum.
        let mut allocation = Vec::with_capacity(n);
        let mut remaining = full;
        for i in 0..n {
            let target = levels[i][remaining.0 as usize].clone();
            let mut chosen = None;
            for sub in remaining.submasks() {
                let rest = remaining.difference(sub);
                if &tables[i][sub.0 as usize] + &levels[i + 1][rest.0 as usize] == target {
                    chosen = Some(sub);
                    break;
                }
            }
            let s = chosen.expect("suffix optimum must be attained by some submask");
            allocation.push(s);
            remaining = remaining.difference(s);
        }

        // Clarke payments: externality imposed on the others.
        let mut payments = Vec::with_capacity(n);
        for i in 0..n {
            let opt_without = if n == 1 {
                Rat::zero()
            } else {
                let other_tables: Vec<Vec<Rat>> = {
                    let mut t = tables.clone();
                    t.remove(i);
                    t
                };
                suffix_welfare(&other_tables, m)[0][full.0 as usize].clone()
            };
            let mut others_now = Rat::zero();
            for (i2, s) in allocation.iter().enumerate() {
                if i2 != i {
                    others_now += &tables[i2][s.0 as usize];
                }
            }
            let p = opt_without - others_now;
            debug_assert!(p >= Rat::zero(), "Clarke payment must be nonnegative");
            payments.push(p);
        }
        Ok(Outcome { allocation, payments })
    }
}

impl Mechanism for VcgMechanism {
    fn name(&self) -> &'static str {
        "vcg_exact"
    }

    fn run(&self, inst: &Instance, _seed: u64) -> Result<Outcome, MechError> {
        self.check_caps(inst)?;
        let weights: Option<Vec<Vec<Rat>>> =
            inst.valuations().iter().map(|v| v.additive_item_values()).collect();
        let outcome = match weights {
            Some(w) => self.run_additive(inst, &w),
            None => self.run_general(inst)?,
        };
        outcome.validate(inst)?;
        Ok(outcome)
    }

    fn full_distribution(&self, inst: &Instance) -> Result<OutcomeDistribution, MechError> {
        Ok(OutcomeDistribution::point(self.run(inst, 0)?))
    }

    fn menu_support(&self) -> MenuSupport {
        MenuSupport::Vcg
    }
}

/// Convenience entry point with default caps.
pub fn vcg_exact(inst: &Instance) -> Result<Outcome, MechError> {
    VcgMechanism::default().run(inst, 0)
}

// === Fixed-size single-bundle maximizer ===

/// Cap on `m` for fixed-size bundle search.
pub const CPP_M_CAP: usize = 20;

/// Exact maximizer of `v` over bundles of size exactly `k`; ties go to
/// the smallest bundle mask. Payment-free fixture.
pub fn cpp_exact(v: &dyn ValuationFn, k: usize) -> Result<Bundle, MechError> {
    let m = v.m();
    if m > CPP_M_CAP {
        return Err(MechError::CapExceeded(format!("m = {m} exceeds the cap {CPP_M_CAP}")));
    }
    if k > m {
        return Err(MechError::BadInput(format!("bundle size {k} exceeds m = {m}")));
    }
    let mut best: Option<(Bundle, Rat)> = None;
    for s in Bundle::subsets_of_size(m, k) {
        let val = v.value(s)?;
        match &best {
            Some((_, b)) if *b >= val => {}
            _ => best = Some((s, val)),
        }
    }
    Ok(best.expect("at least one bundle of size k exists").0)
}

/// The single-bidder public-project mechanism built on [`cpp_exact`]:
/// the bidder receives the exact size-`k` maximizer at price zero.
#[derive(Debug, Clone)]
pub struct CppMechanism {
    pub k: usize,
}

impl Mechanism for CppMechanism {
    fn name(&self) -> &'static str {
        "cpp_exact"
    }

    fn run(&self, inst: &Instance, _seed: u64) -> Result<Outcome, MechError> {
        if inst.n() != 1 {
            return Err(MechError::BadInstance(
                "the fixed-size maximizer serves exactly one bidder".into(),
            ));
        }
        let s = cpp_exact(inst.valuation(0).as_ref(), self.k)?;
        Ok(Outcome { allocation: vec![s], payments: vec![Rat::zero()] })
    }

    fn full_distribution(&self, inst: &Instance) -> Result<OutcomeDistribution, MechError> {
        Ok(OutcomeDistribution::point(self.run(inst, 0)?))
    }
}

// === Greedy baseline ===

/// Non-truthful baseline: items in index order, each to the bidder with
/// the largest exact marginal value (ties to the lowest bidder index),
/// all payments zero. Achieves at least half the optimum on monotone
/// submodular valuations.
#[derive(Debug, Clone, Default)]
pub struct GreedyMechanism;

impl Mechanism for GreedyMechanism {
    fn name(&self) -> &'static str {
        "greedy_welfare"
    }

    fn run(&self, inst: &Instance, _seed: u64) -> Result<Outcome, MechError> {
        let n = inst.n();
        let mut allocation = vec![Bundle::EMPTY; n];
        let mut current: Vec<Rat> = Vec::with_capacity(n);
        for i in 0..n {
            current.push(inst.valuation(i).value(Bundle::EMPTY)?);
        }
        for j in 0..inst.m() {
            let mut best_i = 0usize;
            let mut best_gain: Option<Rat> = None;
            for i in 0..n {
                let mut with = allocation[i];
                with.insert(j);
                let gain = inst.valuation(i).value(with)? - &current[i];
                if best_gain.as_ref().is_none_or(|b| &gain > b) {
                    best_gain = Some(gain);
                    best_i = i;
                }
            }
            allocation[best_i].insert(j);
            current[best_i] = inst.valuation(best_i).value(allocation[best_i])?;
        }
        Ok(Outcome { allocation, payments: vec![Rat::zero(); n] })
    }

    fn full_distribution(&self, inst: &Instance) -> Result<OutcomeDistribution, MechError> {
        Ok(OutcomeDistribution::point(self.run(inst, 0)?))
    }
}

pub fn greedy_welfare(inst: &Instance) -> Result<Outcome, MechError> {
    GreedyMechanism.run(inst, 0)
}

// === Dictator ===

/// Gives every item to bidder `to` at price zero, regardless of reports.
#[derive(Debug, Clone)]
pub struct DictatorMechanism {
    pub to: usize,
}

impl Mechanism for DictatorMechanism {
    fn name(&self) -> &'static str {
        "dictator"
    }

    fn run(&self, inst: &Instance, _seed: u64) -> Result<Outcome, MechError> {
        if self.to >= inst.n() {
            return Err(MechError::BadInstance(format!(
                "dictator target {} out of range for n = {}",
                self.to,
                inst.n()
            )));
        }
        let mut allocation = vec![Bundle::EMPTY; inst.n()];
        allocation[self.to] = Bundle::full(inst.m());
        Ok(Outcome { allocation, payments: vec![Rat::zero(); inst.n()] })
    }

    fn full_distribution(&self, inst: &Instance) -> Result<OutcomeDistribution, MechError> {
        Ok(OutcomeDistribution::point(self.run(inst, 0)?))
    }

    fn menu_support(&self) -> MenuSupport {
        MenuSupport::DictatorTo(self.to)
    }
}

// === Two-bidder multi-unit allocation ===

/// A full split of `m` identical items between two bidders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiUnitOutcome {
    pub split: (u64, u64),
    #[serde(with = "serde_rat_vec")]
    pub payments: Vec<Rat>,
}

impl MultiUnitOutcome {
    pub fn welfare(
        &self,
        v1: &MultiUnitValuation,
        v2: &MultiUnitValuation,
    ) -> Result<Rat, ValError> {
        Ok(v1.value(self.split.0)? + v2.value(self.split.1)?)
    }
}

/// A two-bidder multi-unit auction that always allocates all items.
pub trait MultiUnitMechanism: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(
        &self,
        v1: &MultiUnitValuation,
        v2: &MultiUnitValuation,
        m: u64,
        seed: u64,
    ) -> Result<MultiUnitOutcome, MechError>;
}

fn check_multiunit(v1: &MultiUnitValuation, v2: &MultiUnitValuation, m: u64) -> Result<(), MechError> {
    if v1.m() != m {
        return Err(MechError::GroundSetMismatch { bidder: 0, got: v1.m() as usize, expected: m as usize });
    }
    if v2.m() != m {
        return Err(MechError::GroundSetMismatch { bidder: 1, got: v2.m() as usize, expected: m as usize });
    }
    Ok(())
}

/// Exact welfare maximization over the full-allocation range
/// `{(x, m-x)}` with pivot payments against the full range; ties go to
/// the smaller first coordinate. Always allocates all `m` items.
pub fn midr_exact_multiunit(
    v1: &MultiUnitValuation,
    v2: &MultiUnitValuation,
    m: u64,
) -> Result<MultiUnitOutcome, MechError> {
    check_multiunit(v1, v2, m)?;
    let mut best_x = 0u64;
    let mut best: Option<Rat> = None;
    for x in 0..=m {
        let w = v1.value(x)? + v2.value(m - x)?;
        if best.as_ref().is_none_or(|b| &w > b) {
            best = Some(w);
            best_x = x;
        }
    }
    let p1 = v2.value(m)? - v2.value(m - best_x)?;
    let p2 = v1.value(m)? - v1.value(best_x)?;
    debug_assert!(p1 >= Rat::zero() && p2 >= Rat::zero());
    Ok(MultiUnitOutcome { split: (best_x, m - best_x), payments: vec![p1, p2] })
}

/// [`midr_exact_multiunit`] as a black-box handle.
#[derive(Debug, Clone, Default)]
pub struct MidrMultiUnit;

impl MultiUnitMechanism for MidrMultiUnit {
    fn name(&self) -> &'static str {
        "midr_exact_multiunit"
    }

    fn run(
        &self,
        v1: &MultiUnitValuation,
        v2: &MultiUnitValuation,
        m: u64,
        _seed: u64,
    ) -> Result<MultiUnitOutcome, MechError> {
        midr_exact_multiunit(v1, v2, m)
    }
}

/// Negative control: a uniformly random full split, payments zero.
/// Not truthful and not welfare-maximizing.
#[derive(Debug, Clone, Default)]
pub struct UniformSplitMechanism;

impl MultiUnitMechanism for UniformSplitMechanism {
    fn name(&self) -> &'static str {
        "uniform_split"
    }

    fn run(
        &self,
        v1: &MultiUnitValuation,
        v2: &MultiUnitValuation,
        m: u64,
        seed: u64,
    ) -> Result<MultiUnitOutcome, MechError> {
        check_multiunit(v1, v2, m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng.gen_range(0..=m);
        Ok(MultiUnitOutcome { split: (x, m - x), payments: vec![Rat::zero(), Rat::zero()] })
    }
}

// === Truthfulness audit ===

#[derive(Debug, Clone, Serialize)]
pub struct AuditViolation {
    pub bidder: usize,
    pub misreport_index: usize,
    pub truthful_utility: String,
    pub deviant_utility: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub pairs_checked: usize,
    /// Smallest truthful-to-deviant expected-utility ratio observed
    /// over pairs with positive deviant utility, as "num/den".
    pub worst_ratio: Option<String>,
    pub violations: Vec<AuditViolation>,
    pub monte_carlo_trials: Option<usize>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Expected-utility audit: for every bidder `i` and every misreport in
/// the family, checks
/// `E[u_i(truth)] >= (1 - eps) * E[u_i(misreport)]` exactly.
///
/// Expectations come from `full_distribution` when the mechanism offers
/// it; otherwise `trials` seeded runs estimate them (and `trials` must
/// be supplied). The family is tried for every bidder whose ground set
/// matches.
pub fn audit_truthfulness(
    mech: &dyn Mechanism,
    inst: &Instance,
    misreports: &[ValuationHandle],
    eps: &Rat,
    trials: Option<(usize, u64)>,
) -> Result<AuditReport, MechError> {
    if misreports.is_empty() {
        return Err(MechError::BadInput("empty misreport family".into()));
    }
    if eps < &Rat::zero() {
        return Err(MechError::BadInput("epsilon must be nonnegative".into()));
    }
    let one = Rat::from_integer(1.into());

    let expected_utility = |report: &Instance, i: usize| -> Result<Rat, MechError> {
        match mech.full_distribution(report) {
            Ok(dist) => Ok(dist.expected_utility(inst.valuation(i).as_ref(), i)?),
            Err(MechError::Unsupported(..)) => {
                let (n_trials, seed) =
                    trials.ok_or_else(|| MechError::BadInput(
                        "mechanism has no closed-form law and no trial budget was supplied".into(),
                    ))?;
                if n_trials == 0 {
                    return Err(MechError::BadInput("zero Monte Carlo trials".into()));
                }
                let mut total = Rat::zero();
                for t in 0..n_trials {
                    let o = mech.run(report, seed.wrapping_add(t as u64))?;
                    total += o.utility(inst, i)?;
                }
                Ok(total / Rat::from_integer((n_trials as u64).into()))
            }
            Err(e) => Err(e),
        }
    };

    let mut violations = Vec::new();
    let mut worst_ratio: Option<Rat> = None;
    let mut pairs = 0usize;
    for i in 0..inst.n() {
        let truthful = expected_utility(inst, i)?;
        for (mi, v) in misreports.iter().enumerate() {
            if v.m() != inst.m() {
                return Err(MechError::GroundSetMismatch {
                    bidder: i,
                    got: v.m(),
                    expected: inst.m(),
                });
            }
            pairs += 1;
            let deviant_inst = inst.with_replaced(i, v.clone())?;
            let deviant = expected_utility(&deviant_inst, i)?;
            if deviant > Rat::zero() {
                let ratio = &truthful / &deviant;
                if worst_ratio.as_ref().is_none_or(|w| &ratio < w) {
                    worst_ratio = Some(ratio);
                }
            }
            if truthful < (&one - eps) * &deviant {
                violations.push(AuditViolation {
                    bidder: i,
                    misreport_index: mi,
                    truthful_utility: crate::rational::rat_to_string(&truthful),
                    deviant_utility: crate::rational::rat_to_string(&deviant),
                });
            }
        }
    }
    Ok(AuditReport {
        pairs_checked: pairs,
        worst_ratio: worst_ratio.as_ref().map(crate::rational::rat_to_string),
        violations,
        monte_carlo_trials: trials.map(|(n, _)| n),
    })
}
