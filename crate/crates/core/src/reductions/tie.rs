//! Extraction against randomized mechanisms: double-peak valuations
//! whose peak pair is hidden behind a list-decodable code.
//!
//! The special bidder's valuation looks symmetric unless the formula is
//! uniquely satisfiable, in which case a hidden partition `(A, B)` of a
//! carrier set `C` pays a premium for unbalanced bundles. Any bundle
//! unbalanced enough to be worth that premium is close to one peak in
//! Hamming distance, so decoding it recovers the satisfying assignment.

use super::{derive_seed, ReductionError, ReductionReport, TrialRecord, Verdict};
use crate::bundle::Bundle;
use crate::codes::{contract, duplicate_bits, expand, hamming, BitString, CodeSpec, CodeSpecJson};
use crate::mechanisms::{Instance, MechanismHandle};
use crate::rational::{inv_pow, rat_to_string, serde_rat, serde_rat_opt, Rat};
use crate::satkit::{eval_formula, unique_sat_status, Assignment, Formula, SatStatus};
use crate::valuations::{
    check_ground, psi_tilde, PolarAdditiveValuation, ScaledValuation, ValError, ValuationFn,
    ValuationHandle,
};
use num_traits::{One, Signed};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::sync::Arc;
use std::time::Instant;

/// Message-length cap: construction precomputes all `2^m'` effective
/// codewords and the satisfiability status.
pub const ENCODED_MSG_CAP: usize = 12;

/// A double-peak valuation over a carrier `C` whose peaks are derived
/// from the formula's satisfying assignment, if any.
///
/// The carrier order fixes the bijection onto the pair ground set
/// `[m_eff] x {0,1}`: position `i` of the order is pair `(i, 0)`,
/// position `m_eff + i` is `(i, 1)`. Peak `A` is the expansion of the
/// satisfying message's codeword, each bit duplicated `2^level` times;
/// `B` is its complement in `C`. Evaluation never reads the stored
/// satisfiability status; it re-derives everything by decoding, so the
/// [`EncodedDoublePeak::value`] path exercises the same algorithm an
/// extraction run does.
pub struct EncodedDoublePeak {
    m: usize,
    c_order: Vec<usize>,
    formula: Formula,
    alpha: Rat,
    beta: Rat,
    code: CodeSpec,
    dup: usize,
    m_eff: usize,
    radius: usize,
    effective: Vec<BitString>,
    sat_status: SatStatus,
}

/// A successful decode: the satisfying assignment and the peak pair in
/// ambient item space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedPartition {
    pub assignment: Vec<bool>,
    pub a_items: Bundle,
    pub b_items: Bundle,
}

enum Branch {
    /// Decoded message plus the bundle's overlap with each peak, in
    /// pair space.
    Unbalanced { message: u64, in_a: usize, in_b: usize },
    Balanced,
}

impl EncodedDoublePeak {
    pub fn new(
        m: usize,
        c_order: Vec<usize>,
        formula: Formula,
        alpha: Rat,
        beta: Rat,
        code: CodeSpec,
        level: usize,
    ) -> Result<Self, ValError> {
        if !alpha.is_positive() {
            return Err(ValError::BadParams("alpha must be positive".into()));
        }
        if !beta.is_positive() || beta >= Rat::one() {
            return Err(ValError::BadParams("beta must lie in (0, 1)".into()));
        }
        if beta != *code.beta() {
            return Err(ValError::BadParams(format!(
                "beta {} disagrees with the code's beta {}; the balance threshold and the \
                 decode radius must move together",
                rat_to_string(&beta),
                rat_to_string(code.beta())
            )));
        }
        if formula.num_vars() != code.m_msg() {
            return Err(ValError::BadParams(format!(
                "formula has {} variables, code encodes {}-bit messages",
                formula.num_vars(),
                code.m_msg()
            )));
        }
        if code.m_msg() > ENCODED_MSG_CAP {
            return Err(ValError::BadParams(format!(
                "message length {} exceeds the cap {ENCODED_MSG_CAP}",
                code.m_msg()
            )));
        }
        if level >= 16 {
            return Err(ValError::BadParams(format!("duplication level {level} is absurd")));
        }
        let dup = 1usize << level;
        let m_eff = code.m_code() * dup;
        if c_order.len() != 2 * m_eff {
            return Err(ValError::BadParams(format!(
                "carrier order has {} items; the code needs exactly {}",
                c_order.len(),
                2 * m_eff
            )));
        }
        let mut seen = Bundle::EMPTY;
        for &item in &c_order {
            if item >= m {
                return Err(ValError::ItemOutOfRange { bundle: c_order.clone(), m });
            }
            if seen.contains(item) {
                return Err(ValError::BadParams(format!("carrier repeats item {item}")));
            }
            seen = seen.union(Bundle::singleton(item));
        }
        let sat_status = unique_sat_status(&formula)?;
        if sat_status == SatStatus::Multiple {
            return Err(ValError::BadParams(
                "formula has multiple satisfying assignments; the peak pair would be ambiguous"
                    .into(),
            ));
        }
        let mut effective = Vec::with_capacity(1 << code.m_msg());
        for id in 0..(1u64 << code.m_msg()) {
            let message = BitString::from_count(id, code.m_msg());
            let codeword = code.encode(&message).map_err(|e| {
                ValError::BadParams(format!("message {id} failed to encode: {e}"))
            })?;
            effective.push(duplicate_bits(&codeword, dup));
        }
        let radius_rat =
            (Rat::one() - &beta) * Rat::from_integer(m_eff.into()) / Rat::from_integer(2.into());
        let radius = usize::try_from(radius_rat.floor().to_integer())
            .map_err(|_| ValError::BadParams("decode radius overflow".into()))?;
        Ok(EncodedDoublePeak {
            m,
            c_order,
            formula,
            alpha,
            beta,
            code,
            dup,
            m_eff,
            radius,
            effective,
            sat_status,
        })
    }

    pub fn m_eff(&self) -> usize {
        self.m_eff
    }

    pub fn dup(&self) -> usize {
        self.dup
    }

    pub fn alpha(&self) -> &Rat {
        &self.alpha
    }

    pub fn beta(&self) -> &Rat {
        &self.beta
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn sat_status(&self) -> SatStatus {
        self.sat_status
    }

    pub fn c_order(&self) -> &[usize] {
        &self.c_order
    }

    /// The carrier as an ambient bundle.
    pub fn c_items(&self) -> Bundle {
        self.c_order.iter().fold(Bundle::EMPTY, |acc, &j| acc.union(Bundle::singleton(j)))
    }

    /// Ambient `S` restricted to the carrier and rewritten in pair
    /// coordinates: bit `pos` set iff `S` holds the carrier's `pos`-th
    /// item.
    fn to_pair_space(&self, s: Bundle) -> Bundle {
        let mut w = 0u64;
        for (pos, &item) in self.c_order.iter().enumerate() {
            if s.contains(item) {
                w |= 1 << pos;
            }
        }
        Bundle(w)
    }

    /// Pair-space bundle back to ambient items.
    fn to_items(&self, pairs: Bundle) -> Bundle {
        let mut out = Bundle::EMPTY;
        for (pos, &item) in self.c_order.iter().enumerate() {
            if pairs.contains(pos) {
                out = out.union(Bundle::singleton(item));
            }
        }
        out
    }

    /// The peak pair induced by an arbitrary message, in ambient space.
    /// Test harnesses use this to build the ground-truth oracle; the
    /// evaluation path never calls it.
    pub fn partition_for(&self, assignment: &Assignment) -> Result<(Bundle, Bundle), ValError> {
        if assignment.0.len() != self.code.m_msg() {
            return Err(ValError::BadParams(format!(
                "assignment has {} bits, expected {}",
                assignment.0.len(),
                self.code.m_msg()
            )));
        }
        let a_pairs = expand(&self.effective[assignment.to_count() as usize]);
        let b_pairs = Bundle(Bundle::full(2 * self.m_eff).0 & !a_pairs.0);
        Ok((self.to_items(a_pairs), self.to_items(b_pairs)))
    }

    /// Nearest-codeword search within the decode radius over the four
    /// contractions of `w` (both fill bits, `w` and its complement in
    /// the carrier), returning the first message that satisfies the
    /// formula. For a uniquely satisfiable formula the result does not
    /// depend on the search order.
    fn decode_satisfying(&self, w: Bundle) -> Result<Option<u64>, ValError> {
        let complement = Bundle(Bundle::full(2 * self.m_eff).0 & !w.0);
        for target in [w, complement] {
            for fill in [false, true] {
                let contracted = contract(target, self.m_eff, fill);
                for (id, codeword) in self.effective.iter().enumerate() {
                    let distance = hamming(&contracted, codeword)
                        .map_err(|e| ValError::BadParams(e.to_string()))?;
                    if distance > self.radius {
                        continue;
                    }
                    let assignment = Assignment::from_count(id as u64, self.code.m_msg());
                    if eval_formula(&self.formula, &assignment)? {
                        return Ok(Some(id as u64));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Decode plus the balance test of the claim chain: a hit only
    /// counts when the bundle is strictly unbalanced across the decoded
    /// peaks. Balanced bundles score the same either way, so the two
    /// public readers of this classification can never disagree.
    fn classify(&self, w: Bundle) -> Result<Branch, ValError> {
        if let Some(message) = self.decode_satisfying(w)? {
            let a_pairs = expand(&self.effective[message as usize]);
            let in_a = w.intersection(a_pairs).len();
            let in_b = w.len() - in_a;
            let spread = in_a.abs_diff(in_b);
            if Rat::from_integer(spread.into())
                > &self.beta * Rat::from_integer(self.m_eff.into())
            {
                return Ok(Branch::Unbalanced { message, in_a, in_b });
            }
        }
        Ok(Branch::Balanced)
    }

    /// The hidden partition recovered from `s`, or `None` when `s` is
    /// too balanced to pin a peak down (always, if nothing satisfies
    /// the formula).
    pub fn extract_partition(&self, s: Bundle) -> Result<Option<ExtractedPartition>, ValError> {
        check_ground(s, self.m)?;
        let w = self.to_pair_space(s);
        match self.classify(w)? {
            Branch::Balanced => Ok(None),
            Branch::Unbalanced { message, .. } => {
                let assignment = Assignment::from_count(message, self.code.m_msg());
                let (a_items, b_items) = self.partition_for(&assignment)?;
                Ok(Some(ExtractedPartition { assignment: assignment.0, a_items, b_items }))
            }
        }
    }
}

impl ValuationFn for EncodedDoublePeak {
    fn m(&self) -> usize {
        self.m
    }

    fn value(&self, s: Bundle) -> Result<Rat, ValError> {
        check_ground(s, self.m)?;
        let w = self.to_pair_space(s);
        let m_eff = Rat::from_integer(self.m_eff.into());
        match self.classify(w)? {
            Branch::Unbalanced { in_a, in_b, .. } => {
                let x = Rat::from_integer(in_a.into()) / &m_eff;
                let y = Rat::from_integer(in_b.into()) / &m_eff;
                psi_tilde(&x, &y, &self.alpha, &self.beta)
            }
            Branch::Balanced => {
                // Either peak split of a balanced bundle lands in the
                // profile's symmetric case, which depends only on the
                // total carrier overlap.
                let z = Rat::from_integer(w.len().into()) / (Rat::from_integer(2.into()) * &m_eff);
                psi_tilde(&z, &z, &self.alpha, &self.beta)
            }
        }
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "family": "encoded_double_peak",
            "m": self.m,
            "carrier": self.c_order,
            "alpha": rat_to_string(&self.alpha),
            "beta": rat_to_string(&self.beta),
            "code": self.code.to_json_spec(),
            "duplication": self.dup,
            "num_vars": self.formula.num_vars(),
            "clauses": self.formula.clauses(),
        })
    }
}

/// An all-polar market: `2^ell` bidders over `m0 * 2^ell` items, each
/// wanting an independently drawn set of `m0` items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicInstance {
    pub ell: usize,
    pub m0: usize,
    pub n: usize,
    pub m: usize,
    pub desired: Vec<Bundle>,
    #[serde(with = "serde_rat")]
    pub omega: Rat,
    pub seed: u64,
}

/// The off-peak item weight paired with a target approximation factor.
pub fn omega_from_factor(c: &Rat) -> Rat {
    c / Rat::from_integer(8.into())
}

pub fn build_basic_instance(
    ell: usize,
    m0: usize,
    omega: Rat,
    seed: u64,
) -> Result<BasicInstance, ReductionError> {
    if ell == 0 || m0 == 0 {
        return Err(ReductionError::BadConfig("ell and m0 must be positive".into()));
    }
    if !omega.is_positive() || omega >= Rat::one() {
        return Err(ReductionError::BadConfig("omega must lie in (0, 1)".into()));
    }
    let n = 1usize << ell;
    let m = m0 << ell;
    if m > 64 {
        return Err(ReductionError::CapExceeded(format!("m = {m} exceeds the 64-item mask")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let desired = (0..n)
        .map(|_| Bundle::from_indices(rand::seq::index::sample(&mut rng, m, m0)))
        .collect();
    Ok(BasicInstance { ell, m0, n, m, desired, omega, seed })
}

impl BasicInstance {
    pub fn valuations(&self) -> Result<Vec<ValuationHandle>, ValError> {
        self.desired
            .iter()
            .map(|a| {
                PolarAdditiveValuation::new(
                    self.m,
                    a.iter().collect(),
                    self.omega.clone(),
                )
                .map(|v| Arc::new(v) as ValuationHandle)
            })
            .collect()
    }

    pub fn instance(&self) -> Result<Instance, ReductionError> {
        Ok(Instance::new(self.m, self.valuations()?)?)
    }
}

/// Per-bidder sample means for the allocation-correlation comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidderCorrelation {
    pub bidder: usize,
    /// Mean `|R ∩ A|` over trials.
    pub mean_intersection: String,
    /// Mean `|R ∪ A|` over trials.
    pub mean_union: String,
    /// `(c/4 - omega) * mean_union`.
    pub threshold: String,
    pub exhibits: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub trials: usize,
    pub seed: u64,
    pub c: String,
    pub omega: String,
    pub bidders: Vec<BidderCorrelation>,
    pub any_exhibits: bool,
    pub trial_seeds: Vec<u64>,
}

/// Sample means of each bidder's overlap with its desired set under
/// repeated runs. Report-only: whether any bidder clears the threshold
/// is recorded, not asserted, since the underlying statement is
/// existential over markets.
pub fn correlation_experiment(
    mech: &MechanismHandle,
    basic: &BasicInstance,
    c: &Rat,
    trials: usize,
    seed: u64,
) -> Result<CorrelationReport, ReductionError> {
    if trials == 0 {
        return Err(ReductionError::BadConfig("trials must be positive".into()));
    }
    let instance = basic.instance()?;
    let trial_seeds: Vec<u64> = (0..trials).map(|t| derive_seed(seed, 0x434f52, t as u64)).collect();
    let mut inter = vec![0usize; basic.n];
    let mut union = vec![0usize; basic.n];
    for &trial_seed in &trial_seeds {
        let outcome = mech.run(&instance, trial_seed)?;
        for (i, bundle) in outcome.allocation.iter().enumerate() {
            inter[i] += bundle.intersection(basic.desired[i]).len();
            union[i] += bundle.union(basic.desired[i]).len();
        }
    }
    let trials_rat = Rat::from_integer(trials.into());
    let factor = c / Rat::from_integer(4.into()) - &basic.omega;
    let bidders: Vec<BidderCorrelation> = (0..basic.n)
        .map(|i| {
            let mean_inter = Rat::from_integer(inter[i].into()) / &trials_rat;
            let mean_union = Rat::from_integer(union[i].into()) / &trials_rat;
            let threshold = &factor * &mean_union;
            BidderCorrelation {
                bidder: i,
                mean_intersection: rat_to_string(&mean_inter),
                mean_union: rat_to_string(&mean_union),
                threshold: rat_to_string(&threshold),
                exhibits: mean_inter > threshold,
            }
        })
        .collect();
    let any_exhibits = bidders.iter().any(|b| b.exhibits);
    Ok(CorrelationReport {
        trials,
        seed,
        c: rat_to_string(c),
        omega: rat_to_string(&basic.omega),
        bidders,
        any_exhibits,
        trial_seeds,
    })
}

/// The non-constructive advice of the extraction argument, spelled out
/// as explicit inputs: duplication level, profile shape, and the value
/// scale, plus the code itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieAdvice {
    pub j: usize,
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
    #[serde(with = "serde_rat")]
    pub lambda: Rat,
    #[serde(with = "serde_rat")]
    pub beta: Rat,
    pub code: CodeSpecJson,
}

/// Extraction-loop configuration. `ell = 0` is the degenerate
/// single-bidder mode used by public-project fixtures: no polar market
/// is drawn and the special bidder stands alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieConfig {
    pub ell: usize,
    pub m0: usize,
    /// Duplication level `j`: codeword bits repeat `2^j` times.
    pub level: usize,
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
    /// Cross-check only; the code's own `beta` governs. The standard
    /// choice at scale `ell` is `10^-ell`.
    #[serde(default, with = "serde_rat_opt", skip_serializing_if = "Option::is_none")]
    pub beta: Option<Rat>,
    /// Scale applied to the encoded valuation; the argument sizes it
    /// between `1/(2 ell)` and `10^ell (m + 2)`, but any positive value
    /// runs.
    #[serde(with = "serde_rat")]
    pub lambda: Rat,
    /// Off-peak weight of the polar market; defaults to `1/m^3`.
    #[serde(default, with = "serde_rat_opt", skip_serializing_if = "Option::is_none")]
    pub omega: Option<Rat>,
    pub trials: usize,
    pub seed: u64,
    pub code: CodeSpecJson,
}

/// The standard balance threshold at scale `ell`.
pub fn default_beta(ell: u32) -> Rat {
    Rat::new(1.into(), num_bigint::BigInt::from(10u32).pow(ell))
}

impl TieConfig {
    pub fn from_advice(
        ell: usize,
        m0: usize,
        advice: &TieAdvice,
        trials: usize,
        seed: u64,
    ) -> TieConfig {
        TieConfig {
            ell,
            m0,
            level: advice.j,
            alpha: advice.alpha.clone(),
            beta: Some(advice.beta.clone()),
            lambda: advice.lambda.clone(),
            omega: None,
            trials,
            seed,
            code: advice.code.clone(),
        }
    }

    pub fn n(&self) -> usize {
        1usize << self.ell
    }

    pub fn m(&self) -> usize {
        self.m0 << self.ell
    }

    pub fn build_code(&self) -> Result<CodeSpec, ReductionError> {
        Ok(CodeSpec::from_json_spec(&self.code)?)
    }

    pub fn omega(&self) -> Rat {
        self.omega.clone().unwrap_or_else(|| inv_pow(self.m(), 3))
    }

    pub fn validate(&self) -> Result<CodeSpec, ReductionError> {
        if self.m0 == 0 || self.trials == 0 {
            return Err(ReductionError::BadConfig("m0 and trials must be positive".into()));
        }
        if self.ell > 6 {
            return Err(ReductionError::CapExceeded(format!(
                "ell = {} means {} bidders",
                self.ell,
                1u64 << self.ell
            )));
        }
        if self.m() > 64 {
            return Err(ReductionError::CapExceeded(format!(
                "m = {} exceeds the 64-item mask",
                self.m()
            )));
        }
        if !self.lambda.is_positive() {
            return Err(ReductionError::BadConfig("lambda must be positive".into()));
        }
        let code = self.build_code()?;
        if let Some(beta) = &self.beta {
            if beta != code.beta() {
                return Err(ReductionError::BadConfig(format!(
                    "config beta {} disagrees with the code's beta {}",
                    rat_to_string(beta),
                    rat_to_string(code.beta())
                )));
            }
        }
        let carrier = 2 * code.m_code() * (1usize << self.level);
        if carrier > self.m() {
            return Err(ReductionError::BadConfig(format!(
                "carrier needs {carrier} items but the market has only {}",
                self.m()
            )));
        }
        Ok(code)
    }
}

/// Runs the decode-extraction loop. Per trial: draw a fresh random
/// carrier (random items, random order), hand the special bidder the
/// scaled encoded valuation against a fresh polar market, run the
/// mechanism, and try to decode the bundle that comes back. A decoded
/// assignment is re-verified against the formula before the `Sat`
/// verdict; otherwise the loop exhausts its trial budget into
/// `PresumedUnsat`.
pub fn run_tie_extraction(
    phi: &Formula,
    mech: &MechanismHandle,
    config: &TieConfig,
) -> Result<ReductionReport, ReductionError> {
    let code = config.validate()?;
    if phi.num_vars() != code.m_msg() {
        return Err(ReductionError::BadConfig(format!(
            "formula has {} variables, code encodes {}-bit messages",
            phi.num_vars(),
            code.m_msg()
        )));
    }
    let started = Instant::now();
    let m = config.m();
    let n = config.n();
    let carrier_len = 2 * code.m_code() * (1usize << config.level);
    let mut trials = Vec::new();
    for trial in 0..config.trials {
        let trial_seed = derive_seed(config.seed, 0x544945, trial as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let special = if n > 1 { rng.gen_range(0..n) } else { 0 };
        let others: Vec<ValuationHandle> = if n > 1 {
            let basic = build_basic_instance(config.ell, config.m0, config.omega(), rng.gen())?;
            let mut all = basic.valuations()?;
            all.remove(special);
            all
        } else {
            Vec::new()
        };
        let mut c_order: Vec<usize> =
            rand::seq::index::sample(&mut rng, m, carrier_len).into_vec();
        c_order.shuffle(&mut rng);
        let encoded = Arc::new(EncodedDoublePeak::new(
            m,
            c_order,
            phi.clone(),
            config.alpha.clone(),
            code.beta().clone(),
            code.clone(),
            config.level,
        )?);
        let scaled = Arc::new(ScaledValuation::new(
            encoded.clone() as ValuationHandle,
            config.lambda.clone(),
        )?);
        let instance = Instance::with_special(m, &others, special, scaled)?;
        let mech_seed = derive_seed(trial_seed, 0x52, 0);
        let mut record = TrialRecord {
            seed: mech_seed,
            sweep: trial,
            special,
            k: None,
            p: None,
            returned: None,
            hit: false,
            error: None,
        };
        let mut sat = None;
        match mech.run(&instance, mech_seed) {
            Err(e) => record.error = Some(e.to_string()),
            Ok(outcome) => {
                let returned = outcome.allocation[special];
                record.returned = Some(returned);
                if let Some(extracted) = encoded.extract_partition(returned)? {
                    let assignment = Assignment(extracted.assignment.clone());
                    record.hit = eval_formula(phi, &assignment)?;
                    if record.hit {
                        sat = Some(assignment);
                    }
                }
            }
        }
        trials.push(record);
        if let Some(assignment) = sat {
            return Ok(ReductionReport {
                verdict: Verdict::Sat { assignment: assignment.0 },
                sweeps_run: trial + 1,
                trials,
                timing_ms: Some(started.elapsed().as_millis() as u64),
            });
        }
    }
    Ok(ReductionReport {
        verdict: Verdict::PresumedUnsat,
        sweeps_run: config.trials,
        trials,
        timing_ms: Some(started.elapsed().as_millis() as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{CppMechanism, VcgMechanism};
    use crate::rational::rat;
    use crate::valuations::{
        check_monotone, check_submodular_marginals, DoublePeakValuation, SymmetricDoublePeak,
    };

    /// Repetition-code fixture: 4-bit messages, no duplication, carrier
    /// of 8 items in a scrambled order over an `m`-item ambient set.
    fn fixture(
        m: usize,
        c_order: Vec<usize>,
        phi: Formula,
        alpha: Rat,
        beta: Rat,
    ) -> EncodedDoublePeak {
        let code = CodeSpec::repetition(4, 1, beta.clone()).unwrap();
        EncodedDoublePeak::new(m, c_order, phi, alpha, beta, code, 0).unwrap()
    }

    fn scrambled_order() -> Vec<usize> {
        vec![3, 6, 0, 5, 1, 7, 4, 2]
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        let beta = rat(1, 10);
        let code = CodeSpec::repetition(4, 1, beta.clone()).unwrap();
        let phi = Formula::pinned(&[true, false, true, false]).unwrap();
        // Carrier too short.
        assert!(EncodedDoublePeak::new(
            8,
            vec![0, 1, 2],
            phi.clone(),
            Rat::one(),
            beta.clone(),
            code.clone(),
            0
        )
        .is_err());
        // Repeated carrier item.
        assert!(EncodedDoublePeak::new(
            8,
            vec![0, 1, 2, 3, 4, 5, 6, 6],
            phi.clone(),
            Rat::one(),
            beta.clone(),
            code.clone(),
            0
        )
        .is_err());
        // Beta disagreeing with the code.
        assert!(EncodedDoublePeak::new(
            8,
            scrambled_order(),
            phi.clone(),
            Rat::one(),
            rat(1, 20),
            code.clone(),
            0
        )
        .is_err());
        // Formula arity mismatch.
        let phi3 = Formula::pinned(&[true, false, true]).unwrap();
        assert!(EncodedDoublePeak::new(
            8,
            scrambled_order(),
            phi3,
            Rat::one(),
            beta.clone(),
            code.clone(),
            0
        )
        .is_err());
        // Multiple satisfying assignments.
        let loose = Formula::new(4, vec![vec![1, 2]]).unwrap();
        let err = EncodedDoublePeak::new(
            8,
            scrambled_order(),
            loose,
            Rat::one(),
            beta,
            code,
            0,
        );
        assert!(matches!(err, Err(ValError::BadParams(msg)) if msg.contains("multiple")));
    }

    #[test]
    fn uniquely_satisfied_formula_matches_the_direct_double_peak_everywhere() {
        let bits = [true, false, true, false];
        let phi = Formula::pinned(&bits).unwrap();
        for (alpha, beta) in [(Rat::one(), rat(1, 10)), (rat(1, 4), rat(1, 20)), (rat(1, 2), rat(1, 4))]
        {
            let code = CodeSpec::repetition(4, 1, beta.clone()).unwrap();
            let v = EncodedDoublePeak::new(
                8,
                scrambled_order(),
                phi.clone(),
                alpha.clone(),
                beta.clone(),
                code,
                0,
            )
            .unwrap();
            let (a_items, b_items) = v.partition_for(&Assignment(bits.to_vec())).unwrap();
            let direct =
                DoublePeakValuation::new(8, a_items, b_items, alpha, beta).unwrap();
            for s in Bundle::all_subsets(8) {
                assert_eq!(
                    v.value(s).unwrap(),
                    direct.value(s).unwrap(),
                    "mismatch at {s:?}"
                );
            }
        }
    }

    #[test]
    fn unsatisfiable_formula_matches_the_symmetric_profile_everywhere() {
        let phi = Formula::contradiction(4).unwrap();
        let v = fixture(8, scrambled_order(), phi, Rat::one(), rat(1, 10));
        let direct = SymmetricDoublePeak::new(8, v.c_items(), Rat::one()).unwrap();
        for s in Bundle::all_subsets(8) {
            assert_eq!(v.value(s).unwrap(), direct.value(s).unwrap(), "mismatch at {s:?}");
            assert_eq!(v.extract_partition(s).unwrap(), None);
        }
        assert_eq!(v.sat_status(), SatStatus::Unsat);
    }

    #[test]
    fn value_ignores_items_outside_the_carrier() {
        let bits = [false, true, false, true];
        let phi = Formula::pinned(&bits).unwrap();
        let v = fixture(12, vec![11, 2, 9, 4, 0, 7, 5, 1], phi, rat(1, 2), rat(1, 10));
        let outside = Bundle::from_indices([3usize, 6, 8, 10]);
        for s in Bundle::all_subsets(12).step_by(17) {
            let stripped = Bundle(s.0 & !outside.0);
            assert_eq!(v.value(s).unwrap(), v.value(stripped).unwrap());
        }
    }

    #[test]
    fn peak_bundle_scores_the_two_peak_maximum_and_extracts() {
        let bits = [true, true, false, false];
        let phi = Formula::pinned(&bits).unwrap();
        let v = fixture(8, scrambled_order(), phi, Rat::one(), rat(1, 10));
        let (a_items, b_items) = v.partition_for(&Assignment(bits.to_vec())).unwrap();
        assert_eq!(v.value(a_items).unwrap(), rat(381, 400));
        assert_eq!(v.value(b_items).unwrap(), rat(381, 400));
        let extracted = v.extract_partition(a_items).unwrap().expect("peak decodes");
        assert_eq!(extracted.assignment, bits.to_vec());
        assert_eq!(extracted.a_items, a_items);
        assert_eq!(extracted.b_items, b_items);
        // The complement peak decodes to the same partition.
        let from_b = v.extract_partition(b_items).unwrap().expect("other peak decodes");
        assert_eq!(from_b.a_items, a_items);
    }

    #[test]
    fn extraction_fires_exactly_on_strictly_unbalanced_carrier_bundles() {
        let bits = [true, false, false, true];
        let phi = Formula::pinned(&bits).unwrap();
        let v = fixture(8, (0..8).collect(), phi, Rat::one(), rat(1, 10));
        let (a_items, b_items) = v.partition_for(&Assignment(bits.to_vec())).unwrap();
        let threshold = v.beta().clone() * Rat::from_integer(4.into());
        for s in Bundle::all_subsets(8) {
            let in_a = s.intersection(a_items).len();
            let in_b = s.intersection(b_items).len();
            let unbalanced =
                Rat::from_integer(in_a.abs_diff(in_b).into()) > threshold;
            let extracted = v.extract_partition(s).unwrap();
            assert_eq!(extracted.is_some(), unbalanced, "disagreement at {s:?}");
            if let Some(got) = extracted {
                assert_eq!(got.a_items, a_items);
                assert_eq!(got.b_items, b_items);
                assert_eq!(got.assignment, bits.to_vec());
            }
        }
    }

    #[test]
    fn duplicated_code_matches_the_direct_double_peak() {
        // One message bit, repetition factor 2, duplication level 1:
        // effective codewords 0000 and 1111 over a carrier of 8.
        let bits = [true];
        let phi = Formula::pinned(&bits).unwrap();
        let beta = rat(1, 10);
        let code = CodeSpec::repetition(1, 2, beta.clone()).unwrap();
        let v = EncodedDoublePeak::new(
            8,
            vec![5, 2, 7, 0, 3, 6, 1, 4],
            phi,
            Rat::one(),
            beta.clone(),
            code,
            1,
        )
        .unwrap();
        assert_eq!(v.m_eff(), 4);
        assert_eq!(v.dup(), 2);
        let (a_items, b_items) = v.partition_for(&Assignment(bits.to_vec())).unwrap();
        let direct = DoublePeakValuation::new(8, a_items, b_items, Rat::one(), beta).unwrap();
        for s in Bundle::all_subsets(8) {
            assert_eq!(v.value(s).unwrap(), direct.value(s).unwrap(), "mismatch at {s:?}");
        }
        assert!(v.extract_partition(a_items).unwrap().is_some());
    }

    #[test]
    fn random_linear_code_matches_the_direct_double_peak() {
        let bits = [true, false, true];
        let phi = Formula::pinned(&bits).unwrap();
        let beta = rat(1, 10);
        let code = CodeSpec::random_linear(3, 5, beta.clone(), 77).unwrap();
        let v = EncodedDoublePeak::new(
            10,
            vec![9, 0, 4, 2, 8, 1, 6, 3, 7, 5],
            phi,
            rat(1, 2),
            beta.clone(),
            code,
            0,
        )
        .unwrap();
        let (a_items, b_items) = v.partition_for(&Assignment(bits.to_vec())).unwrap();
        let direct = DoublePeakValuation::new(10, a_items, b_items, rat(1, 2), beta).unwrap();
        for s in Bundle::all_subsets(10) {
            assert_eq!(v.value(s).unwrap(), direct.value(s).unwrap(), "mismatch at {s:?}");
        }
    }

    #[test]
    fn encoded_valuations_are_monotone_submodular() {
        for phi in
            [Formula::pinned(&[true, false, true, true]).unwrap(), Formula::contradiction(4).unwrap()]
        {
            let v = fixture(8, scrambled_order(), phi, rat(1, 2), rat(1, 10));
            assert!(check_monotone(&v, 8).unwrap());
            assert!(check_submodular_marginals(&v, 8).unwrap());
        }
    }

    #[test]
    fn scaling_is_exact_and_preserves_the_argmax() {
        let bits = [true, false, true, false];
        let phi = Formula::pinned(&bits).unwrap();
        let v = Arc::new(fixture(8, scrambled_order(), phi, Rat::one(), rat(1, 10)));
        let lambda = rat(7, 3);
        let scaled =
            ScaledValuation::new(v.clone() as ValuationHandle, lambda.clone()).unwrap();
        let argmax = |f: &dyn ValuationFn| -> Vec<Bundle> {
            let mut best: Option<Rat> = None;
            let mut winners = Vec::new();
            for s in Bundle::subsets_of_size(8, 4) {
                let val = f.value(s).unwrap();
                match &best {
                    Some(b) if *b > val => {}
                    Some(b) if *b == val => winners.push(s),
                    _ => {
                        best = Some(val);
                        winners = vec![s];
                    }
                }
            }
            winners
        };
        for s in Bundle::all_subsets(8) {
            assert_eq!(scaled.value(s).unwrap(), &lambda * v.value(s).unwrap());
        }
        assert_eq!(argmax(v.as_ref()), argmax(&scaled));
    }

    #[test]
    fn basic_instance_draws_fixed_size_desired_sets() {
        let basic = build_basic_instance(1, 2, rat(1, 64), 5).unwrap();
        assert_eq!((basic.n, basic.m), (2, 4));
        for a in &basic.desired {
            assert_eq!(a.len(), 2);
        }
        let again = build_basic_instance(1, 2, rat(1, 64), 5).unwrap();
        assert_eq!(basic, again);
        assert!(build_basic_instance(0, 2, rat(1, 64), 5).is_err());
        assert_eq!(omega_from_factor(&rat(1, 2)), rat(1, 16));
    }

    #[test]
    fn correlation_experiment_reports_exact_dictator_means() {
        let basic = build_basic_instance(1, 4, rat(1, 64), 9).unwrap();
        let mech: MechanismHandle = Arc::new(crate::mechanisms::DictatorMechanism { to: 0 });
        let report = correlation_experiment(&mech, &basic, &rat(1, 2), 5, 3).unwrap();
        // The beneficiary always receives everything: intersection is
        // |A|, union is m.
        assert_eq!(report.bidders[0].mean_intersection, "4");
        assert_eq!(report.bidders[0].mean_union, "8");
        assert_eq!(report.bidders[1].mean_intersection, "0");
        assert_eq!(report.trial_seeds.len(), 5);
        assert!(correlation_experiment(&mech, &basic, &rat(1, 2), 0, 3).is_err());
        let again = correlation_experiment(&mech, &basic, &rat(1, 2), 5, 3).unwrap();
        assert_eq!(report, again);
    }

    fn cpp_config(msg_bits: usize, trials: usize, seed: u64) -> TieConfig {
        let beta = rat(1, 10);
        let code = CodeSpec::repetition(msg_bits, 1, beta.clone()).unwrap();
        TieConfig {
            ell: 0,
            m0: 2 * msg_bits,
            level: 0,
            alpha: Rat::one(),
            beta: Some(beta),
            lambda: Rat::one(),
            omega: None,
            trials,
            seed,
            code: code.to_json_spec(),
        }
    }

    #[test]
    fn exact_public_project_extraction_succeeds_on_the_first_trial() {
        let bits = [true, false, true, true];
        let phi = Formula::pinned(&bits).unwrap();
        let config = cpp_config(4, 3, 11);
        let mech: MechanismHandle = Arc::new(CppMechanism { k: 4 });
        let report = run_tie_extraction(&phi, &mech, &config).unwrap();
        assert_eq!(report.verdict, Verdict::Sat { assignment: bits.to_vec() });
        assert_eq!(report.sweeps_run, 1);
        let other = run_tie_extraction(&phi, &mech, &cpp_config(4, 3, 99)).unwrap();
        assert_eq!(other.verdict, Verdict::Sat { assignment: bits.to_vec() });
        assert_eq!(other.sweeps_run, 1);
    }

    #[test]
    fn exact_public_project_extraction_never_fires_on_a_contradiction() {
        let phi = Formula::contradiction(4).unwrap();
        let config = cpp_config(4, 4, 2);
        let mech: MechanismHandle = Arc::new(CppMechanism { k: 4 });
        let report = run_tie_extraction(&phi, &mech, &config).unwrap();
        assert_eq!(report.verdict, Verdict::PresumedUnsat);
        assert!(report.trials.iter().all(|t| !t.hit && t.error.is_none()));
    }

    #[test]
    fn two_bidder_market_extraction_is_recorded_per_seed() {
        // Carrier of 8 items inside an 8-item market with one polar
        // rival; welfare optimization may or may not hand the special
        // bidder an unbalanced carrier bundle, so the verdict is golden
        // per seed rather than asserted.
        let bits = [true, false];
        let phi = Formula::pinned(&bits).unwrap();
        let beta = rat(1, 10);
        let code = CodeSpec::repetition(2, 2, beta.clone()).unwrap();
        let config = TieConfig {
            ell: 1,
            m0: 4,
            level: 0,
            alpha: Rat::one(),
            beta: Some(beta),
            lambda: rat(10, 1),
            omega: None,
            trials: 6,
            seed: 21,
            code: code.to_json_spec(),
        };
        let mech: MechanismHandle = Arc::new(VcgMechanism::default());
        let report = run_tie_extraction(&phi, &mech, &config).unwrap();
        if let Verdict::Sat { assignment } = &report.verdict {
            assert_eq!(assignment, &bits.to_vec());
        }
        assert!(report.trials.iter().all(|t| t.error.is_none()));
        let again = run_tie_extraction(&phi, &mech, &config).unwrap();
        assert_eq!(report.canonical_json(), again.canonical_json());
    }

    #[test]
    fn config_validation_rejects_mismatches() {
        let mut config = cpp_config(4, 2, 0);
        config.m0 = 3; // carrier of 8 cannot fit a 3-item market
        assert!(config.validate().is_err());
        let mut config = cpp_config(4, 2, 0);
        config.beta = Some(rat(1, 20));
        assert!(config.validate().is_err());
        let config = cpp_config(4, 2, 0);
        let phi3 = Formula::pinned(&[true, false, true]).unwrap();
        let mech: MechanismHandle = Arc::new(CppMechanism { k: 4 });
        assert!(run_tie_extraction(&phi3, &mech, &config).is_err());
    }
}
