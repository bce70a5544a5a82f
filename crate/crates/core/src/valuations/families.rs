//! The concrete set-function families.

use super::predicate::BundlePredicate;
use super::{check_ground, ValError, ValuationFn};
use crate::bundle::Bundle;
use crate::rational::{inv_pow, pos, rat_to_string, Rat};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

fn rusize(n: usize) -> Rat {
    Rat::from_integer(BigInt::from(n as u64))
}

/// Additive: `v(S) = sum of per_item[j] over j in S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditiveValuation {
    per_item: Vec<Rat>,
}

impl AdditiveValuation {
    pub fn new(per_item: Vec<Rat>) -> Result<Self, ValError> {
        if per_item.iter().any(|x| x.is_negative()) {
            return Err(ValError::BadParams("additive item values must be nonnegative".into()));
        }
        Ok(AdditiveValuation { per_item })
    }

    pub fn per_item(&self) -> &[Rat] {
        &self.per_item
    }

    pub fn item_value(&self, j: usize) -> &Rat {
        &self.per_item[j]
    }
}

impl ValuationFn for AdditiveValuation {
    fn m(&self) -> usize {
        self.per_item.len()
    }

    fn value(&self, s: Bundle) -> Result<Rat, ValError> {
        check_ground(s, self.m())?;
        Ok(s.iter().fold(Rat::zero(), |acc, j| acc + &self.per_item[j]))
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "family": "additive",
            "per_item": self.per_item.iter().map(rat_to_string).collect::<Vec<_>>(),
        })
    }

    fn additive_item_values(&self) -> Option<Vec<Rat>> {
        Some(self.per_item.clone())
    }
}

/// Polar additive: per-item value 1 on the high set `A`, `omega` off it,
/// so `v(S) = |S ∩ A| + omega * |S \ A|`.
///
/// The high set is kept as an index set rather than a bundle so the
/// sampler can be exercised at statistical scales; evaluation on
/// bundles still requires `m` within the bundle cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarAdditiveValuation {
    m: usize,
    high: BTreeSet<usize>,
    omega: Rat,
}

impl PolarAdditiveValuation {
    pub fn new(m: usize, high: BTreeSet<usize>, omega: Rat) -> Result<Self, ValError> {
        if let Some(&bad) = high.iter().find(|&&j| j >= m) {
            return Err(ValError::ItemOutOfRange { bundle: vec![bad], m });
        }
        if !omega.is_positive() {
            return Err(ValError::BadParams("omega must be positive".into()));
        }
        Ok(PolarAdditiveValuation { m, high, omega })
    }

    /// The standard polar form with `omega = 1/m^3`.
    pub fn polar(m: usize, high: BTreeSet<usize>) -> Result<Self, ValError> {
        let omega = inv_pow(m, 3);
        PolarAdditiveValuation::new(m, high, omega)
    }

    pub fn high_set(&self) -> &BTreeSet<usize> {
        &self.high
    }

    pub fn omega(&self) -> &Rat {
        &self.omega
    }

    pub fn item_value(&self, j: usize) -> Rat {
        if self.high.contains(&j) {
            Rat::one()
        } else {
            self.omega.clone()
        }
    }
}

impl ValuationFn for PolarAdditiveValuation {
    fn m(&self) -> usize {
        self.m
    }

    fn value(&self, s: Bundle) -> Result<Rat, ValError> {
        check_ground(s, self.m)?;
        let in_a = s.iter().filter(|j| self.high.contains(j)).count();
        let off_a = s.len() - in_a;
        Ok(rusize(in_a) + &self.omega * rusize(off_a))
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "family": "polar_additive",
            "m": self.m,
            "high_set": self.high.iter().copied().collect::<Vec<_>>(),
            "omega": rat_to_string(&self.omega),
        })
    }

    fn additive_item_values(&self) -> Option<Vec<Rat>> {
        Some((0..self.m).map(|j| self.item_value(j)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarVariant {
    /// Each item is high independently with probability `1/n`.
    Bernoulli,
    /// The high set is uniform among sets of size exactly `m/n`.
    ExactSize,
}

/// Draws a random polar additive valuation with `omega = 1/m^3`.
pub fn sample_random_polar(
    m: usize,
    n: usize,
    variant: PolarVariant,
    seed: u64,
) -> Result<PolarAdditiveValuation, ValError> {
    if m == 0 || n == 0 {
        return Err(ValError::BadParams("m and n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let high: BTreeSet<usize> = match variant {
        PolarVariant::Bernoulli => {
            (0..m).filter(|_| rng.gen_range(0..n) == 0).collect()
        }
        PolarVariant::ExactSize => {
            if !m.is_multiple_of(n) {
                return Err(ValError::BadParams(format!(
                    "exact-size variant needs n | m, got m={m}, n={n}"
                )));
            }
            rand::seq::index::sample(&mut rng, m, m / n).into_iter().collect()
        }
    };
    PolarAdditiveValuation::new(m, high, inv_pow(m, 3))
}

/// Bonus valuation, parameterized by a scale `t`, a target size `k`, a
/// monotone predicate `P`, and an arbitrary predicate `B`:
///
/// * `|S| < k`: `|S| * t`
/// * `|S| >= k`, `P(S) = 0`: `(k - 1/2^|S|) * t`
/// * `|S| = k`, `P(S) = 1`, `B(S) = 0`: `k*t - 1/m^4`
/// * `|S| = k`, `P(S) = 1`, `B(S) = 1`: `k*t`
/// * `|S| > k`, `P(S) = 1`: `k*t`
///
/// Monotone and submodular for any `B` as long as `P` is monotone.
pub struct BonusValuation {
    m: usize,
    t: Rat,
    k: usize,
    p: Arc<dyn BundlePredicate>,
    b: Arc<dyn BundlePredicate>,
    p_checked: bool,
    p_memo: Mutex<HashMap<u64, bool>>,
    b_memo: Mutex<HashMap<u64, bool>>,
}

/// Ground sets up to this size get the eager P-monotonicity validation.
pub const P_VALIDATION_CAP: usize = 14;

impl BonusValuation {
    /// Validates that `P` is monotone (exhaustively, for `m` up to
    /// [`P_VALIDATION_CAP`]) and constructs the valuation. Larger
    /// ground sets skip the check; [`BonusValuation::p_checked`]
    /// reports which happened.
    pub fn new(
        m: usize,
        t: Rat,
        k: usize,
        p: Arc<dyn BundlePredicate>,
        b: Arc<dyn BundlePredicate>,
    ) -> Result<Self, ValError> {
        let p_checked = m <= P_VALIDATION_CAP;
        if p_checked && !p.is_monotone(m)? {
            return Err(ValError::BadParams(
                "bonus valuation requires a monotone P predicate".into(),
            ));
        }
        Self::build(m, t, k, p, b, p_checked)
    }

    /// Skips the P-monotonicity validation. Negative-control fixtures
    /// only; a non-monotone `P` breaks the valuation's invariants.
    pub fn new_unchecked(
        m: usize,
        t: Rat,
        k: usize,
        p: Arc<dyn BundlePredicate>,
        b: Arc<dyn BundlePredicate>,
    ) -> Result<Self, ValError> {
        Self::build(m, t, k, p, b, false)
    }

    fn build(
        m: usize,
        t: Rat,
        k: usize,
        p: Arc<dyn BundlePredicate>,
        b: Arc<dyn BundlePredicate>,
        p_checked: bool,
    ) -> Result<Self, ValError> {
        if !t.is_positive() {
            return Err(ValError::BadParams("t must be positive".into()));
        }
        if k == 0 || k > m {
            return Err(ValError::BadParams(format!("k must lie in [1, m], got k={k}, m={m}")));
        }
        Ok(BonusValuation {
            m,
            t,
            k,
            p,
            b,
            p_checked,
            p_memo: Mutex::new(HashMap::new()),
            b_memo: Mutex::new(HashMap::new()),
        })
    }

    /// The paper-faithful scale `t = 2^(2m)`.
    pub fn paper_t(m: usize) -> Rat {
        Rat::from_integer(BigInt::from(2)).pow(2 * m as i32)
    }

    /// The smallest integer scale preserving every strict utility gap
    /// the downstream claims rely on (`t > m * 2^m`).
    pub fn scaled_t(m: usize) -> Rat {
        Rat::from_integer(BigInt::from(m as u64) * (BigInt::one() << m) + BigInt::one())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> &Rat {
        &self.t
    }

    /// Whether P-monotonicity was actually validated at construction.
    pub fn p_checked(&self) -> bool {
        self.p_checked
    }

    fn eval_p(&self, s: Bundle) -> Result<bool, ValError> {
        if let Some(&hit) = self.p_memo.lock().unwrap().get(&s.0) {
            return Ok(hit);
        }
        let out = self.p.eval(s)?;
        self.p_memo.lock().unwrap().insert(s.0, out);
        Ok(out)
    }

    fn eval_b(&self, s: Bundle) -> Result<bool, ValError> {
        if let Some(&hit) = self.b_memo.lock().unwrap().get(&s.0) {
            return Ok(hit);
        }
        let out = self.b.eval(s)?;
        self.b_memo.lock().unwrap().insert(s.0, out);
        Ok(out)
    }
}

impl ValuationFn for BonusValuation {
    fn m(&self) -> usize {
        self.m
    }

    fn value(&self, s: Bundle) -> Result<Rat, ValError> {
        check_ground(s, self.m)?;
        let size = s.len();
        let kt = rusize(self.k) * &self.t;
        if size < self.k {
            return Ok(rusize(size) * &self.t);
        }
        if !self.eval_p(s)? {
            // (k - 1/2^|S|) * t
            let half_pow = Rat::new(BigInt::one(), BigInt::one() << size);
            return Ok((rusize(self.k) - half_pow) * &self.t);
        }
        if size == self.k {
            if self.eval_b(s)? {
                Ok(kt)
            } else {
                Ok(kt - inv_pow(self.m, 4))
            }
        } else {
            Ok(kt)
        }
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "family": "bonus",
            "m": self.m,
            "t": rat_to_string(&self.t),
            "k": self.k,
            "p": self.p.describe(),
            "b": self.b.describe(),
        })
    }
}

/// The two-peak profile function. `x` and `y` must lie in `[0,1]`;
/// `alpha`, `beta` must be positive.
pub fn psi_tilde(x: &Rat, y: &Rat, alpha: &Rat, beta: &Rat) -> Result<Rat, ValError> {
    for (name, v) in [("x", x), ("y", y)] {
        if v.is_negative() || v > &Rat::one() {
            return Err(ValError::BadParams(format!("{name} must lie in [0,1], got {}", rat_to_string(v))));
        }
    }
    if !alpha.is_positive() || !beta.is_positive() {
        return Err(ValError::BadParams("alpha and beta must be positive".into()));
    }
    let two_alpha = rint(2) * alpha;
    let diff = x - y;
    let value = if diff.abs() <= *beta {
        let arg = Rat::one() - (x + y) / &two_alpha;
        let clamped = pos(&arg);
        Rat::one() - &clamped * &clamped
    } else if diff.is_positive() {
        let left = pos(&(Rat::one() - (rint(2) * x - beta) / &two_alpha));
        let right = pos(&(Rat::one() - (rint(2) * y + beta) / &two_alpha));
        Rat::one() - left * right
    } else {
        let left = pos(&(Rat::one() - (rint(2) * y - beta) / &two_alpha));
        let right = pos(&(Rat::one() - (rint(2) * x + beta) / &two_alpha));
        Rat::one() - left * right
    };
    debug_assert!(!value.is_negative() && value <= Rat::one());
    Ok(value)
}

/// Double-peak valuation over disjoint equal-cardinality `A`, `B`:
/// `v(S) = psi_tilde(|S∩A|/|A|, |S∩B|/|B|)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoublePeakValuation {
    m: usize,
    a: Bundle,
    b: Bundle,
    alpha: Rat,
    beta: Rat,
}

impl DoublePeakValuation {
    pub fn new(m: usize, a: Bundle, b: Bundle, alpha: Rat, beta: Rat) -> Result<Self, ValError> {
        check_ground(a, m)?;
        check_ground(b, m)?;
        if !a.intersection(b).is_empty() {
            return Err(ValError::BadParams("peak sets must be disjoint".into()));
        }
        if a.len() != b.len() || a.is_empty() {
            return Err(ValError::BadParams("peak sets must be nonempty and of equal cardinality".into()));
        }
        if !alpha.is_positive() || !beta.is_positive() {
            return Err(ValError::BadParams("alpha and beta must be positive".into()));
        }
        Ok(DoublePeakValuation { m, a, b, alpha, beta })
    }

    pub fn peaks(&self) -> (Bundle, Bundle) {
        (self.a, self.b)
    }
}

impl ValuationFn for DoublePeakValuation {
    fn m(&self) -> usize {
        self.m
    }

    fn value(&self, s: Bundle) -> Result<Rat, ValError> {
        check_ground(s, self.m)?;
        let x = Rat::new(BigInt::from(s.intersection(self.a).len() as u64), BigInt::from(self.a.len() as u64));
        let y = Rat::new(BigInt::from(s.intersection(self.b).len() as u64), BigInt::from(self.b.len() as u64));
        psi_tilde(&x, &y, &self.alpha, &self.beta)
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "family": "double_peak",
            "m": self.m,
            "a": self.a.to_vec(),
            "b": self.b.to_vec(),
            "alpha": rat_to_string(&self.alpha),
            "beta": rat_to_string(&self.beta),
        })
    }
}

/// Symmetrized double-peak: depends only on `|S ∩ C|`,
/// `v(S) = 1 - (1 - |S∩C| / (alpha * |C|))_+^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricDoublePeak {
    m: usize,
    c: Bundle,
    alpha: Rat,
}

impl SymmetricDoublePeak {
    pub fn new(m: usize, c: Bundle, alpha: Rat) -> Result<Self, ValError> {
        check_ground(c, m)?;
        if c.is_empty() {
            return Err(ValError::BadParams("C must be nonempty".into()));
        }
        if !alpha.is_positive() {
            return Err(ValError::BadParams("alpha must be positive".into()));
        }
        Ok(SymmetricDoublePeak { m, c, alpha })
    }

    pub fn c(&self) -> Bundle {
        self.c
    }
}

impl ValuationFn for SymmetricDoublePeak {
    fn m(&self) -> usize {
        self.m
    }

    fn value(&self, s: Bundle) -> Result<Rat, ValError> {
        check_ground(s, self.m)?;
        let ratio = Rat::new(
            BigInt::from(s.intersection(self.c).len() as u64),
            BigInt::from(self.c.len() as u64),
        ) / &self.alpha;
        let clamped = pos(&(Rat::one() - ratio));
        Ok(Rat::one() - &clamped * &clamped)
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "family": "symmetric_double_peak",
            "m": self.m,
            "c": self.c.to_vec(),
            "alpha": rat_to_string(&self.alpha),
        })
    }
}

/// Coverage valuation: item `e` covers `S_e ⊆ U`;
/// `v(T) = scale * |union of S_e over e in T|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageValuation {
    universe_size: usize,
    item_sets: Vec<BTreeSet<usize>>,
    scale: Rat,
    masks: Vec<u128>,
}

impl CoverageValuation {
    pub fn new(
        universe_size: usize,
        item_sets: Vec<BTreeSet<usize>>,
        scale: Rat,
    ) -> Result<Self, ValError> {
        if universe_size > 128 {
            return Err(ValError::BadParams("universe size above 128 unsupported".into()));
        }
        if scale.is_negative() {
            return Err(ValError::BadParams("scale must be nonnegative".into()));
        }
        let mut masks = Vec::with_capacity(item_sets.len());
        for set in &item_sets {
            let mut mask = 0u128;
            for &e in set {
                if e >= universe_size {
                    return Err(ValError::BadParams(format!(
                        "universe element {e} out of range [0, {universe_size})"
                    )));
                }
                mask |= 1 << e;
            }
            masks.push(mask);
        }
        Ok(CoverageValuation { universe_size, item_sets, scale, masks })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn item_sets(&self) -> &[BTreeSet<usize>] {
        &self.item_sets
    }

    pub fn scale(&self) -> &Rat {
        &self.scale
    }

    /// Number of universe elements covered by the bundle (unscaled).
    pub fn covered(&self, t: Bundle) -> Result<usize, ValError> {
        check_ground(t, self.m())?;
        let mask = t.iter().fold(0u128, |acc, e| acc | self.masks[e]);
        Ok(mask.count_ones() as usize)
    }
}

impl ValuationFn for CoverageValuation {
    fn m(&self) -> usize {
        self.item_sets.len()
    }

    fn value(&self, t: Bundle) -> Result<Rat, ValError> {
        Ok(&self.scale * rusize(self.covered(t)?))
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "family": "coverage",
            "universe_size": self.universe_size,
            "item_sets": self.item_sets.iter().map(|s| s.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "scale": rat_to_string(&self.scale),
        })
    }
}

/// `lambda * v` for a positive rational `lambda`.
pub struct ScaledValuation {
    inner: Arc<dyn ValuationFn>,
    lambda: Rat,
}

impl ScaledValuation {
    pub fn new(inner: Arc<dyn ValuationFn>, lambda: Rat) -> Result<Self, ValError> {
        if !lambda.is_positive() {
            return Err(ValError::BadParams("lambda must be positive".into()));
        }
        Ok(ScaledValuation { inner, lambda })
    }

    pub fn lambda(&self) -> &Rat {
        &self.lambda
    }
}

impl ValuationFn for ScaledValuation {
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn value(&self, s: Bundle) -> Result<Rat, ValError> {
        Ok(&self.lambda * self.inner.value(s)?)
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "family": "scaled",
            "lambda": rat_to_string(&self.lambda),
            "inner": self.inner.describe(),
        })
    }

    fn additive_item_values(&self) -> Option<Vec<Rat>> {
        let inner = self.inner.additive_item_values()?;
        Some(inner.into_iter().map(|w| w * &self.lambda).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::predicate::{ConstPredicate, TruthTablePredicate};
    use super::*;
    use crate::rational::rat;

    fn bset(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    // === Polar additive ===

    #[test]
    fn polar_empty_set_is_zero() {
        let v = PolarAdditiveValuation::new(4, bset(&[0, 1]), rat(1, 8)).unwrap();
        assert_eq!(v.value(Bundle::EMPTY).unwrap(), Rat::zero());
    }

    #[test]
    fn polar_mixed_bundle() {
        let v = PolarAdditiveValuation::new(4, bset(&[0, 1]), rat(1, 8)).unwrap();
        assert_eq!(v.value(Bundle::from_indices([0, 2])).unwrap(), rat(9, 8));
    }

    #[test]
    fn polar_full_bundle() {
        let v = PolarAdditiveValuation::new(4, bset(&[0, 1]), rat(1, 8)).unwrap();
        assert_eq!(v.value(Bundle::full(4)).unwrap(), rat(9, 4));
    }

    #[test]
    fn polar_rejects_out_of_range_high_item() {
        assert!(PolarAdditiveValuation::new(3, bset(&[5]), rat(1, 27)).is_err());
    }

    #[test]
    fn polar_form_uses_cubed_low_value() {
        let v = PolarAdditiveValuation::polar(8, bset(&[0])).unwrap();
        assert_eq!(v.omega(), &rat(1, 512));
    }

    #[test]
    fn additive_out_of_range_bundle_is_error() {
        let v = AdditiveValuation::new(vec![rat(3, 1), rat(4, 1)]).unwrap();
        assert!(matches!(
            v.value(Bundle::from_indices([2])),
            Err(ValError::ItemOutOfRange { .. })
        ));
    }

    // === Bonus ===

    fn bonus_m3(p: Arc<dyn BundlePredicate>, b: Arc<dyn BundlePredicate>) -> BonusValuation {
        BonusValuation::new(3, BonusValuation::paper_t(3), 2, p, b).unwrap()
    }

    #[test]
    fn bonus_below_k_is_linear() {
        let v = bonus_m3(Arc::new(ConstPredicate(true)), Arc::new(ConstPredicate(true)));
        assert_eq!(v.value(Bundle::from_indices([0])).unwrap(), rint(64));
        assert_eq!(v.value(Bundle::EMPTY).unwrap(), Rat::zero());
    }

    #[test]
    fn bonus_p_zero_case() {
        let v = bonus_m3(Arc::new(ConstPredicate(false)), Arc::new(ConstPredicate(true)));
        assert_eq!(v.value(Bundle::from_indices([0, 1, 2])).unwrap(), rint(120));
    }

    #[test]
    fn bonus_at_k_without_b() {
        let v = bonus_m3(Arc::new(ConstPredicate(true)), Arc::new(ConstPredicate(false)));
        assert_eq!(
            v.value(Bundle::from_indices([0, 1])).unwrap(),
            rint(128) - rat(1, 81)
        );
    }

    #[test]
    fn bonus_at_k_with_b_and_above_k() {
        let v = bonus_m3(Arc::new(ConstPredicate(true)), Arc::new(ConstPredicate(true)));
        assert_eq!(v.value(Bundle::from_indices([0, 1])).unwrap(), rint(128));
        assert_eq!(v.value(Bundle::from_indices([0, 1, 2])).unwrap(), rint(128));
    }

    #[test]
    fn bonus_b_gap_is_exactly_inverse_fourth_power() {
        let with_b = bonus_m3(Arc::new(ConstPredicate(true)), Arc::new(ConstPredicate(true)));
        let without_b = bonus_m3(Arc::new(ConstPredicate(true)), Arc::new(ConstPredicate(false)));
        let s = Bundle::from_indices([0, 1]);
        assert_eq!(
            with_b.value(s).unwrap() - without_b.value(s).unwrap(),
            inv_pow(3, 4)
        );
    }

    #[test]
    fn bonus_rejects_non_monotone_p() {
        let table: Vec<bool> = (0..8u64).map(|mask| mask == 1).collect();
        let p = Arc::new(TruthTablePredicate::new(3, table).unwrap());
        let err = BonusValuation::new(
            3,
            BonusValuation::paper_t(3),
            2,
            p.clone(),
            Arc::new(ConstPredicate(true)),
        );
        assert!(err.is_err());
        // The unchecked escape hatch exists for negative controls.
        assert!(BonusValuation::new_unchecked(
            3,
            BonusValuation::paper_t(3),
            2,
            p,
            Arc::new(ConstPredicate(true)),
        )
        .is_ok());
    }

    #[test]
    fn bonus_scaled_t_preserves_gap_bound() {
        // t > m * 2^m must hold for the scaled variant.
        for m in 1..=12usize {
            let t = BonusValuation::scaled_t(m);
            assert!(t > rusize(m) * Rat::from_integer(BigInt::one() << m));
        }
    }

    // === psi_tilde ===

    #[test]
    fn psi_zero_at_origin() {
        assert_eq!(
            psi_tilde(&Rat::zero(), &Rat::zero(), &rint(1), &rat(1, 10)).unwrap(),
            Rat::zero()
        );
    }

    #[test]
    fn psi_unbalanced_peak() {
        assert_eq!(
            psi_tilde(&Rat::one(), &Rat::zero(), &rint(1), &rat(1, 10)).unwrap(),
            rat(381, 400)
        );
    }

    #[test]
    fn psi_balanced_midpoint() {
        assert_eq!(
            psi_tilde(&rat(1, 2), &rat(1, 2), &rint(1), &rat(1, 10)).unwrap(),
            rat(3, 4)
        );
    }

    #[test]
    fn psi_is_symmetric_on_grid() {
        let alpha_grid = [rat(1, 4), rat(1, 2), rint(1)];
        let beta_grid = [rat(1, 20), rat(1, 10), rat(1, 4)];
        for alpha in &alpha_grid {
            for beta in &beta_grid {
                for xi in 0..=4 {
                    for yi in 0..=4 {
                        let x = rat(xi, 4);
                        let y = rat(yi, 4);
                        assert_eq!(
                            psi_tilde(&x, &y, alpha, beta).unwrap(),
                            psi_tilde(&y, &x, alpha, beta).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn psi_rejects_out_of_domain() {
        assert!(psi_tilde(&rat(3, 2), &Rat::zero(), &rint(1), &rat(1, 10)).is_err());
        assert!(psi_tilde(&Rat::zero(), &Rat::zero(), &Rat::zero(), &rat(1, 10)).is_err());
    }

    // === Double peak ===

    fn dp() -> DoublePeakValuation {
        DoublePeakValuation::new(
            4,
            Bundle::from_indices([0, 1]),
            Bundle::from_indices([2, 3]),
            rint(1),
            rat(1, 10),
        )
        .unwrap()
    }

    #[test]
    fn double_peak_empty_is_zero() {
        assert_eq!(dp().value(Bundle::EMPTY).unwrap(), Rat::zero());
    }

    #[test]
    fn double_peak_at_peak() {
        assert_eq!(dp().value(Bundle::from_indices([0, 1])).unwrap(), rat(381, 400));
    }

    #[test]
    fn double_peak_balanced() {
        assert_eq!(dp().value(Bundle::from_indices([0, 2])).unwrap(), rat(3, 4));
    }

    #[test]
    fn double_peak_rejects_overlap_and_size_mismatch() {
        assert!(DoublePeakValuation::new(
            4,
            Bundle::from_indices([0, 1]),
            Bundle::from_indices([1, 2]),
            rint(1),
            rat(1, 10)
        )
        .is_err());
        assert!(DoublePeakValuation::new(
            4,
            Bundle::from_indices([0]),
            Bundle::from_indices([2, 3]),
            rint(1),
            rat(1, 10)
        )
        .is_err());
    }

    // === Symmetric double peak ===

    #[test]
    fn symmetric_examples() {
        let v = SymmetricDoublePeak::new(6, Bundle::from_indices([0, 1, 2, 3]), rint(1)).unwrap();
        assert_eq!(v.value(Bundle::from_indices([4, 5])).unwrap(), Rat::zero());
        assert_eq!(v.value(Bundle::from_indices([0, 1])).unwrap(), rat(3, 4));

        let v = SymmetricDoublePeak::new(6, Bundle::from_indices([0, 1, 2, 3]), rat(1, 2)).unwrap();
        assert_eq!(v.value(Bundle::from_indices([0, 1])).unwrap(), Rat::one());
    }

    // === Coverage ===

    #[test]
    fn coverage_examples() {
        let v = CoverageValuation::new(4, vec![bset(&[1, 2]), bset(&[2, 3])], Rat::one()).unwrap();
        assert_eq!(v.value(Bundle::EMPTY).unwrap(), Rat::zero());
        assert_eq!(v.value(Bundle::from_indices([0, 1])).unwrap(), rint(3));

        let half = CoverageValuation::new(4, vec![bset(&[1, 2]), bset(&[2, 3])], rat(1, 2)).unwrap();
        assert_eq!(half.value(Bundle::from_indices([0, 1])).unwrap(), rat(3, 2));
    }

    #[test]
    fn coverage_rejects_bad_universe_elements() {
        assert!(CoverageValuation::new(2, vec![bset(&[2])], Rat::one()).is_err());
    }

    // === Sampler ===

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_random_polar(16, 2, PolarVariant::Bernoulli, 99).unwrap();
        let b = sample_random_polar(16, 2, PolarVariant::Bernoulli, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_random_polar(16, 2, PolarVariant::Bernoulli, 100).unwrap();
        // Different seeds almost surely differ; this seed pair does.
        assert_ne!(a, c);
    }

    #[test]
    fn sampler_exact_size_variant() {
        for seed in 0..20 {
            let v = sample_random_polar(8, 2, PolarVariant::ExactSize, seed).unwrap();
            assert_eq!(v.high_set().len(), 4);
        }
        assert!(sample_random_polar(9, 2, PolarVariant::ExactSize, 0).is_err());
    }

    #[test]
    fn sampler_bernoulli_concentration() {
        // Binomial(m, 1/n): |fraction - 1/n| within 5 standard
        // deviations. m here is statistical scale, never evaluated on
        // bundles.
        let m = 10_000usize;
        let n = 4usize;
        let v = sample_random_polar(m, n, PolarVariant::Bernoulli, 7).unwrap();
        let frac = v.high_set().len() as f64 / m as f64;
        let sigma = (0.25 * 0.75 / m as f64).sqrt();
        assert!((frac - 0.25).abs() <= 5.0 * sigma, "fraction {frac}");
    }

    // === Scaled wrapper ===

    #[test]
    fn scaled_valuation_multiplies() {
        let inner = Arc::new(dp());
        let v = ScaledValuation::new(inner, rat(3, 2)).unwrap();
        assert_eq!(
            v.value(Bundle::from_indices([0, 1])).unwrap(),
            rat(3, 2) * rat(381, 400)
        );
        assert!(ScaledValuation::new(Arc::new(dp()), Rat::zero()).is_err());
    }
}
