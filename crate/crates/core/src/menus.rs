//! Menu instrumentation for truthful mechanisms.
//!
//! A truthful mechanism fixes, for each bidder and each profile of the
//! other bidders' reports, a priced menu of bundles; the bidder's report
//! only selects a utility-maximizing entry. This module computes those
//! menus in closed form for the reference mechanisms, filters them into
//! structured submenus (a size class inside a narrow price window whose
//! strict supersets are all markedly more expensive), and probes the
//! same candidacy property through nothing but black-box runs. The
//! probe is the piece the reductions consume; the closed-form path
//! exists so the probe can be checked against ground truth.

use crate::bundle::Bundle;
use crate::mechanisms::{
    optimal_welfare_table, Instance, Mechanism, MechError, MenuSupport,
};
use crate::rational::{inv_pow, rat_to_string, serde_rat, Rat};
use crate::valuations::{AdditiveValuation, PolarAdditiveValuation, ValError, ValuationHandle};
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MenuError {
    #[error("{0} has no closed-form menu; use probe_candidate")]
    Unsupported(&'static str),
    #[error("instance exceeds an exhaustive cap: {0}")]
    CapExceeded(String),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Mechanism(#[from] MechError),
    #[error(transparent)]
    Valuation(#[from] ValError),
}

/// The price of a bundle on (or off) a menu. Off-menu bundles inherit
/// the cheapest strictly larger on-menu bundle's price, infinite when
/// no such bundle exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MenuPrice {
    Finite(Rat),
    Infinite,
}

impl MenuPrice {
    pub fn as_finite(&self) -> Option<&Rat> {
        match self {
            MenuPrice::Finite(p) => Some(p),
            MenuPrice::Infinite => None,
        }
    }
}

impl PartialOrd for MenuPrice {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MenuPrice {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use MenuPrice::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.cmp(b),
            (Finite(_), Infinite) => std::cmp::Ordering::Less,
            (Infinite, Finite(_)) => std::cmp::Ordering::Greater,
            (Infinite, Infinite) => std::cmp::Ordering::Equal,
        }
    }
}

impl std::fmt::Display for MenuPrice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MenuPrice::Finite(p) => write!(f, "{}", rat_to_string(p)),
            MenuPrice::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for MenuPrice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MenuPrice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        if raw == "inf" {
            return Ok(MenuPrice::Infinite);
        }
        crate::rational::rat_from_str(&raw)
            .map(MenuPrice::Finite)
            .map_err(serde::de::Error::custom)
    }
}

/// Parameters of a structured submenu query: the size class `k`, the
/// price level `p`, and the three tolerance constants.
///
/// * `eps_window`: the price window is `(p - eps_window, p]`;
/// * `eps_gap`: every strict on-menu superset must cost at least
///   `eps_gap` more than the member;
/// * `eps_probe`: magnitude of the single-item perturbations the
///   black-box probe uses to test the superset gap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmenuParams {
    pub k: usize,
    #[serde(with = "serde_rat")]
    pub p: Rat,
    #[serde(with = "serde_rat")]
    pub eps_window: Rat,
    #[serde(with = "serde_rat")]
    pub eps_gap: Rat,
    #[serde(with = "serde_rat")]
    pub eps_probe: Rat,
}

impl SubmenuParams {
    /// Defaults for an `m`-item market: window `1/m^5`, gap `1/m^3`,
    /// probe perturbation `1/m^6`.
    pub fn new(k: usize, p: Rat, m: usize) -> Result<Self, MenuError> {
        if m == 0 {
            return Err(MenuError::BadParams("empty ground set".into()));
        }
        let params = SubmenuParams {
            k,
            p,
            eps_window: inv_pow(m, 5),
            eps_gap: inv_pow(m, 3),
            eps_probe: inv_pow(m, 6),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_epsilons(
        k: usize,
        p: Rat,
        eps_window: Rat,
        eps_gap: Rat,
        eps_probe: Rat,
    ) -> Result<Self, MenuError> {
        let params = SubmenuParams { k, p, eps_window, eps_gap, eps_probe };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), MenuError> {
        if self.p < Rat::zero() {
            return Err(MenuError::BadParams("price level must be nonnegative".into()));
        }
        for (name, eps) in
            [("eps_window", &self.eps_window), ("eps_gap", &self.eps_gap), ("eps_probe", &self.eps_probe)]
        {
            if eps <= &Rat::zero() {
                return Err(MenuError::BadParams(format!("{name} must be strictly positive")));
            }
        }
        if self.eps_probe > self.eps_window || self.eps_window > self.eps_gap {
            return Err(MenuError::BadParams(
                "tolerances must satisfy eps_probe <= eps_window <= eps_gap".into(),
            ));
        }
        Ok(())
    }
}

/// A closed-form menu: membership and (extended) prices for every
/// bundle. On-menu bundles always have finite prices.
pub trait MenuOracle: Send + Sync {
    fn m(&self) -> usize;
    fn on_menu(&self, s: Bundle) -> bool;
    fn price(&self, s: Bundle) -> MenuPrice;
}

/// The exact-VCG menu against fixed other-bidder valuations.
///
/// Every bundle is obtainable: reporting a large additive valuation
/// supported exactly on `S` wins all of `S`, and the tie-break hands
/// items the bidder values at zero to the others or leaves them
/// unallocated. The price is the externality of removing `S` from the
/// others' market, which one dynamic-programming sweep yields for all
/// bundles at once.
pub struct VcgMenu {
    m: usize,
    others_optimum: Vec<Rat>,
}

impl VcgMenu {
    pub fn build(others: &[ValuationHandle], m: usize) -> Result<Self, MenuError> {
        let others_optimum = optimal_welfare_table(others, m)?;
        Ok(VcgMenu { m, others_optimum })
    }

    fn price_rat(&self, s: Bundle) -> Rat {
        let full = Bundle::full(self.m);
        &self.others_optimum[full.0 as usize]
            - &self.others_optimum[full.difference(s).0 as usize]
    }
}

impl MenuOracle for VcgMenu {
    fn m(&self) -> usize {
        self.m
    }

    fn on_menu(&self, _s: Bundle) -> bool {
        true
    }

    fn price(&self, s: Bundle) -> MenuPrice {
        MenuPrice::Finite(self.price_rat(s))
    }
}

/// The menu a dictatorship induces. The beneficiary's menu is the full
/// set at price zero (so the extension prices every bundle at zero);
/// everyone else's menu is the empty bundle at price zero, every other
/// bundle being unobtainable at any price.
pub struct DictatorMenu {
    m: usize,
    owner_is_beneficiary: bool,
}

impl DictatorMenu {
    pub fn new(m: usize, owner_is_beneficiary: bool) -> Self {
        DictatorMenu { m, owner_is_beneficiary }
    }
}

impl MenuOracle for DictatorMenu {
    fn m(&self) -> usize {
        self.m
    }

    fn on_menu(&self, s: Bundle) -> bool {
        if self.owner_is_beneficiary {
            s == Bundle::full(self.m)
        } else {
            s.is_empty()
        }
    }

    fn price(&self, s: Bundle) -> MenuPrice {
        if self.owner_is_beneficiary || s.is_empty() {
            MenuPrice::Finite(Rat::zero())
        } else {
            MenuPrice::Infinite
        }
    }
}

/// The closed-form menu of a reference mechanism for the bidder at
/// `special_position`, against the listed other bidders. Black boxes
/// have no closed form and must be probed instead.
pub fn menu_oracle(
    mech: &dyn Mechanism,
    others: &[ValuationHandle],
    m: usize,
    special_position: usize,
) -> Result<Box<dyn MenuOracle>, MenuError> {
    match mech.menu_support() {
        MenuSupport::Vcg => Ok(Box::new(VcgMenu::build(others, m)?)),
        MenuSupport::DictatorTo(t) => {
            Ok(Box::new(DictatorMenu::new(m, t == special_position)))
        }
        MenuSupport::None => Err(MenuError::Unsupported(mech.name())),
    }
}

/// Convenience single query; build the oracle directly when querying
/// many bundles.
pub fn menu_price(
    mech: &dyn Mechanism,
    others: &[ValuationHandle],
    m: usize,
    special_position: usize,
    s: Bundle,
) -> Result<MenuPrice, MenuError> {
    Ok(menu_oracle(mech, others, m, special_position)?.price(s))
}

/// Exhaustive-enumeration cap for structured submenus.
pub const SUBMENU_M_CAP: usize = 10;

/// All bundles of a structured submenu: on the menu, exactly size `k`,
/// price inside `(p - eps_window, p]`, and every strict on-menu
/// superset at least `eps_gap` more expensive. Exhaustive and exact;
/// results in ascending mask order.
pub fn enumerate_structured_submenu(
    oracle: &dyn MenuOracle,
    params: &SubmenuParams,
) -> Result<Vec<Bundle>, MenuError> {
    params.validate()?;
    let m = oracle.m();
    if m > SUBMENU_M_CAP {
        return Err(MenuError::CapExceeded(format!(
            "m = {m} exceeds the submenu enumeration cap {SUBMENU_M_CAP}"
        )));
    }
    if params.k > m {
        return Err(MenuError::BadParams(format!("k = {} exceeds m = {m}", params.k)));
    }
    let window_floor = &params.p - &params.eps_window;
    let mut out = Vec::new();
    'candidates: for s in Bundle::subsets_of_size(m, params.k) {
        if !oracle.on_menu(s) {
            continue;
        }
        let price = match oracle.price(s) {
            MenuPrice::Finite(p) => p,
            MenuPrice::Infinite => continue,
        };
        if price <= window_floor || price > params.p {
            continue;
        }
        for t in s.strict_supersets(m) {
            if !oracle.on_menu(t) {
                continue;
            }
            match oracle.price(t) {
                MenuPrice::Infinite => {}
                MenuPrice::Finite(pt) => {
                    if pt - &price < params.eps_gap {
                        continue 'candidates;
                    }
                }
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// One black-box mechanism invocation inside a probe, replayable from
/// the recorded report and seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeStep {
    pub label: String,
    pub report: serde_json::Value,
    pub seed: u64,
    pub returned: Bundle,
    #[serde(with = "serde_rat")]
    pub payment: Rat,
}

/// Outcome of a candidacy probe. `is_candidate` answers the size-`k`
/// submenu question; `price_exceeds_p` is the oversized-bundle
/// threshold answer; the transcript lists every mechanism call made.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidacyVerdict {
    pub s: Bundle,
    pub k: usize,
    #[serde(with = "serde_rat")]
    pub p: Rat,
    pub is_candidate: bool,
    pub observed_price: Option<MenuPrice>,
    pub price_exceeds_p: Option<bool>,
    pub transcript: Vec<ProbeStep>,
}

impl CandidacyVerdict {
    /// The level indicator the reductions consume: candidacy at size
    /// exactly `k`, the price-threshold answer above `k`, and never
    /// below `k`.
    pub fn indicator(&self) -> bool {
        match self.s.len().cmp(&self.k) {
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.is_candidate,
            std::cmp::Ordering::Greater => self.price_exceeds_p.unwrap_or(false),
        }
    }

    /// One JSON object per line, one line per mechanism call.
    pub fn transcript_json_lines(&self) -> String {
        let mut out = String::new();
        for step in &self.transcript {
            out.push_str(&serde_json::to_string(step).expect("probe steps serialize"));
            out.push('\n');
        }
        out
    }
}

/// Decides structured-submenu candidacy of `s` through black-box runs
/// alone.
///
/// The base report is additive with value `2p` on each item of `s` and
/// zero elsewhere, so a truthful mechanism returns `s` itself whenever
/// `s` sits on the menu within the price window and clears its superset
/// gaps. For `|s| = k` the verdict then requires `m - k` follow-up
/// runs, each adding `eps_probe` on one outside item, to keep returning
/// exactly `s`: a superset closer than the perturbation would lure the
/// bidder away and is thereby detected. For `|s| > k` the base run
/// instead decides whether the menu price of `s` exceeds `p`: directly
/// when `s` comes back; by inference when part of `s` is withheld
/// (value `2p` per item was declined, so the price tops `2p|s| - ...`,
/// in particular `p`); and by price transfer when a zero-value
/// superset comes back, which a truthful mechanism only does at equal
/// price.
pub fn probe_candidate(
    mech: &dyn Mechanism,
    others: &[ValuationHandle],
    special_position: usize,
    m: usize,
    s: Bundle,
    params: &SubmenuParams,
    seed: u64,
) -> Result<CandidacyVerdict, MenuError> {
    params.validate()?;
    if !s.is_subset_of(Bundle::full(m)) {
        return Err(MenuError::BadParams(format!("bundle {s:?} not within {m} items")));
    }
    let mut verdict = CandidacyVerdict {
        s,
        k: params.k,
        p: params.p.clone(),
        is_candidate: false,
        observed_price: None,
        price_exceeds_p: None,
        transcript: Vec::new(),
    };
    if s.len() < params.k {
        return Ok(verdict);
    }

    let two_p = &params.p + &params.p;
    let base_items: Vec<Rat> =
        (0..m).map(|j| if s.contains(j) { two_p.clone() } else { Rat::zero() }).collect();

    let run_step = |label: String,
                        items: Vec<Rat>,
                        step_seed: u64,
                        transcript: &mut Vec<ProbeStep>|
     -> Result<(Bundle, Rat), MenuError> {
        let report: ValuationHandle = Arc::new(AdditiveValuation::new(items)?);
        let inst = Instance::with_special(m, others, special_position, report.clone())?;
        let outcome = mech.run(&inst, step_seed)?;
        let returned = outcome.allocation[special_position];
        let payment = outcome.payments[special_position].clone();
        transcript.push(ProbeStep {
            label,
            report: report.describe(),
            seed: step_seed,
            returned,
            payment: payment.clone(),
        });
        Ok((returned, payment))
    };

    let (returned, payment) =
        run_step("base".into(), base_items.clone(), seed, &mut verdict.transcript)?;

    if s.len() == params.k {
        if returned != s {
            return Ok(verdict);
        }
        let window_floor = &params.p - &params.eps_window;
        verdict.observed_price = Some(MenuPrice::Finite(payment.clone()));
        if payment <= window_floor || payment > params.p {
            return Ok(verdict);
        }
        let mut step = 0u64;
        for j in 0..m {
            if s.contains(j) {
                continue;
            }
            step += 1;
            let mut items = base_items.clone();
            items[j] = params.eps_probe.clone();
            let (perturbed, _) = run_step(
                format!("perturb:{j}"),
                items,
                seed.wrapping_add(step),
                &mut verdict.transcript,
            )?;
            if perturbed != s {
                return Ok(verdict);
            }
        }
        verdict.is_candidate = true;
        return Ok(verdict);
    }

    // Oversized bundle: decide whether the menu price of s exceeds p.
    if returned == s {
        verdict.observed_price = Some(MenuPrice::Finite(payment.clone()));
        verdict.price_exceeds_p = Some(payment > params.p);
    } else if !s.is_subset_of(returned) {
        verdict.price_exceeds_p = Some(true);
    } else {
        // s strictly inside the returned bundle: the extra items carry
        // zero reported value, so the price of s equals the payment.
        verdict.observed_price = Some(MenuPrice::Finite(payment.clone()));
        verdict.price_exceeds_p = Some(payment > params.p);
    }
    Ok(verdict)
}

/// One draw of a density experiment: the sampled target bundle, what
/// came back, the overlap fraction, and the payment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensitySample {
    pub target: Bundle,
    pub returned: Bundle,
    #[serde(with = "serde_rat")]
    pub overlap: Rat,
    #[serde(with = "serde_rat")]
    pub payment: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityReport {
    pub level: usize,
    pub target_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub samples: Vec<DensitySample>,
}

/// A report strategy cycling a polar additive valuation over the given
/// high-value weights `omegas` by trial index.
pub fn polar_omega_grid(
    m: usize,
    omegas: Vec<Rat>,
) -> impl Fn(usize, Bundle) -> Result<ValuationHandle, ValError> {
    move |trial, a| {
        let omega = omegas[trial % omegas.len()].clone();
        let high: BTreeSet<usize> = a.iter().collect();
        Ok(Arc::new(PolarAdditiveValuation::new(m, high, omega)?) as ValuationHandle)
    }
}

/// Empirical overlap statistics of a mechanism at density level `j`:
/// per trial, draws a uniform target bundle of size `m * 2^j / 2^ell`,
/// reports `strategy(trial, target)` as the special bidder, and records
/// the fraction of the target that comes back along with the payment.
#[allow(clippy::too_many_arguments)]
pub fn sample_density_menu(
    mech: &dyn Mechanism,
    others: &[ValuationHandle],
    special_position: usize,
    j: usize,
    ell: usize,
    m: usize,
    strategy: impl Fn(usize, Bundle) -> Result<ValuationHandle, ValError>,
    trials: usize,
    seed: u64,
) -> Result<DensityReport, MenuError> {
    if trials == 0 {
        return Err(MenuError::BadParams("at least one trial required".into()));
    }
    if j > ell {
        return Err(MenuError::BadParams(format!("level j = {j} exceeds ell = {ell}")));
    }
    let numer = m
        .checked_shl(j as u32)
        .ok_or_else(|| MenuError::BadParams("level too large".into()))?;
    let denom = 1usize << ell;
    if numer % denom != 0 || numer / denom == 0 {
        return Err(MenuError::BadParams(format!(
            "target size m * 2^j / 2^ell = {numer}/{denom} is not a positive integer"
        )));
    }
    let size = numer / denom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(trials);
    for trial in 0..trials {
        let picks = rand::seq::index::sample(&mut rng, m, size);
        let target = Bundle::from_indices(picks.iter());
        let report = strategy(trial, target)?;
        let inst = Instance::with_special(m, others, special_position, report)?;
        let outcome = mech.run(&inst, seed.wrapping_add(trial as u64))?;
        let returned = outcome.allocation[special_position];
        let overlap = Rat::new(
            (target.intersection(returned).len() as i64).into(),
            (target.len() as i64).into(),
        );
        samples.push(DensitySample {
            target,
            returned,
            overlap,
            payment: outcome.payments[special_position].clone(),
        });
    }
    Ok(DensityReport { level: j, target_size: size, trials, seed, samples })
}
