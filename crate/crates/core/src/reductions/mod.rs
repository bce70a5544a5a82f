//! Formula extraction pipelines: each submodule drives a mechanism with
//! purpose-built valuations and reads a satisfying assignment out of the
//! returned allocation.
//!
//! * [`ca`]: bonus valuations over a random linear projection, with the
//!   probe-backed candidacy predicate.
//! * [`tie`]: encoded double-peak valuations decoded from the special
//!   bidder's bundle.
//! * [`cover`]: the coverage decision procedure over synthetic regular
//!   set-cover instances.
//! * [`mua`]: two-bidder multi-unit extraction and the split-probability
//!   check.
//!
//! Every SAT verdict re-verifies its assignment against the formula, so
//! a buggy or adversarial mechanism can cause missed extractions but
//! never an unsound SAT answer.

pub mod ca;
pub mod cover;
pub mod mua;
pub mod tie;

use crate::bundle::Bundle;
use crate::codes::CodeError;
use crate::mechanisms::MechError;
use crate::menus::MenuError;
use crate::satkit::SatError;
use crate::valuations::ValError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("candidacy probe failed on bundle {bundle:?}: {detail}")]
    ProbeFailure { bundle: Bundle, detail: String },
    #[error(transparent)]
    Mechanism(#[from] MechError),
    #[error(transparent)]
    Menu(#[from] MenuError),
    #[error(transparent)]
    Valuation(#[from] ValError),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Final answer of an extraction loop. `Sat` carries the assignment
/// bits in variable order; every constructor verifies them against the
/// formula before building this value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Sat { assignment: Vec<bool> },
    PresumedUnsat,
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat { .. })
    }
}

/// One mechanism invocation inside an extraction loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Seed handed to the mechanism for this run.
    pub seed: u64,
    /// Outer repetition this run belongs to.
    pub sweep: usize,
    /// Index of the special bidder.
    pub special: usize,
    /// Submenu size parameter, when the pipeline sweeps one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Submenu price parameter as a `num/den` string, when swept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    /// Bundle the mechanism gave the special bidder; `None` when the
    /// run errored.
    pub returned: Option<Bundle>,
    /// Whether this run produced a verified extraction.
    pub hit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full record of an extraction run: the verdict plus one row per
/// mechanism invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub verdict: Verdict,
    pub sweeps_run: usize,
    pub trials: Vec<TrialRecord>,
    /// Wall-clock duration; stripped by [`ReductionReport::canonical`]
    /// so byte comparisons see only seed-determined content.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
}

impl ReductionReport {
    /// The report minus wall-clock timing.
    pub fn canonical(&self) -> Self {
        ReductionReport { timing_ms: None, ..self.clone() }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.canonical()).expect("report serializes")
    }
}

/// SplitMix64 finalizer over `(master, lane, index)`. Trial seeds come
/// from here so that grid points and repeats stay independent of
/// execution order and worker count.
pub(crate) fn derive_seed(master: u64, lane: u64, index: u64) -> u64 {
    let mut z = master
        ^ lane.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
