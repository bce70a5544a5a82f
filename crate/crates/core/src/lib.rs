//! Exact-arithmetic testbed for truthful combinatorial auction mechanisms.
//!
//! The crate is organized around four layers:
//!
//! * foundations: exact rationals ([`rational`]), bundles of items
//!   ([`bundle`]), a small SAT toolkit ([`satkit`]), and list-decodable
//!   binary codes ([`codes`]);
//! * valuation families ([`valuations`]) with exhaustive structural
//!   checkers (monotonicity, submodularity);
//! * reference mechanisms ([`mechanisms`]) and menu instrumentation
//!   ([`menus`]): exact VCG, cardinality-constrained welfare search,
//!   an exact two-bidder multi-unit maximal-in-distributional-range
//!   mechanism, menu price oracles, structured submenus, and black-box
//!   candidacy probes;
//! * experiment drivers ([`reductions`], [`props`]) that embed SAT
//!   instances into auction valuations and attempt to extract satisfying
//!   assignments from mechanism behavior, plus statistical sanity
//!   experiments for the random projections used along the way.
//!
//! Everything numeric is an exact `BigRational`; nothing in the crate
//! compares floating point. All randomized entry points take explicit
//! seeds and are deterministic given them.

pub mod bundle;
pub mod codes;
pub mod mechanisms;
pub mod menus;
pub mod props;
pub mod rational;
pub mod reductions;
pub mod satkit;
pub mod valuations;

pub use bundle::Bundle;
pub use rational::Rat;
