//! Bundles: finite sets of item indices drawn from a ground set
//! `{0, .., m-1}`.
//!
//! Backed by a `u64` mask, so every ground set in the crate is capped at
//! 64 items. Exhaustive drivers stay far below that; the cap is checked
//! wherever a bundle is built from external input.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Hard ceiling on ground-set size for bundle-valued computations.
pub const MAX_ITEMS: usize = 64;

/// A set of item indices, represented as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bundle(pub u64);

impl Bundle {
    pub const EMPTY: Bundle = Bundle(0);

    /// Full bundle `{0, .., m-1}`.
    pub fn full(m: usize) -> Bundle {
        assert!(m <= MAX_ITEMS, "ground set too large: {m}");
        if m == 64 {
            Bundle(u64::MAX)
        } else {
            Bundle((1u64 << m) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Bundle {
        let mut mask = 0u64;
        for i in indices {
            assert!(i < MAX_ITEMS, "item index out of range: {i}");
            mask |= 1 << i;
        }
        Bundle(mask)
    }

    pub fn singleton(i: usize) -> Bundle {
        assert!(i < MAX_ITEMS);
        Bundle(1 << i)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        i < MAX_ITEMS && (self.0 >> i) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < MAX_ITEMS);
        self.0 |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < MAX_ITEMS);
        self.0 &= !(1 << i);
    }

    pub fn union(&self, other: Bundle) -> Bundle {
        Bundle(self.0 | other.0)
    }

    pub fn intersection(&self, other: Bundle) -> Bundle {
        Bundle(self.0 & other.0)
    }

    pub fn difference(&self, other: Bundle) -> Bundle {
        Bundle(self.0 & !other.0)
    }

    /// Complement within the ground set `{0, .., m-1}`.
    pub fn complement(&self, m: usize) -> Bundle {
        Bundle(Self::full(m).0 & !self.0)
    }

    pub fn is_subset_of(&self, other: Bundle) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_strict_superset_of(&self, other: Bundle) -> bool {
        other.is_subset_of(*self) && self.0 != other.0
    }

    /// Member indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.0;
        (0..MAX_ITEMS).filter(move |i| (mask >> i) & 1 == 1)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// All `2^m` subsets of `{0, .., m-1}` in mask order.
    pub fn all_subsets(m: usize) -> impl Iterator<Item = Bundle> {
        assert!(m < 64, "subset enumeration needs m < 64");
        (0u64..(1u64 << m)).map(Bundle)
    }

    /// All subsets of `{0, .., m-1}` with exactly `k` members.
    pub fn subsets_of_size(m: usize, k: usize) -> impl Iterator<Item = Bundle> {
        Self::all_subsets(m).filter(move |b| b.len() == k)
    }

    /// All strict supersets of `self` within `{0, .., m-1}`.
    pub fn strict_supersets(&self, m: usize) -> impl Iterator<Item = Bundle> + '_ {
        let base = self.0;
        let free = Self::full(m).0 & !base;
        // Enumerate nonempty sub-masks of the free positions.
        SubmaskIter::new(free).filter_map(move |extra| {
            if extra == 0 {
                None
            } else {
                Some(Bundle(base | extra))
            }
        })
    }

    /// All subsets of `self` (including `EMPTY` and `self`), in
    /// ascending mask order.
    pub fn submasks(&self) -> impl Iterator<Item = Bundle> {
        SubmaskIter::new(self.0).map(Bundle)
    }
}

/// Iterates all sub-masks of `mask`, including 0 and `mask` itself.
struct SubmaskIter {
    mask: u64,
    current: u64,
    done: bool,
}

impl SubmaskIter {
    fn new(mask: u64) -> Self {
        SubmaskIter { mask, current: 0, done: false }
    }
}

impl Iterator for SubmaskIter {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.done {
            return None;
        }
        let out = self.current;
        if self.current == self.mask {
            self.done = true;
        } else {
            self.current = (self.current.wrapping_sub(self.mask)) & self.mask;
        }
        Some(out)
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for Bundle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        for &i in &v {
            if i >= MAX_ITEMS {
                return Err(serde::de::Error::custom(format!(
                    "item index {i} exceeds the bundle cap of {MAX_ITEMS}"
                )));
            }
        }
        Ok(Bundle::from_indices(v))
    }
}
