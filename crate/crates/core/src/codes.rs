//! Binary list-decodable codes: encoding, exhaustive list decoding,
//! set expansion/contraction between bit strings and bundles over a
//! paired ground set, and codeword bit duplication.
//!
//! The exhaustive decoder is the reference oracle: it enumerates every
//! message and keeps those whose encoding lies within the radius. No
//! efficient decoder exists here on purpose.
//!
//! Pair-index convention: the ground set `[m''] x {0,1}` is laid out as
//! bundle indices `(i, b) -> i + b * m''`, so indices `0..m''` are the
//! `(i, 0)` elements and `m''..2m''` are the `(i, 1)` elements.

use crate::bundle::Bundle;
use crate::rational::{rat_from_str, rat_to_string, Rat};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Default ceiling on message length for exhaustive decoding.
pub const DEFAULT_DECODE_CAP: usize = 20;

/// Message lengths up to this bound get the exhaustive injectivity
/// check at construction; longer random-linear codes fall back to a
/// GF(2) rank check (equivalent for linear maps).
pub const INJECTIVITY_EXHAUSTIVE_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("bit string length {got}, expected {want}")]
    LengthMismatch { want: usize, got: usize },
    #[error("message length {len} exceeds the exhaustive decode cap of {cap}")]
    DecodeCapExceeded { len: usize, cap: usize },
    #[error("invalid code parameters: {0}")]
    BadParams(String),
    #[error("could not draw an injective random linear code after {0} attempts")]
    InjectivityExhausted(usize),
    #[error("invalid bit character {0:?}")]
    BadBitChar(char),
}

/// A fixed-length bit string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reads `id` as a big-endian `len`-bit string, so increasing `id`
    /// enumerates bit strings in lexicographic order.
    pub fn from_count(id: u64, len: usize) -> Self {
        BitString((0..len).map(|i| (id >> (len - 1 - i)) & 1 == 1).collect())
    }

    pub fn to_count(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString, CodeError> {
        if self.len() != other.len() {
            return Err(CodeError::LengthMismatch { want: self.len(), got: other.len() });
        }
        Ok(BitString(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect()))
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, CodeError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CodeError::BadBitChar(other)),
            })
            .collect::<Result<Vec<bool>, _>>()
            .map(BitString)
    }
}

/// Number of positions where `x` and `y` differ.
pub fn hamming(x: &BitString, y: &BitString) -> Result<usize, CodeError> {
    if x.len() != y.len() {
        return Err(CodeError::LengthMismatch { want: x.len(), got: y.len() });
    }
    Ok(x.0.iter().zip(&y.0).filter(|(a, b)| a != b).count())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generator {
    /// Each message bit repeated `factor` times, contiguously.
    Repetition { factor: usize },
    /// Seeded GF(2) matrix; rows are masks over message bits.
    RandomLinear { seed: u64, rows: Vec<u64> },
}

/// A binary code with exhaustive list decoding of radius
/// `d = floor((1 - beta) * m'' / 2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    m_msg: usize,
    m_code: usize,
    beta: Rat,
    d: usize,
    generator: Generator,
}

impl CodeSpec {
    pub fn repetition(m_msg: usize, factor: usize, beta: Rat) -> Result<Self, CodeError> {
        if factor == 0 {
            return Err(CodeError::BadParams("repetition factor must be >= 1".into()));
        }
        let code = CodeSpec::finish(m_msg, m_msg * factor, beta, Generator::Repetition { factor })?;
        Ok(code)
    }

    pub fn random_linear(m_msg: usize, m_code: usize, beta: Rat, seed: u64) -> Result<Self, CodeError> {
        if m_code < m_msg {
            return Err(CodeError::BadParams(format!(
                "codeword length {m_code} shorter than message length {m_msg}: cannot be injective"
            )));
        }
        if m_msg > 64 {
            return Err(CodeError::BadParams("message length above 64 unsupported".into()));
        }
        if m_msg == 0 {
            return Err(CodeError::BadParams("message length must be positive".into()));
        }
        if !(beta.is_positive() && beta < Rat::one()) {
            return Err(CodeError::BadParams(format!(
                "beta must lie in (0,1), got {}",
                rat_to_string(&beta)
            )));
        }
        const MAX_ATTEMPTS: usize = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_ATTEMPTS {
            let rows: Vec<u64> = (0..m_code)
                .map(|_| {
                    let mut row = 0u64;
                    for j in 0..m_msg {
                        if rng.gen::<bool>() {
                            row |= 1 << j;
                        }
                    }
                    row
                })
                .collect();
            let candidate =
                CodeSpec::finish(m_msg, m_code, beta.clone(), Generator::RandomLinear { seed, rows });
            match candidate {
                Ok(code) => return Ok(code),
                Err(CodeError::BadParams(_)) => continue,
                Err(other) => return Err(other),
            }
        }
        Err(CodeError::InjectivityExhausted(MAX_ATTEMPTS))
    }

    fn finish(m_msg: usize, m_code: usize, beta: Rat, generator: Generator) -> Result<Self, CodeError> {
        if m_msg == 0 {
            return Err(CodeError::BadParams("message length must be positive".into()));
        }
        if !(beta.is_positive() && beta < Rat::one()) {
            return Err(CodeError::BadParams(format!(
                "beta must lie in (0,1), got {}",
                rat_to_string(&beta)
            )));
        }
        let radius = (Rat::one() - &beta) * Rat::from_integer(BigInt::from(m_code as i64))
            / Rat::from_integer(BigInt::from(2));
        let d = radius.floor().to_integer().to_usize().ok_or_else(|| {
            CodeError::BadParams("radius does not fit in usize".into())
        })?;
        let code = CodeSpec { m_msg, m_code, beta, d, generator };
        code.verify_injective()?;
        Ok(code)
    }

    fn verify_injective(&self) -> Result<(), CodeError> {
        if self.m_msg <= INJECTIVITY_EXHAUSTIVE_CAP {
            let mut seen = HashSet::with_capacity(1 << self.m_msg);
            for id in 0..(1u64 << self.m_msg) {
                let cw = self.encode(&BitString::from_count(id, self.m_msg))?;
                if !seen.insert(cw.0) {
                    return Err(CodeError::BadParams("encoding map is not injective".into()));
                }
            }
            Ok(())
        } else {
            match &self.generator {
                Generator::Repetition { .. } => Ok(()),
                Generator::RandomLinear { rows, .. } => {
                    // A linear map is injective iff its matrix has full
                    // column rank over GF(2).
                    if self.m_code > 64 {
                        return Err(CodeError::BadParams(
                            "rank check supports codeword length <= 64".into(),
                        ));
                    }
                    let mut basis = [0u64; 64];
                    for j in 0..self.m_msg {
                        let mut v: u64 = rows.iter().enumerate().fold(0, |acc, (i, row)| {
                            acc | (((row >> j) & 1) << i)
                        });
                        while v != 0 {
                            let h = 63 - v.leading_zeros() as usize;
                            if basis[h] == 0 {
                                basis[h] = v;
                                break;
                            }
                            v ^= basis[h];
                        }
                        if v == 0 {
                            return Err(CodeError::BadParams("encoding map is not injective".into()));
                        }
                    }
                    Ok(())
                }
            }
        }
    }

    pub fn m_msg(&self) -> usize {
        self.m_msg
    }

    pub fn m_code(&self) -> usize {
        self.m_code
    }

    pub fn beta(&self) -> &Rat {
        &self.beta
    }

    /// Decoding radius `floor((1 - beta) * m'' / 2)`.
    pub fn radius(&self) -> usize {
        self.d
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn encode(&self, x: &BitString) -> Result<BitString, CodeError> {
        if x.len() != self.m_msg {
            return Err(CodeError::LengthMismatch { want: self.m_msg, got: x.len() });
        }
        match &self.generator {
            Generator::Repetition { factor } => {
                let mut out = Vec::with_capacity(self.m_code);
                for &b in &x.0 {
                    out.extend(std::iter::repeat_n(b, *factor));
                }
                Ok(BitString(out))
            }
            Generator::RandomLinear { rows, .. } => {
                let mask: u64 = x.0.iter().enumerate().fold(0, |acc, (j, &b)| acc | ((b as u64) << j));
                Ok(BitString(rows.iter().map(|row| (row & mask).count_ones() % 2 == 1).collect()))
            }
        }
    }

    pub fn list_decode(&self, c: &BitString) -> Result<Vec<BitString>, CodeError> {
        self.list_decode_capped(c, DEFAULT_DECODE_CAP)
    }

    /// Exhaustive decode: every message within Hamming radius
    /// [`CodeSpec::radius`], in lexicographic order.
    pub fn list_decode_capped(&self, c: &BitString, cap: usize) -> Result<Vec<BitString>, CodeError> {
        if c.len() != self.m_code {
            return Err(CodeError::LengthMismatch { want: self.m_code, got: c.len() });
        }
        if self.m_msg > cap {
            return Err(CodeError::DecodeCapExceeded { len: self.m_msg, cap });
        }
        let mut out = Vec::new();
        for id in 0..(1u64 << self.m_msg) {
            let x = BitString::from_count(id, self.m_msg);
            if hamming(&self.encode(&x)?, c)? <= self.d {
                out.push(x);
            }
        }
        Ok(out)
    }
}

/// Serialized form: generator kind, seed, lengths, beta. The matrix of
/// a random-linear code is re-derived from the seed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodeSpecJson {
    pub generator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub m_msg: usize,
    pub m_code: usize,
    pub beta: String,
}

impl CodeSpec {
    pub fn to_json_spec(&self) -> CodeSpecJson {
        let (generator, seed) = match &self.generator {
            Generator::Repetition { .. } => ("repetition".to_string(), None),
            Generator::RandomLinear { seed, .. } => ("random_linear".to_string(), Some(*seed)),
        };
        CodeSpecJson {
            generator,
            seed,
            m_msg: self.m_msg,
            m_code: self.m_code,
            beta: rat_to_string(&self.beta),
        }
    }

    pub fn from_json_spec(spec: &CodeSpecJson) -> Result<Self, CodeError> {
        let beta = rat_from_str(&spec.beta)
            .map_err(|e| CodeError::BadParams(e.to_string()))?;
        match spec.generator.as_str() {
            "repetition" => {
                if spec.m_msg == 0 || !spec.m_code.is_multiple_of(spec.m_msg) {
                    return Err(CodeError::BadParams(
                        "repetition code needs m_code divisible by m_msg".into(),
                    ));
                }
                CodeSpec::repetition(spec.m_msg, spec.m_code / spec.m_msg, beta)
            }
            "random_linear" => {
                let seed = spec.seed.ok_or_else(|| {
                    CodeError::BadParams("random_linear generator requires a seed".into())
                })?;
                CodeSpec::random_linear(spec.m_msg, spec.m_code, beta, seed)
            }
            other => Err(CodeError::BadParams(format!("unknown generator {other:?}"))),
        }
    }
}

/// Bundle index of pair element `(i, b)` under the layout convention.
pub fn pair_index(i: usize, b: bool, m_code: usize) -> usize {
    i + (b as usize) * m_code
}

/// Maps `y` to the bundle `{(i, y_i) : i < m''}` over `[m''] x {0,1}`.
pub fn expand(y: &BitString) -> Bundle {
    let m = y.len();
    Bundle::from_indices(y.0.iter().enumerate().map(|(i, &b)| pair_index(i, b, m)))
}

/// Reads an `m''`-bit string back out of a subset of `[m''] x {0,1}`:
/// positions holding exactly one element report that element's bit;
/// ambiguous positions (both or neither present) report `a`.
///
/// This orientation satisfies `contract(expand(y), a) = y`, which the
/// decoding path relies on.
pub fn contract(s: Bundle, m_code: usize, a: bool) -> BitString {
    BitString(
        (0..m_code)
            .map(|i| {
                let has0 = s.contains(pair_index(i, false, m_code));
                let has1 = s.contains(pair_index(i, true, m_code));
                match (has0, has1) {
                    (true, false) => false,
                    (false, true) => true,
                    _ => a,
                }
            })
            .collect(),
    )
}

/// Repeats each bit of `c` contiguously `factor` times.
pub fn duplicate_bits(c: &BitString, factor: usize) -> BitString {
    assert!(factor >= 1, "duplication factor must be >= 1");
    let mut out = Vec::with_capacity(c.len() * factor);
    for &b in &c.0 {
        out.extend(std::iter::repeat_n(b, factor));
    }
    BitString(out)
}

/// Companion to [`duplicate_bits`]: majority-votes each length-`factor`
/// block. Exact ties (possible only for corrupted blocks with even
/// `factor`) resolve to 0.
pub fn majority_collapse(c: &BitString, factor: usize) -> Result<BitString, CodeError> {
    if factor == 0 || !c.len().is_multiple_of(factor) {
        return Err(CodeError::BadParams(format!(
            "length {} is not a multiple of factor {factor}",
            c.len()
        )));
    }
    Ok(BitString(
        c.0.chunks(factor)
            .map(|block| block.iter().filter(|&&b| b).count() * 2 > factor)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn rep_code() -> CodeSpec {
        CodeSpec::repetition(2, 3, rat(1, 3)).unwrap()
    }

    #[test]
    fn repetition_encode_examples() {
        let code = rep_code();
        assert_eq!(code.m_code(), 6);
        assert_eq!(code.radius(), 2);
        assert_eq!(code.encode(&bits("00")).unwrap(), bits("000000"));
        assert_eq!(code.encode(&bits("01")).unwrap(), bits("000111"));
        assert_eq!(code.encode(&bits("10")).unwrap(), bits("111000"));
    }

    #[test]
    fn encode_length_mismatch() {
        let code = rep_code();
        assert_eq!(
            code.encode(&bits("011")),
            Err(CodeError::LengthMismatch { want: 2, got: 3 })
        );
    }

    #[test]
    fn decode_contains_message_at_distance_zero() {
        let code = rep_code();
        for id in 0..4 {
            let x = BitString::from_count(id, 2);
            let decoded = code.list_decode(&code.encode(&x).unwrap()).unwrap();
            assert!(decoded.contains(&x));
        }
    }

    #[test]
    fn decode_within_radius() {
        let code = rep_code();
        let decoded = code.list_decode(&bits("001110")).unwrap();
        assert!(decoded.contains(&bits("01")), "d_H(001110, 000111) = 2 <= 2");
    }

    #[test]
    fn decode_all_ones_returns_exactly_11() {
        let code = rep_code();
        assert_eq!(code.list_decode(&bits("111111")).unwrap(), vec![bits("11")]);
    }

    #[test]
    fn decode_cap_enforced() {
        let code = CodeSpec::repetition(4, 2, rat(1, 10)).unwrap();
        let cw = code.encode(&bits("0101")).unwrap();
        assert_eq!(
            code.list_decode_capped(&cw, 3),
            Err(CodeError::DecodeCapExceeded { len: 4, cap: 3 })
        );
    }

    #[test]
    fn expand_examples() {
        assert_eq!(expand(&bits("000")), Bundle::from_indices([0, 1, 2]));
        // y = 010 -> {(0,0),(1,1),(2,0)} = indices {0, 3+1, 2}.
        assert_eq!(expand(&bits("010")), Bundle::from_indices([0, 4, 2]));
    }

    #[test]
    fn contract_empty_set_gives_default() {
        assert_eq!(contract(Bundle::EMPTY, 3, false), bits("000"));
        assert_eq!(contract(Bundle::EMPTY, 3, true), bits("111"));
    }

    #[test]
    fn contract_single_element_positions() {
        // S = {(0,0),(0,1),(1,1)} over m''=2: position 0 ambiguous -> a,
        // position 1 holds only (1,1) -> 1.
        let s = Bundle::from_indices([0, 2, 3]);
        assert_eq!(contract(s, 2, true), bits("11"));
        assert_eq!(contract(s, 2, false), bits("01"));
    }

    #[test]
    fn contract_expand_round_trip() {
        for m in 1..=6usize {
            for id in 0..(1u64 << m) {
                let y = BitString::from_count(id, m);
                let a_set = expand(&y);
                assert_eq!(a_set.len(), m);
                for a in [false, true] {
                    assert_eq!(contract(a_set, m, a), y, "y={y} a={a}");
                }
            }
        }
    }

    #[test]
    fn duplicate_examples() {
        assert_eq!(duplicate_bits(&bits("01"), 1), bits("01"));
        assert_eq!(duplicate_bits(&bits("01"), 2), bits("0011"));
        let c = bits("0110");
        assert_eq!(majority_collapse(&duplicate_bits(&c, 4), 4).unwrap(), c);
    }

    #[test]
    fn majority_collapse_rejects_bad_lengths() {
        assert!(majority_collapse(&bits("010"), 2).is_err());
    }

    #[test]
    fn hamming_examples() {
        let x = bits("000111");
        assert_eq!(hamming(&x, &x).unwrap(), 0);
        assert_eq!(hamming(&x, &bits("001110")).unwrap(), 2);
        assert_eq!(hamming(&bits("001110"), &x).unwrap(), 2);
        assert!(hamming(&x, &bits("01")).is_err());
    }

    #[test]
    fn injectivity_verified_exhaustively() {
        // A degenerate "repetition" setup cannot exist, so force a
        // non-injective linear map through the JSON path: constructing
        // random-linear with m_code >= m_msg retries until injective.
        let code = CodeSpec::random_linear(4, 8, rat(1, 10), 11).unwrap();
        let mut seen = HashSet::new();
        for id in 0..16u64 {
            let cw = code.encode(&BitString::from_count(id, 4)).unwrap();
            assert!(seen.insert(cw.0));
        }
    }

    #[test]
    fn random_linear_rejects_short_codewords() {
        assert!(matches!(
            CodeSpec::random_linear(5, 4, rat(1, 10), 1),
            Err(CodeError::BadParams(_))
        ));
    }

    #[test]
    fn random_linear_is_linear() {
        let code = CodeSpec::random_linear(5, 12, rat(1, 10), 42).unwrap();
        for (a, b) in [(3u64, 17u64), (0, 31), (9, 9), (21, 6)] {
            let xa = BitString::from_count(a, 5);
            let xb = BitString::from_count(b, 5);
            let lhs = code.encode(&xa).unwrap().xor(&code.encode(&xb).unwrap()).unwrap();
            let rhs = code.encode(&xa.xor(&xb).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn json_spec_round_trip_rederives_same_code() {
        let code = CodeSpec::random_linear(4, 10, rat(1, 10), 7).unwrap();
        let js = serde_json::to_string(&code.to_json_spec()).unwrap();
        let parsed: CodeSpecJson = serde_json::from_str(&js).unwrap();
        let back = CodeSpec::from_json_spec(&parsed).unwrap();
        assert_eq!(back, code);

        let rep = rep_code();
        let back = CodeSpec::from_json_spec(&rep.to_json_spec()).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn claim_unbalanced_sets_are_close_to_a() {
        // For all S subset of C with A = expand(y), B = C \ A:
        // |S cap A| - |S cap B| > beta * m'' implies
        // d_H(S, A) < (1 - beta) * m'' (indicator-string distance).
        for m in 1..=5usize {
            let beta = rat(1, 3);
            let beta_m = &beta * rat(m as i64, 1);
            for yid in 0..(1u64 << m) {
                let a_set = expand(&BitString::from_count(yid, m));
                let b_set = a_set.complement(2 * m);
                for s in Bundle::all_subsets(2 * m) {
                    let unbalance =
                        rat(s.intersection(a_set).len() as i64, 1) - rat(s.intersection(b_set).len() as i64, 1);
                    if unbalance > beta_m {
                        let dist = s.difference(a_set).len() + a_set.difference(s).len();
                        let bound = (Rat::one() - &beta) * rat(m as i64, 1);
                        assert!(
                            rat(dist as i64, 1) < bound,
                            "m={m} y={yid} S={s:?}: dist {dist} not below bound"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn claim_contraction_preserves_closeness() {
        // Under the same hypothesis, some a in {0,1} has
        // d_H(con^a(S), con^a(A)) < (1 - beta) * m'' / 2.
        for m in 1..=5usize {
            let beta = rat(1, 3);
            let beta_m = &beta * rat(m as i64, 1);
            for yid in 0..(1u64 << m) {
                let y = BitString::from_count(yid, m);
                let a_set = expand(&y);
                let b_set = a_set.complement(2 * m);
                for s in Bundle::all_subsets(2 * m) {
                    let unbalance =
                        rat(s.intersection(a_set).len() as i64, 1) - rat(s.intersection(b_set).len() as i64, 1);
                    if unbalance > beta_m {
                        let best = [false, true]
                            .iter()
                            .map(|&a| {
                                hamming(&contract(s, m, a), &contract(a_set, m, a)).unwrap()
                            })
                            .min()
                            .unwrap();
                        let bound = (Rat::one() - &beta) * rat(m as i64, 2);
                        assert!(
                            rat(best as i64, 1) < bound,
                            "m={m} y={y} S={s:?}: min contracted dist {best} not below bound"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn contract_of_expanded_a_is_codeword_for_every_a() {
        // The decoding path compares con^a(S) against E(x) directly,
        // which works because con^a(exp(E(x))) = E(x).
        let code = rep_code();
        for id in 0..4u64 {
            let cw = code.encode(&BitString::from_count(id, 2)).unwrap();
            let a_set = expand(&cw);
            for a in [false, true] {
                assert_eq!(contract(a_set, cw.len(), a), cw);
            }
        }
    }
}
