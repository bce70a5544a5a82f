//! Boolean formulas (CNF), brute-force satisfiability oracles, and
//! DIMACS ingestion.
//!
//! Everything here is a desk-scale oracle: enumeration is the point, so
//! variable counts are capped (default 24) and the cap is an explicit
//! error, never a silent truncation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ceiling on variable count for the enumeration oracles.
pub const DEFAULT_VAR_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("assignment length {got} does not match formula variable count {want}")]
    LengthMismatch { want: usize, got: usize },
    #[error("formula has {vars} variables, above the enumeration cap of {cap}")]
    CapExceeded { vars: usize, cap: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("formula must have at least one variable")]
    NoVariables,
    #[error("clause {index} is empty")]
    EmptyClause { index: usize },
    #[error("clause {index} has literal {lit} outside [1, {vars}]")]
    LiteralOutOfRange { index: usize, lit: i64, vars: usize },
}

/// A CNF formula. Literals are signed 1-based variable indices, DIMACS
/// style: `3` means x3, `-3` means ¬x3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    num_vars: usize,
    clauses: Vec<Vec<i64>>,
}

impl Formula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i64>>) -> Result<Self, SatError> {
        if num_vars == 0 {
            return Err(SatError::NoVariables);
        }
        for (index, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(SatError::EmptyClause { index });
            }
            for &lit in clause {
                let var = lit.unsigned_abs() as usize;
                if lit == 0 || var > num_vars {
                    return Err(SatError::LiteralOutOfRange { index, lit, vars: num_vars });
                }
            }
        }
        Ok(Formula { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i64>] {
        &self.clauses
    }

    /// Formula with unit clauses pinning every variable to the given
    /// bits: its unique satisfying assignment is exactly `bits`.
    pub fn pinned(bits: &[bool]) -> Result<Self, SatError> {
        let clauses = bits
            .iter()
            .enumerate()
            .map(|(i, &b)| vec![if b { i as i64 + 1 } else { -(i as i64 + 1) }])
            .collect();
        Formula::new(bits.len(), clauses)
    }

    /// An unsatisfiable formula on `num_vars` variables.
    pub fn contradiction(num_vars: usize) -> Result<Self, SatError> {
        let mut clauses = vec![vec![1], vec![-1]];
        if num_vars == 0 {
            return Err(SatError::NoVariables);
        }
        // Mention the last variable so the variable count is used.
        if num_vars > 1 {
            clauses.push(vec![num_vars as i64, -(num_vars as i64)]);
        }
        Formula::new(num_vars, clauses)
    }
}

/// A total assignment: `bits[i]` is the value of variable `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment(pub Vec<bool>);

impl Assignment {
    /// Reads `s` as a big-endian `len`-bit string: bit for variable 1 is
    /// the most significant. `Assignment::from_count(5, 3)` is `(1,0,1)`.
    pub fn from_count(s: u64, len: usize) -> Self {
        Assignment((0..len).map(|i| (s >> (len - 1 - i)) & 1 == 1).collect())
    }

    /// Inverse of [`Assignment::from_count`].
    pub fn to_count(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }
}

/// True iff every clause of `phi` contains a satisfied literal.
pub fn eval_formula(phi: &Formula, a: &Assignment) -> Result<bool, SatError> {
    if a.0.len() != phi.num_vars {
        return Err(SatError::LengthMismatch { want: phi.num_vars, got: a.0.len() });
    }
    Ok(phi.clauses.iter().all(|clause| {
        clause.iter().any(|&lit| {
            let value = a.0[lit.unsigned_abs() as usize - 1];
            if lit > 0 {
                value
            } else {
                !value
            }
        })
    }))
}

/// All satisfying assignments in lexicographic order (all-false first).
pub fn brute_force_sat(phi: &Formula) -> Result<Vec<Assignment>, SatError> {
    brute_force_sat_capped(phi, DEFAULT_VAR_CAP)
}

pub fn brute_force_sat_capped(phi: &Formula, cap: usize) -> Result<Vec<Assignment>, SatError> {
    let vars = phi.num_vars;
    if vars > cap {
        return Err(SatError::CapExceeded { vars, cap });
    }
    let mut out = Vec::new();
    for s in 0..(1u64 << vars) {
        // from_count reads big-endian, so counting up is lexicographic
        // over the bit vectors.
        let a = Assignment::from_count(s, vars);
        if eval_formula(phi, &a)? {
            out.push(a);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatStatus {
    Unsat,
    Unique,
    Multiple,
}

pub fn unique_sat_status(phi: &Formula) -> Result<SatStatus, SatError> {
    unique_sat_status_capped(phi, DEFAULT_VAR_CAP)
}

pub fn unique_sat_status_capped(phi: &Formula, cap: usize) -> Result<SatStatus, SatError> {
    let vars = phi.num_vars;
    if vars > cap {
        return Err(SatError::CapExceeded { vars, cap });
    }
    let mut found = 0usize;
    for s in 0..(1u64 << vars) {
        if eval_formula(phi, &Assignment::from_count(s, vars))? {
            found += 1;
            if found >= 2 {
                return Ok(SatStatus::Multiple);
            }
        }
    }
    Ok(match found {
        0 => SatStatus::Unsat,
        _ => SatStatus::Unique,
    })
}

/// Parses DIMACS CNF. Comment lines (`c ...`) and blank lines are
/// ignored; the header `p cnf <vars> <clauses>` must precede clause
/// data; every clause ends with `0`. Errors carry 1-based line numbers.
pub fn parse_dimacs(text: &str) -> Result<Formula, SatError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i64>> = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    let mut clause_start_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(SatError::Parse { line: line_no, msg: "duplicate header".into() });
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(SatError::Parse {
                    line: line_no,
                    msg: format!("malformed header {line:?}, expected \"p cnf <vars> <clauses>\""),
                });
            }
            let vars = fields[2].parse::<usize>().map_err(|_| SatError::Parse {
                line: line_no,
                msg: format!("invalid variable count {:?}", fields[2]),
            })?;
            let count = fields[3].parse::<usize>().map_err(|_| SatError::Parse {
                line: line_no,
                msg: format!("invalid clause count {:?}", fields[3]),
            })?;
            if vars == 0 {
                return Err(SatError::Parse {
                    line: line_no,
                    msg: "variable count must be positive".into(),
                });
            }
            header = Some((vars, count));
            continue;
        }
        let Some((vars, _)) = header else {
            return Err(SatError::Parse {
                line: line_no,
                msg: "clause data before \"p cnf\" header".into(),
            });
        };
        if current.is_empty() {
            clause_start_line = line_no;
        }
        for tok in line.split_whitespace() {
            let lit = tok.parse::<i64>().map_err(|_| SatError::Parse {
                line: line_no,
                msg: format!("invalid literal {tok:?}"),
            })?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(SatError::Parse { line: line_no, msg: "empty clause".into() });
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                let var = lit.unsigned_abs() as usize;
                if var > vars {
                    return Err(SatError::Parse {
                        line: line_no,
                        msg: format!("literal {lit} out of range [1, {vars}]"),
                    });
                }
                current.push(lit);
            }
        }
    }

    let Some((vars, declared)) = header else {
        return Err(SatError::Parse { line: text.lines().count().max(1), msg: "missing \"p cnf\" header".into() });
    };
    if !current.is_empty() {
        return Err(SatError::Parse {
            line: clause_start_line,
            msg: "clause missing terminating 0".into(),
        });
    }
    if clauses.len() != declared {
        return Err(SatError::Parse {
            line: text.lines().count().max(1),
            msg: format!("header declared {declared} clauses, found {}", clauses.len()),
        });
    }
    Formula::new(vars, clauses)
}
