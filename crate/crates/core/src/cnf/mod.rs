//! CNF data model: literals, clauses, formulas and Boolean assignments.
//!
//! Variables are numbered from 1, as in DIMACS. An [`Assignment`] stores the
//! value of variable `v` at index `v - 1`.

mod dimacs;
mod generate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dimacs::{emit_dimacs, parse_dimacs};
pub use generate::{gen_planted, gen_uniform_3sat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    /// Panics when `var` is zero.
    pub fn new(var: u32, positive: bool) -> Self {
        assert!(var >= 1, "variables are numbered from 1");
        Literal { var, positive }
    }

    pub fn pos(var: u32) -> Self {
        Literal::new(var, true)
    }

    pub fn neg(var: u32) -> Self {
        Literal::new(var, false)
    }

    /// Builds a literal from a signed DIMACS integer. Returns `None` for 0.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Literal::new(value.unsigned_abs() as u32, value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    /// Zero-based slot of the variable in assignment and point vectors.
    pub fn index(self) -> usize {
        self.var as usize - 1
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    pub fn negated(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// Dense code `2 * (var - 1) + (negative as usize)`, for per-literal tables.
    pub fn code(self) -> usize {
        2 * self.index() + usize::from(!self.positive)
    }

    pub fn is_true_under(self, bits: &[bool]) -> bool {
        bits[self.index()] == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, dropping repeated literals (first occurrence wins).
    /// Both polarities of one variable may coexist; see [`Clause::is_tautology`].
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Self {
        let mut out: Vec<Literal> = Vec::new();
        for lit in literals {
            if !out.contains(&lit) {
                out.push(lit);
            }
        }
        Clause { literals: out }
    }

    pub fn from_dimacs(values: &[i64]) -> Self {
        Clause::new(values.iter().filter_map(|&v| Literal::from_dimacs(v)))
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        self.literals.len() == 1
    }

    pub fn contains(&self, lit: Literal) -> bool {
        self.literals.contains(&lit)
    }

    pub fn contains_var(&self, var: u32) -> bool {
        self.literals.iter().any(|l| l.var() == var)
    }

    pub fn is_tautology(&self) -> bool {
        self.literals
            .iter()
            .any(|&l| self.literals.contains(&l.negated()))
    }

    pub fn is_satisfied_by(&self, bits: &[bool]) -> bool {
        self.literals.iter().any(|l| l.is_true_under(bits))
    }

    pub fn max_var(&self) -> u32 {
        self.literals.iter().map(|l| l.var()).max().unwrap_or(0)
    }
}

impl FromIterator<Literal> for Clause {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        Clause::new(iter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment { bits }
    }

    pub fn all_false(num_vars: usize) -> Self {
        Assignment {
            bits: vec![false; num_vars],
        }
    }

    /// Convenience for tests and examples: `from_bits(&[0, 1])`.
    pub fn from_bits(bits: &[u8]) -> Self {
        Assignment {
            bits: bits.iter().map(|&b| b != 0).collect(),
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Value of a 1-based variable.
    pub fn value(&self, var: u32) -> bool {
        self.bits[var as usize - 1]
    }

    pub fn set(&mut self, var: u32, value: bool) {
        self.bits[var as usize - 1] = value;
    }

    /// Signed DIMACS literals, one per variable.
    pub fn to_dimacs_literals(&self) -> Vec<i64> {
        self.bits
            .iter()
            .enumerate()
            .map(|(i, &b)| if b { i as i64 + 1 } else { -(i as i64 + 1) })
            .collect()
    }
}

/// Result of conditioning a formula on a literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conditioned {
    Reduced(Cnf),
    /// The clause at this index (in the input) became empty.
    Conflict { clause: usize },
}

impl Conditioned {
    pub fn into_cnf(self) -> Option<Cnf> {
        match self {
            Conditioned::Reduced(cnf) => Some(cnf),
            Conditioned::Conflict { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Cnf {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl Cnf {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        for clause in &clauses {
            let max = clause.max_var() as usize;
            if max > num_vars {
                return Err(Error::VariableOutOfRange { var: max, num_vars });
            }
        }
        Ok(Cnf { num_vars, clauses })
    }

    /// Builds a formula from signed DIMACS integer lists. Panics on range errors;
    /// intended for literals written inline in tests and examples.
    pub fn from_dimacs_clauses(num_vars: usize, clauses: &[&[i64]]) -> Self {
        let clauses = clauses.iter().map(|c| Clause::from_dimacs(c)).collect();
        Cnf::new(num_vars, clauses).expect("literal out of range")
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn into_clauses(self) -> Vec<Clause> {
        self.clauses
    }

    /// Number of distinct variables that occur in some clause.
    pub fn occurring_vars(&self) -> usize {
        let mut seen = vec![false; self.num_vars];
        for clause in &self.clauses {
            for lit in clause.literals() {
                seen[lit.index()] = true;
            }
        }
        seen.iter().filter(|&&s| s).count()
    }

    pub fn check_assignment(&self, a: &Assignment) -> Result<()> {
        if a.len() != self.num_vars {
            return Err(Error::LengthMismatch {
                expected: self.num_vars,
                got: a.len(),
            });
        }
        Ok(())
    }

    /// Number of clauses with no literal true under `a`.
    pub fn count_unsatisfied(&self, a: &Assignment) -> Result<usize> {
        self.check_assignment(a)?;
        Ok(self.count_unsatisfied_bits(a.bits()))
    }

    /// Unchecked variant over raw bits; `bits.len()` must equal `num_vars`.
    pub fn count_unsatisfied_bits(&self, bits: &[bool]) -> usize {
        self.clauses
            .iter()
            .filter(|c| !c.is_satisfied_by(bits))
            .count()
    }

    pub fn is_satisfied_by(&self, a: &Assignment) -> bool {
        a.len() == self.num_vars && self.count_unsatisfied_bits(a.bits()) == 0
    }

    /// Sets `lit` true: clauses containing it vanish, its complement is
    /// deleted from the rest. Variable numbering is unchanged.
    pub fn condition(&self, lit: Literal) -> Result<Conditioned> {
        if lit.var() as usize > self.num_vars {
            return Err(Error::VariableOutOfRange {
                var: lit.var() as usize,
                num_vars: self.num_vars,
            });
        }
        let complement = lit.negated();
        let mut clauses = Vec::with_capacity(self.clauses.len());
        for (i, clause) in self.clauses.iter().enumerate() {
            if clause.contains(lit) {
                continue;
            }
            if clause.contains(complement) {
                let rest: Vec<Literal> = clause
                    .literals()
                    .iter()
                    .copied()
                    .filter(|&l| l != complement)
                    .collect();
                if rest.is_empty() {
                    return Ok(Conditioned::Conflict { clause: i });
                }
                clauses.push(Clause { literals: rest });
            } else {
                clauses.push(clause.clone());
            }
        }
        Ok(Conditioned::Reduced(Cnf {
            num_vars: self.num_vars,
            clauses,
        }))
    }
}
