//! The polynomial functional associated with a CNF.
//!
//! Each clause contributes the product of its literals' *falsity factors*:
//! `(1 - x)^2` for a positive literal and `x^2` for a negative one. The sum
//! over clauses, `F(x)`, is non-negative on the unit cube, vanishes exactly
//! on satisfying Boolean points, and counts falsified clauses at any Boolean
//! point.
//!
//! For a variable `v`, let `R` be the product of the falsity factors of the
//! *other* literal slots of a clause containing `v`. With
//! `A = sum R over every occurrence of v` and
//! `B = sum R over positive occurrences of v`,
//! `F` restricted to `x_v` is `A x_v^2 - 2 B x_v + const`, so
//! `dF/dx_v = 2 (A x_v - B)` and the coordinate minimizer is `B / A`.

use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Clause, Cnf, Literal};
use crate::error::{Error, Result};

/// A point of the unit cube `[0, 1]^N`; component `v - 1` belongs to
/// variable `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedPoint {
    values: Vec<f64>,
}

impl RelaxedPoint {
    /// Clamps every component into `[0, 1]`. Panics on NaN.
    pub fn new(mut values: Vec<f64>) -> Self {
        for x in &mut values {
            assert!(!x.is_nan(), "relaxed point component is NaN");
            *x = x.clamp(0.0, 1.0);
        }
        RelaxedPoint { values }
    }

    pub fn constant(len: usize, value: f64) -> Self {
        RelaxedPoint::new(vec![value; len])
    }

    pub fn from_assignment(a: &Assignment) -> Self {
        RelaxedPoint {
            values: a.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, var: u32) -> f64 {
        self.values[var as usize - 1]
    }

    /// Sets a component, clamping into `[0, 1]`.
    pub fn set(&mut self, var: u32, value: f64) {
        self.values[var as usize - 1] = value.clamp(0.0, 1.0);
    }

    /// Component `v` rounds to 1 iff `x_v >= 0.5`.
    pub fn round(&self) -> Assignment {
        Assignment::new(self.values.iter().map(|&x| x >= 0.5).collect())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `(A, B)` for one variable; `B / A` is its fixed-point target.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoefficientPair {
    pub a: f64,
    pub b: f64,
}

impl CoefficientPair {
    /// `B / A` when `A > guard`, otherwise `None`.
    pub fn target(self, guard: f64) -> Option<f64> {
        (self.a > guard).then(|| self.b / self.a)
    }
}

#[inline]
pub fn falsity(lit: Literal, x: f64) -> f64 {
    if lit.is_positive() {
        let y = 1.0 - x;
        y * y
    } else {
        x * x
    }
}

pub fn clause_term(clause: &Clause, x: &RelaxedPoint) -> f64 {
    clause
        .literals()
        .iter()
        .map(|&lit| falsity(lit, x.values[lit.index()]))
        .product()
}

/// `F(x)`; errors when `x` has the wrong length.
pub fn evaluate(cnf: &Cnf, x: &RelaxedPoint) -> Result<f64> {
    if x.len() != cnf.num_vars() {
        return Err(Error::LengthMismatch {
            expected: cnf.num_vars(),
            got: x.len(),
        });
    }
    Ok(cnf.clauses().iter().map(|c| clause_term(c, x)).sum())
}

#[derive(Debug, Clone, Copy)]
struct Occurrence {
    clause: u32,
    slot: u32,
    positive: bool,
}

/// Flat clause storage plus, per variable, the list of its occurrences.
#[derive(Debug, Clone)]
pub struct OccurrenceIndex {
    num_vars: usize,
    clause_start: Vec<usize>,
    lits: Vec<Literal>,
    occ_start: Vec<usize>,
    occ: Vec<Occurrence>,
}

impl OccurrenceIndex {
    pub fn new(cnf: &Cnf) -> Self {
        let mut clause_start = Vec::with_capacity(cnf.num_clauses() + 1);
        let mut lits = Vec::new();
        clause_start.push(0);
        for clause in cnf.clauses() {
            lits.extend_from_slice(clause.literals());
            clause_start.push(lits.len());
        }

        let n = cnf.num_vars();
        let mut counts = vec![0usize; n + 1];
        for lit in &lits {
            counts[lit.var() as usize] += 1;
        }
        let mut occ_start = vec![0usize; n + 1];
        for v in 1..=n {
            occ_start[v] = occ_start[v - 1] + counts[v];
        }
        let mut fill = occ_start.clone();
        let mut occ = vec![
            Occurrence {
                clause: 0,
                slot: 0,
                positive: false
            };
            lits.len()
        ];
        for c in 0..cnf.num_clauses() {
            let range = clause_start[c]..clause_start[c + 1];
            for (slot, &lit) in range.clone().zip(&lits[range]) {
                let at = &mut fill[lit.index()];
                occ[*at] = Occurrence {
                    clause: c as u32,
                    slot: slot as u32,
                    positive: lit.is_positive(),
                };
                *at += 1;
            }
        }
        OccurrenceIndex {
            num_vars: n,
            clause_start,
            lits,
            occ_start,
            occ,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clause_start.len() - 1
    }

    pub fn clause_literals(&self, c: usize) -> &[Literal] {
        &self.lits[self.clause_start[c]..self.clause_start[c + 1]]
    }

    /// `(clause index, positive)` pairs for a 1-based variable.
    pub fn occurrences(&self, var: u32) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.occ_slice(var)
            .iter()
            .map(|o| (o.clause as usize, o.positive))
    }

    pub fn occurrence_count(&self, var: u32) -> usize {
        self.occ_slice(var).len()
    }

    fn occ_slice(&self, var: u32) -> &[Occurrence] {
        let i = var as usize - 1;
        &self.occ[self.occ_start[i]..self.occ_start[i + 1]]
    }

    #[inline]
    fn rest_product(&self, o: &Occurrence, x: &[f64]) -> f64 {
        let c = o.clause as usize;
        let mut r = 1.0;
        for slot in self.clause_start[c]..self.clause_start[c + 1] {
            if slot != o.slot as usize {
                let lit = self.lits[slot];
                r *= falsity(lit, x[lit.index()]);
            }
        }
        r
    }

    /// `(A, B)` of a 1-based variable at `x`; zero for absent variables.
    pub fn coefficients(&self, x: &[f64], var: u32) -> CoefficientPair {
        let mut pair = CoefficientPair::default();
        for o in self.occ_slice(var) {
            let r = self.rest_product(o, x);
            pair.a += r;
            if o.positive {
                pair.b += r;
            }
        }
        pair
    }

    /// `A` alone, for inertia blending over lagged points.
    pub fn a_coefficient(&self, x: &[f64], var: u32) -> f64 {
        self.occ_slice(var)
            .iter()
            .map(|o| self.rest_product(o, x))
            .sum()
    }

    pub fn clause_term(&self, c: usize, x: &[f64]) -> f64 {
        self.clause_literals(c)
            .iter()
            .map(|&lit| falsity(lit, x[lit.index()]))
            .product()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (0..self.num_clauses()).map(|c| self.clause_term(c, x)).sum()
    }

    /// Indices of clauses falsified by the Boolean vector `bits`.
    pub fn unsatisfied_clauses(&self, bits: &[bool]) -> Vec<usize> {
        (0..self.num_clauses())
            .filter(|&c| !self.clause_literals(c).iter().any(|l| l.is_true_under(bits)))
            .collect()
    }

    pub fn count_unsatisfied(&self, bits: &[bool]) -> usize {
        (0..self.num_clauses())
            .filter(|&c| !self.clause_literals(c).iter().any(|l| l.is_true_under(bits)))
            .count()
    }

    /// `dF/dx_v = 2 (A_v x_v - B_v)` for every variable.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (1..=self.num_vars as u32)
            .map(|v| {
                let p = self.coefficients(x, v);
                2.0 * (p.a * x[v as usize - 1] - p.b)
            })
            .collect()
    }
}

/// Checked wrapper around [`OccurrenceIndex::coefficients`].
pub fn coefficients(index: &OccurrenceIndex, x: &RelaxedPoint, var: u32) -> Result<CoefficientPair> {
    check_point(index, x)?;
    if var == 0 || var as usize > index.num_vars() {
        return Err(Error::VariableOutOfRange {
            var: var as usize,
            num_vars: index.num_vars(),
        });
    }
    Ok(index.coefficients(x.values(), var))
}

pub fn gradient(index: &OccurrenceIndex, x: &RelaxedPoint) -> Result<Vec<f64>> {
    check_point(index, x)?;
    Ok(index.gradient(x.values()))
}

fn check_point(index: &OccurrenceIndex, x: &RelaxedPoint) -> Result<()> {
    if x.len() != index.num_vars() {
        return Err(Error::LengthMismatch {
            expected: index.num_vars(),
            got: x.len(),
        });
    }
    Ok(())
}
