//! Independent oracles shared by the integration and acceptance suites.
//! Nothing here calls into the evaluation code under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sai_core::cnf::{Clause, Cnf, Literal};

/// Clauses as signed integers, read straight from the public clause list.
pub fn raw_clauses(cnf: &Cnf) -> Vec<Vec<i64>> {
    cnf.clauses()
        .iter()
        .map(|c| c.literals().iter().map(|l| l.to_dimacs()).collect())
        .collect()
}

pub fn unsat_count_raw(clauses: &[Vec<i64>], bits: &[bool]) -> usize {
    clauses
        .iter()
        .filter(|c| {
            !c.iter().any(|&l| {
                let v = bits[(l.unsigned_abs() - 1) as usize];
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
        .count()
}

/// All satisfying assignments by exhaustive enumeration (`n <= 20`).
pub fn brute_force_models(cnf: &Cnf) -> Vec<Vec<bool>> {
    let n = cnf.num_vars();
    assert!(n <= 20, "brute force limited to 20 variables");
    let clauses = raw_clauses(cnf);
    (0u32..1 << n)
        .map(|mask| (0..n).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|bits| unsat_count_raw(&clauses, bits) == 0)
        .collect()
}

pub fn brute_force_sat(cnf: &Cnf) -> bool {
    let n = cnf.num_vars();
    let clauses = raw_clauses(cnf);
    (0u32..1 << n).any(|mask| {
        let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        unsat_count_raw(&clauses, &bits) == 0
    })
}

/// Direct transcription of the functional: sum over clauses of the product
/// of `(1 - x)^2` for positive and `x^2` for negative literals.
pub fn functional_raw(clauses: &[Vec<i64>], x: &[f64]) -> f64 {
    clauses
        .iter()
        .map(|c| {
            c.iter()
                .map(|&l| {
                    let v = x[(l.unsigned_abs() - 1) as usize];
                    if l > 0 {
                        (1.0 - v) * (1.0 - v)
                    } else {
                        v * v
                    }
                })
                .product::<f64>()
        })
        .sum()
}

/// Random CNF with clause widths `1..=max_width`; literals may repeat or
/// clash within a clause (the constructor dedups, tautologies stay).
pub fn random_cnf(rng: &mut ChaCha8Rng, n: usize, m: usize, max_width: usize) -> Cnf {
    let clauses = (0..m)
        .map(|_| {
            let w = rng.gen_range(1..=max_width);
            Clause::new((0..w).map(|_| Literal::new(rng.gen_range(1..=n as u32), rng.gen())))
        })
        .collect();
    Cnf::new(n, clauses).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nontrivial factor pairs `(a, b)` with `a <= b`, `a * b = n`, by trial division.
pub fn factor_pairs(n: u64) -> Vec<(u64, u64)> {
    (2..)
        .take_while(|d| d * d <= n)
        .filter(|d| n.is_multiple_of(*d))
        .map(|d| (d, n / d))
        .collect()
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factor_pairs(n).is_empty()
}
