//! Seeded random instance generators.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha
//! 0.3). Draws are taken as raw words so that the streams are easy to
//! reproduce elsewhere:
//!
//! * variable: `1 + next_u64() % n_vars`, redrawn while it repeats a
//!   variable already in the clause;
//! * sign: `next_u32() & 1 == 1` means positive;
//! * planted bit (drawn first, variables 1..=n in order): `next_u32() & 1`.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Assignment, Clause, Cnf, Literal};
use crate::error::{Error, Result};

fn random_clause(rng: &mut ChaCha8Rng, n_vars: usize, width: usize) -> Clause {
    let mut vars: Vec<u32> = Vec::with_capacity(width);
    while vars.len() < width {
        let v = 1 + (rng.next_u64() % n_vars as u64) as u32;
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    Clause::new(
        vars.into_iter()
            .map(|v| Literal::new(v, rng.next_u32() & 1 == 1)),
    )
}

/// Uniform random 3-SAT: `n_clauses` clauses over 3 distinct variables each.
pub fn gen_uniform_3sat(n_vars: usize, n_clauses: usize, seed: u64) -> Result<Cnf> {
    if n_vars < 3 {
        return Err(Error::InvalidArgument(format!(
            "uniform 3-SAT needs at least 3 variables, got {n_vars}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..n_clauses)
        .map(|_| random_clause(&mut rng, n_vars, 3))
        .collect();
    Cnf::new(n_vars, clauses)
}

/// Random 3-SAT with a planted solution: clauses falsified by the hidden
/// assignment are rejected and redrawn.
pub fn gen_planted(n_vars: usize, n_clauses: usize, seed: u64) -> Result<(Cnf, Assignment)> {
    if n_vars < 3 {
        return Err(Error::InvalidArgument(format!(
            "planted 3-SAT needs at least 3 variables, got {n_vars}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant = Assignment::new((0..n_vars).map(|_| rng.next_u32() & 1 == 1).collect());
    let mut clauses = Vec::with_capacity(n_clauses);
    while clauses.len() < n_clauses {
        let clause = random_clause(&mut rng, n_vars, 3);
        if clause.is_satisfied_by(plant.bits()) {
            clauses.push(clause);
        }
    }
    Ok((Cnf::new(n_vars, clauses)?, plant))
}
