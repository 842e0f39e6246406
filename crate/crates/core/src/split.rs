//! Two-way clause split, concurrent part solves, and a merged warm start.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Cnf};
use crate::error::{Error, Result};
use crate::functional::{OccurrenceIndex, RelaxedPoint};
use crate::solver::{default_init, solve_indexed, SolveOutcome, SolverConfig};

/// Default number of interpolation steps between the componentwise min and max.
pub const DEFAULT_MERGE_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub part1: Cnf,
    pub part2: Cnf,
    /// `clause_map[c]` is 1 or 2.
    pub clause_map: Vec<u8>,
}

/// Balanced greedy partition of the clauses into two parts.
///
/// Clauses are visited in a seeded random order. Each goes to the part that
/// already mentions more of its variables, ties to the smaller part (then
/// part 1). A part holding `ceil(M/2)` clauses takes no more.
pub fn split(cnf: &Cnf, seed: u64) -> Result<SplitPlan> {
    let m = cnf.num_clauses();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {m} clause(s)")));
    }
    let cap = m.div_ceil(2);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut mentions = [vec![0u32; cnf.num_vars()], vec![0u32; cnf.num_vars()]];
    let mut sizes = [0usize; 2];
    let mut clause_map = vec![0u8; m];
    for c in order {
        let clause = &cnf.clauses()[c];
        let shared = |p: usize| {
            clause
                .literals()
                .iter()
                .filter(|l| mentions[p][l.index()] > 0)
                .count()
        };
        let part = if sizes[0] >= cap {
            1
        } else if sizes[1] >= cap {
            0
        } else {
            let (s0, s1) = (shared(0), shared(1));
            if s0 != s1 {
                usize::from(s1 > s0)
            } else {
                usize::from(sizes[1] < sizes[0])
            }
        };
        for lit in clause.literals() {
            mentions[part][lit.index()] += 1;
        }
        sizes[part] += 1;
        clause_map[c] = part as u8 + 1;
    }

    let pick = |p: u8| {
        cnf.clauses()
            .iter()
            .zip(&clause_map)
            .filter(|(_, &owner)| owner == p)
            .map(|(c, _)| c.clone())
            .collect::<Vec<_>>()
    };
    Ok(SplitPlan {
        part1: Cnf::new(cnf.num_vars(), pick(1))?,
        part2: Cnf::new(cnf.num_vars(), pick(2))?,
        clause_map,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeCandidateSet {
    /// `x^(0) .. x^(k)`, then `x1`, then `x2`.
    pub points: Vec<RelaxedPoint>,
    pub values: Vec<f64>,
    pub chosen: usize,
}

impl MergeCandidateSet {
    pub fn chosen_point(&self) -> &RelaxedPoint {
        &self.points[self.chosen]
    }

    pub fn chosen_value(&self) -> f64 {
        self.values[self.chosen]
    }
}

/// Interpolates from the componentwise min (`l = 0`) to max (`l = k`) of the
/// two part points, appends both endpoints, and picks the lowest functional
/// (first on ties).
pub fn merge_points(
    x1: &RelaxedPoint,
    x2: &RelaxedPoint,
    k: usize,
    index: &OccurrenceIndex,
) -> Result<MergeCandidateSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("merge steps must be at least 1".into()));
    }
    for x in [x1, x2] {
        if x.len() != index.num_vars() {
            return Err(Error::LengthMismatch {
                expected: index.num_vars(),
                got: x.len(),
            });
        }
    }
    let mut points: Vec<RelaxedPoint> = (0..=k)
        .map(|l| {
            let t = l as f64 / k as f64;
            RelaxedPoint::new(
                x1.values()
                    .iter()
                    .zip(x2.values())
                    .map(|(&a, &b)| a.min(b) + t * (a - b).abs())
                    .collect(),
            )
        })
        .collect();
    points.push(x1.clone());
    points.push(x2.clone());
    let values: Vec<f64> = points.iter().map(|p| index.evaluate(p.values())).collect();
    let mut chosen = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[chosen] {
            chosen = i;
        }
    }
    debug_assert!(values.iter().all(|&v| values[chosen] <= v));
    Ok(MergeCandidateSet {
        points,
        values,
        chosen,
    })
}

/// Seed for part `part` (1 or 2) derived from the run seed.
pub fn part_seed(seed: u64, part: u64) -> u64 {
    seed.wrapping_add(part).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelOutcome {
    pub part_outcomes: [SolveOutcome; 2],
    /// F of the whole CNF at the merged start.
    pub merged_f: f64,
    pub merge_choice: usize,
    pub whole: SolveOutcome,
}

impl ParallelOutcome {
    /// Larger of the two part sweep counts (the parts run side by side).
    pub fn part_sweeps(&self) -> u64 {
        self.part_outcomes[0]
            .sweeps_used
            .max(self.part_outcomes[1].sweeps_used)
    }

    pub fn whole_sweeps(&self) -> u64 {
        self.whole.sweeps_used
    }

    pub fn is_satisfied(&self) -> bool {
        self.whole.is_satisfied()
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        self.whole.assignment.as_ref()
    }
}

/// Final point of a part solve with variables the part never mentions reset
/// to 0.5: a part carries no information about them, and a neutral value lets
/// the min/max interpolation take them from the other part.
fn part_point(outcome: &SolveOutcome, index: &OccurrenceIndex) -> RelaxedPoint {
    let mut x = outcome.final_point.clone();
    for var in 1..=index.num_vars() as u32 {
        if index.occurrence_count(var) == 0 {
            x.set(var, 0.5);
        }
    }
    x
}

/// Splits, solves both parts on two threads, merges, and finishes on the
/// whole CNF from the merged point. Parts use seeds [`part_seed`]`(seed, 1|2)`
/// and the whole phase uses `config.seed`.
pub fn solve_parallel(cnf: &Cnf, config: &SolverConfig, k: usize) -> Result<ParallelOutcome> {
    config.validate()?;
    let plan = split(cnf, config.seed)?;
    let idx1 = OccurrenceIndex::new(&plan.part1);
    let idx2 = OccurrenceIndex::new(&plan.part2);
    let cfg1 = config.clone().with_seed(part_seed(config.seed, 1));
    let cfg2 = config.clone().with_seed(part_seed(config.seed, 2));

    let start = default_init(cnf.num_vars(), config);

    let (r1, r2) = std::thread::scope(|s| {
        let h1 = s.spawn(|| solve_indexed(&plan.part1, &idx1, &cfg1, Some(start.clone()), None));
        let h2 = s.spawn(|| solve_indexed(&plan.part2, &idx2, &cfg2, Some(start.clone()), None));
        (
            h1.join().expect("part 1 solver panicked"),
            h2.join().expect("part 2 solver panicked"),
        )
    });
    let (o1, o2) = (r1?, r2?);

    let index = OccurrenceIndex::new(cnf);
    let merge = merge_points(&part_point(&o1, &idx1), &part_point(&o2, &idx2), k, &index)?;
    let whole = solve_indexed(cnf, &index, config, Some(merge.chosen_point().clone()), None)?;
    Ok(ParallelOutcome {
        part_outcomes: [o1, o2],
        merged_f: merge.chosen_value(),
        merge_choice: merge.chosen,
        whole,
    })
}

/// F at the point a plain sequential solve would start from.
pub fn fresh_init_value(cnf: &Cnf, config: &SolverConfig) -> f64 {
    let index = OccurrenceIndex::new(cnf);
    index.evaluate(default_init(cnf.num_vars(), config).values())
}

/// Variables whose flip leaves the unsatisfied-clause count of `a` unchanged.
pub fn undetermined_variables(cnf: &Cnf, a: &Assignment) -> Result<Vec<u32>> {
    let base = cnf.count_unsatisfied(a)?;
    let mut bits = a.bits().to_vec();
    let mut out = Vec::new();
    for i in 0..bits.len() {
        bits[i] = !bits[i];
        if cnf.count_unsatisfied_bits(&bits) == base {
            out.push(i as u32 + 1);
        }
        bits[i] = !bits[i];
    }
    Ok(out)
}

/// One benchmark row: `benchmark, N, M, solved %, part iterations, whole iterations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTableRow {
    pub benchmark: String,
    pub n: usize,
    pub m: usize,
    pub solved_percent: f64,
    pub part_iterations: u64,
    pub whole_iterations: u64,
}
