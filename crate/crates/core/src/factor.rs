//! Factoring as satisfiability, and statistical key-bit recovery.
//!
//! [`encode`] builds a schoolbook (ripple-carry array) multiplier over
//! unknown factors `p` (`ceil(N/2)` bits) and `q` (`N - 1` bits) and pins the
//! product bits to the binary digits of `n`. Gate templates:
//!
//! * AND `m = a & b`: `(-m a) (-m b) (m -a -b)`;
//! * half adder: XOR as 4 clauses, carry as AND;
//! * full adder: three-input XOR as 8 clauses (one per input pattern),
//!   majority carry as 6 clauses `(-a -b c') (a b -c') ...` per input pair.
//!
//! Low bits `p0 = q0 = 1` are units (n is odd), `(p1 | p2 | ...)` excludes
//! `p = 1`, and every product bit at or above `N` is pinned to 0.
//!
//! Variables are numbered key bits first, interleaved from the least
//! significant end (`p0 q0 p1 q1 ...`), then the partial-product matrix
//! row by row, then adder outputs in creation order. Branching in the
//! oracle therefore fixes low bits first, which is what makes exhaustive
//! model enumeration cheap.

use std::io::Write;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Clause, Cnf, Literal};
use crate::error::{Error, Result};
use crate::functional::{OccurrenceIndex, RelaxedPoint};
use crate::solver::{sai_sweep, solve_indexed, SolverConfig, SolverState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    P,
    Q,
}

/// Named variable groups of a multiplier encoding (all 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMap {
    pub p_bits: Vec<u32>,
    pub q_bits: Vec<u32>,
    /// `partial[i][j]` is `m_ij = q_i & p_j`.
    pub partial: Vec<Vec<u32>>,
    pub sums: Vec<u32>,
    pub carries: Vec<u32>,
    /// Variables carrying the product bits, least significant first.
    pub product: Vec<u32>,
}

impl VarMap {
    pub fn key_var(&self, group: Group, position: usize) -> u32 {
        match group {
            Group::P => self.p_bits[position],
            Group::Q => self.q_bits[position],
        }
    }

    /// Every key bit as `(group, position, variable)`.
    pub fn key_bits(&self) -> impl Iterator<Item = (Group, usize, u32)> + '_ {
        let p = self.p_bits.iter().enumerate().map(|(i, &v)| (Group::P, i, v));
        let q = self.q_bits.iter().enumerate().map(|(i, &v)| (Group::Q, i, v));
        p.chain(q)
    }
}

#[derive(Debug, Clone)]
pub struct FactorInstance {
    pub n: BigUint,
    pub n_bits: usize,
    pub cnf: Cnf,
    pub varmap: VarMap,
    pub ground_truth: Option<(BigUint, BigUint)>,
}

struct Builder {
    next_var: u32,
    clauses: Vec<Clause>,
    sums: Vec<u32>,
    carries: Vec<u32>,
}

impl Builder {
    fn fresh(&mut self) -> u32 {
        self.next_var += 1;
        self.next_var
    }

    fn clause(&mut self, lits: &[(u32, bool)]) {
        self.clauses
            .push(Clause::new(lits.iter().map(|&(v, s)| Literal::new(v, s))));
    }

    fn and_gate(&mut self, out: u32, a: u32, b: u32) {
        self.clause(&[(out, false), (a, true)]);
        self.clause(&[(out, false), (b, true)]);
        self.clause(&[(out, true), (a, false), (b, false)]);
    }

    fn half_adder(&mut self, a: u32, b: u32) -> (u32, u32) {
        let s = self.fresh();
        let c = self.fresh();
        self.clause(&[(a, false), (b, false), (s, false)]);
        self.clause(&[(a, true), (b, true), (s, false)]);
        self.clause(&[(a, true), (b, false), (s, true)]);
        self.clause(&[(a, false), (b, true), (s, true)]);
        self.and_gate(c, a, b);
        self.sums.push(s);
        self.carries.push(c);
        (s, c)
    }

    fn full_adder(&mut self, a: u32, b: u32, cin: u32) -> (u32, u32) {
        let s = self.fresh();
        let c = self.fresh();
        for pattern in 0..8u8 {
            let (va, vb, vc) = (pattern & 1 == 1, pattern & 2 == 2, pattern & 4 == 4);
            let parity = va ^ vb ^ vc;
            // forbid (a, b, cin) = pattern with s != parity
            self.clause(&[(a, !va), (b, !vb), (cin, !vc), (s, parity)]);
        }
        for (x, y) in [(a, b), (a, cin), (b, cin)] {
            self.clause(&[(x, false), (y, false), (c, true)]);
            self.clause(&[(x, true), (y, true), (c, false)]);
        }
        self.sums.push(s);
        self.carries.push(c);
        (s, c)
    }
}

/// Widths `(P, Q)` of the factor registers for an `n_bits`-bit modulus.
pub fn factor_widths(n_bits: usize) -> (usize, usize) {
    (n_bits.div_ceil(2), n_bits - 1)
}

/// Encodes `p * q = n` as CNF.
pub fn encode(n: &BigUint) -> Result<FactorInstance> {
    if n < &BigUint::from(9u32) || !n.bit(0) {
        return Err(Error::InvalidArgument(format!(
            "modulus must be odd and at least 9, got {n}"
        )));
    }
    let n_bits = n.bits() as usize;
    let (p_width, q_width) = factor_widths(n_bits);

    let mut b = Builder {
        next_var: 0,
        clauses: Vec::new(),
        sums: Vec::new(),
        carries: Vec::new(),
    };
    let mut p_bits = vec![0; p_width];
    let mut q_bits = vec![0; q_width];
    for k in 0..p_width.max(q_width) {
        if k < p_width {
            p_bits[k] = b.fresh();
        }
        if k < q_width {
            q_bits[k] = b.fresh();
        }
    }
    let partial: Vec<Vec<u32>> = (0..q_width)
        .map(|_| (0..p_width).map(|_| b.fresh()).collect())
        .collect();

    b.clause(&[(p_bits[0], true)]);
    b.clause(&[(q_bits[0], true)]);
    let nontrivial: Vec<(u32, bool)> = p_bits[1..].iter().map(|&v| (v, true)).collect();
    b.clause(&nontrivial);

    for i in 0..q_width {
        for j in 0..p_width {
            b.and_gate(partial[i][j], q_bits[i], p_bits[j]);
        }
    }

    // running sum, bit k at index k
    let mut acc: Vec<u32> = partial[0].clone();
    for (i, row) in partial.iter().enumerate().skip(1) {
        let mut carry: Option<u32> = None;
        for (j, &m) in row.iter().enumerate() {
            let pos = i + j;
            let existing = acc.get(pos).copied();
            let (sum, next_carry) = match (existing, carry) {
                (Some(a), Some(c)) => {
                    let (s, co) = b.full_adder(a, m, c);
                    (s, Some(co))
                }
                (Some(a), None) | (None, Some(a)) => {
                    let (s, co) = b.half_adder(a, m);
                    (s, Some(co))
                }
                (None, None) => (m, None),
            };
            if pos < acc.len() {
                acc[pos] = sum;
            } else {
                acc.push(sum);
            }
            carry = next_carry;
        }
        if let Some(c) = carry {
            acc.push(c);
        }
    }

    for (k, &bit_var) in acc.iter().enumerate() {
        let want = k < n_bits && n.bit(k as u64);
        b.clause(&[(bit_var, want)]);
    }

    let cnf = Cnf::new(b.next_var as usize, b.clauses)?;
    Ok(FactorInstance {
        n: n.clone(),
        n_bits,
        cnf,
        varmap: VarMap {
            p_bits,
            q_bits,
            partial,
            sums: b.sums,
            carries: b.carries,
            product: acc,
        },
        ground_truth: None,
    })
}

impl FactorInstance {
    /// Encodes `p * q` and records the factors as ground truth. The smaller
    /// factor goes to the `p` register.
    pub fn from_factors(p: &BigUint, q: &BigUint) -> Result<Self> {
        let n = p * q;
        let mut inst = encode(&n)?;
        let (small, large) = if p <= q { (p, q) } else { (q, p) };
        let (pw, qw) = factor_widths(inst.n_bits);
        if small.bits() as usize > pw || large.bits() as usize > qw || small <= &BigUint::one() {
            return Err(Error::InvalidArgument(format!(
                "factors {small} x {large} do not fit the {pw}/{qw}-bit registers"
            )));
        }
        inst.ground_truth = Some((small.clone(), large.clone()));
        Ok(inst)
    }

    pub fn p_width(&self) -> usize {
        self.varmap.p_bits.len()
    }

    pub fn q_width(&self) -> usize {
        self.varmap.q_bits.len()
    }

    pub fn key_bit_count(&self) -> usize {
        self.p_width() + self.q_width()
    }

    /// True key bits for both register orientations: `(p, q)` and `(q, p)`,
    /// each as `(p-register bits, q-register bits)`. Bits beyond a factor's
    /// length are 0.
    fn truth_orientations(&self) -> Result<[(Vec<bool>, Vec<bool>); 2]> {
        let (p, q) = self.ground_truth.as_ref().ok_or(Error::NoGroundTruth)?;
        let bits = |v: &BigUint, w: usize| (0..w).map(|k| v.bit(k as u64)).collect::<Vec<_>>();
        let (pw, qw) = (self.p_width(), self.q_width());
        Ok([(bits(p, pw), bits(q, qw)), (bits(q, pw), bits(p, qw))])
    }
}

fn read_bits(vars: &[u32], a: &Assignment) -> BigUint {
    let mut value = BigUint::zero();
    for (k, &v) in vars.iter().enumerate() {
        if a.value(v) {
            value.set_bit(k as u64, true);
        }
    }
    value
}

/// Smallest factor of `n > 1` by trial division.
pub fn smallest_factor(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut d = 3u64;
    while d <= n / d {
        if n.is_multiple_of(d) {
            return d;
        }
        d += 2;
    }
    n
}

pub fn is_prime(n: u64) -> bool {
    n > 1 && smallest_factor(n) == n
}

/// Seeded balanced semiprime with exactly `bits` bits (`8 <= bits <= 64`):
/// two odd primes of about `bits / 2` bits each, drawn uniformly until the
/// product has the requested length.
pub fn random_semiprime(bits: u32, seed: u64) -> Result<(u64, u64)> {
    use rand::{Rng, SeedableRng};
    if !(8..=64).contains(&bits) {
        return Err(Error::InvalidArgument(format!("semiprime width {bits} outside 8..=64")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let half = bits / 2;
    let prime_in = |rng: &mut rand_chacha::ChaCha8Rng, width: u32| loop {
        let c = rng.gen_range(1u64 << (width - 1)..1u64 << width) | 1;
        if c > 2 && is_prime(c) {
            return c;
        }
    };
    loop {
        let p = prime_in(&mut rng, half);
        let q = prime_in(&mut rng, bits - half);
        let n = p as u128 * q as u128;
        if n >> (bits - 1) == 1 && p != q {
            return Ok((p.min(q), p.max(q)));
        }
    }
}

/// Reads the factors off a model.
pub fn decode(a: &Assignment, inst: &FactorInstance) -> Result<(BigUint, BigUint)> {
    let unsatisfied = inst.cnf.count_unsatisfied(a)?;
    if unsatisfied > 0 {
        return Err(Error::NotAModel { unsatisfied });
    }
    let p = read_bits(&inst.varmap.p_bits, a);
    let q = read_bits(&inst.varmap.q_bits, a);
    assert_eq!(&p * &q, inst.n, "model decodes to a wrong factorization");
    Ok((p, q))
}

/// One determination of one key bit, or the aggregate of several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitVote {
    pub group: Group,
    pub position: usize,
    pub predicted: bool,
    pub votes_for: usize,
    pub votes_total: usize,
    pub confidence: f64,
}

impl BitVote {
    fn single(group: Group, position: usize, predicted: bool) -> Self {
        BitVote {
            group,
            position,
            predicted,
            votes_for: 1,
            votes_total: 1,
            confidence: 1.0,
        }
    }
}

/// Winner's squared distance must be at most this fraction of the loser's.
pub const CLUSTER_MARGIN: f64 = 0.5;

/// Classifies `values` as the zero vector or `pattern`; `None` inside the margin.
fn classify(values: &[f64], pattern: &[bool]) -> Option<bool> {
    let d_zero: f64 = values.iter().map(|v| v * v).sum();
    let d_pattern: f64 = values
        .iter()
        .zip(pattern)
        .map(|(v, &b)| {
            let d = v - if b { 1.0 } else { 0.0 };
            d * d
        })
        .sum();
    if d_pattern < d_zero && d_pattern <= CLUSTER_MARGIN * d_zero {
        Some(true)
    } else if d_zero < d_pattern && d_zero <= CLUSTER_MARGIN * d_pattern {
        Some(false)
    } else {
        None
    }
}

/// Test 1: clustering of the long-multiplication matrix.
///
/// Row `i` of the matrix is `p` when `q_i = 1` and zero otherwise; column
/// `j` is `q` when `p_j = 1`. Each relaxed row is compared with the zero
/// vector and with the rounded `p` register (columns: rounded `q`), and a
/// vote is cast only when one pattern is clearly nearer.
pub fn matrix_cluster_test(x: &RelaxedPoint, inst: &FactorInstance) -> Vec<BitVote> {
    let vm = &inst.varmap;
    let p_hat: Vec<bool> = vm.p_bits.iter().map(|&v| x.value(v) >= 0.5).collect();
    let q_hat: Vec<bool> = vm.q_bits.iter().map(|&v| x.value(v) >= 0.5).collect();
    let mut votes = Vec::new();
    for (i, row) in vm.partial.iter().enumerate() {
        let values: Vec<f64> = row.iter().map(|&m| x.value(m)).collect();
        if let Some(bit) = classify(&values, &p_hat) {
            votes.push(BitVote::single(Group::Q, i, bit));
        }
    }
    for j in 0..inst.p_width() {
        let values: Vec<f64> = vm.partial.iter().map(|row| x.value(row[j])).collect();
        if let Some(bit) = classify(&values, &q_hat) {
            votes.push(BitVote::single(Group::P, j, bit));
        }
    }
    votes
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalComparison {
    /// `None` when both values tie (including both infinite).
    pub predicted: Option<bool>,
    /// Settled functional with the bit fixed to 0 (`inf` on conflict).
    pub f0: f64,
    pub f1: f64,
}

/// Test 2: fix variable `var` to each value, settle with `settle_sweeps` SAI
/// sweeps from `x`, and predict the value with the smaller functional.
pub fn functional_comparison_test(
    inst: &FactorInstance,
    x: &RelaxedPoint,
    var: u32,
    settle_sweeps: u64,
    config: &SolverConfig,
) -> Result<FunctionalComparison> {
    let is_key = inst.varmap.p_bits.contains(&var) || inst.varmap.q_bits.contains(&var);
    if !is_key {
        return Err(Error::InvalidArgument(format!("variable {var} is not a key bit")));
    }
    let mut f = [f64::INFINITY; 2];
    for value in [false, true] {
        let Some(cnf) = inst.cnf.condition(Literal::new(var, value))?.into_cnf() else {
            continue;
        };
        let index = OccurrenceIndex::new(&cnf);
        let mut start = x.clone();
        start.set(var, if value { 1.0 } else { 0.0 });
        let mut state = SolverState::new(start, config);
        for _ in 0..settle_sweeps {
            sai_sweep(&mut state, &index, config);
        }
        f[usize::from(value)] = index.evaluate(state.current());
    }
    let predicted = if f[0] < f[1] {
        Some(false)
    } else if f[1] < f[0] {
        Some(true)
    } else {
        None
    };
    Ok(FunctionalComparison {
        predicted,
        f0: f[0],
        f1: f[1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSet {
    pub matrix: bool,
    pub functional: bool,
}

impl TestSet {
    pub const BOTH: TestSet = TestSet {
        matrix: true,
        functional: true,
    };
    pub const MATRIX: TestSet = TestSet {
        matrix: true,
        functional: false,
    };
}

/// Mean functional values for one key bit across runs (Table-4 shape).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRow {
    pub group: Group,
    pub position: usize,
    pub mean_f0: f64,
    pub mean_f1: f64,
    /// With ground truth: mean F with the right value minus with the wrong one.
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitTestReport {
    pub runs: usize,
    /// Sorted by confidence, descending; then by group and position.
    pub votes: Vec<BitVote>,
    /// Fraction of voted positions predicted right (better orientation).
    pub accuracy: Option<f64>,
    pub functional: Vec<FunctionalRow>,
}

/// Fraction of key bits of `round(x)` equal to the true factor bits, taking
/// the better of the two register orientations.
pub fn right_bit_fraction(x: &RelaxedPoint, inst: &FactorInstance) -> Result<f64> {
    right_bit_fraction_raw(x.values(), inst)
}

fn right_bit_fraction_raw(x: &[f64], inst: &FactorInstance) -> Result<f64> {
    let truths = inst.truth_orientations()?;
    let vm = &inst.varmap;
    let total = inst.key_bit_count() as f64;
    let best = truths
        .iter()
        .map(|(tp, tq)| {
            let hits = vm
                .p_bits
                .iter()
                .zip(tp)
                .chain(vm.q_bits.iter().zip(tq))
                .filter(|(&v, &t)| (x[v as usize - 1] >= 0.5) == t)
                .count();
            hits as f64 / total
        })
        .fold(0.0, f64::max);
    Ok(best)
}

/// Solves `inst.cnf` once with the given config, tracing the right-bit
/// fraction per sweep when ground truth is known.
pub fn traced_run(inst: &FactorInstance, config: &SolverConfig) -> Result<crate::solver::SolveOutcome> {
    let index = OccurrenceIndex::new(&inst.cnf);
    let probe = |x: &[f64]| right_bit_fraction_raw(x, inst).unwrap_or(f64::NAN);
    let probe_ref: &(dyn Fn(&[f64]) -> f64 + Sync) = &probe;
    solve_indexed(
        &inst.cnf,
        &index,
        config,
        None,
        inst.ground_truth.is_some().then_some(probe_ref),
    )
}

fn accuracy_of(votes: &[BitVote], inst: &FactorInstance) -> Option<f64> {
    let truths = inst.truth_orientations().ok()?;
    let voted: Vec<&BitVote> = votes.iter().filter(|v| v.votes_total > 0).collect();
    if voted.is_empty() {
        return None;
    }
    let best = truths
        .iter()
        .map(|(tp, tq)| {
            voted
                .iter()
                .filter(|v| {
                    let truth = match v.group {
                        Group::P => tp[v.position],
                        Group::Q => tq[v.position],
                    };
                    v.predicted == truth
                })
                .count()
        })
        .max()
        .unwrap();
    Some(best as f64 / voted.len() as f64)
}

/// Majority aggregation of single votes per key bit.
pub fn aggregate_votes(inst: &FactorInstance, singles: &[BitVote]) -> Vec<BitVote> {
    let mut ones = vec![0usize; inst.key_bit_count()];
    let mut totals = vec![0usize; inst.key_bit_count()];
    let slot = |g: Group, pos: usize| match g {
        Group::P => pos,
        Group::Q => inst.p_width() + pos,
    };
    for v in singles {
        let s = slot(v.group, v.position);
        totals[s] += v.votes_total;
        if v.predicted {
            ones[s] += v.votes_for;
        } else {
            ones[s] += v.votes_total - v.votes_for;
        }
    }
    let mut out: Vec<BitVote> = inst
        .varmap
        .key_bits()
        .map(|(group, position, _)| {
            let s = slot(group, position);
            let (total, one) = (totals[s], ones[s]);
            let predicted = one * 2 > total;
            let votes_for = if predicted { one } else { total - one };
            BitVote {
                group,
                position,
                predicted,
                votes_for,
                votes_total: total,
                confidence: if total == 0 { 0.0 } else { votes_for as f64 / total as f64 },
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.votes_for.cmp(&a.votes_for))
            .then(a.group.cmp(&b.group))
            .then(a.position.cmp(&b.position))
    });
    out
}

/// One vote per key bit for a single run: the majority of that run's test
/// votes, none when they tie.
fn fold_run_votes(inst: &FactorInstance, singles: &[BitVote]) -> Vec<BitVote> {
    aggregate_votes(inst, singles)
        .into_iter()
        .filter(|v| v.votes_total > 0 && 2 * v.votes_for > v.votes_total)
        .map(|v| BitVote::single(v.group, v.position, v.predicted))
        .collect()
}

/// Sweeps used to settle each branch of the functional comparison in [`vote`].
pub const DEFAULT_SETTLE_SWEEPS: u64 = 5;

/// Runs `runs` independent solver restarts (seeds `config.seed + r`) and
/// aggregates the enabled tests' votes on every key bit. Each run casts at
/// most one vote per bit, so `votes_total <= runs`.
pub fn vote(inst: &FactorInstance, runs: usize, config: &SolverConfig, tests: TestSet) -> Result<BitTestReport> {
    vote_with_settle(inst, runs, config, tests, DEFAULT_SETTLE_SWEEPS)
}

pub fn vote_with_settle(
    inst: &FactorInstance,
    runs: usize,
    config: &SolverConfig,
    tests: TestSet,
    settle_sweeps: u64,
) -> Result<BitTestReport> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    config.validate()?;
    let index = OccurrenceIndex::new(&inst.cnf);
    let keys: Vec<(Group, usize, u32)> = inst.varmap.key_bits().collect();

    type RunResult = (Vec<BitVote>, Vec<FunctionalComparison>);
    let per_run: Vec<Result<RunResult>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let cfg = config.clone().with_seed(config.seed.wrapping_add(r as u64));
            let outcome = solve_indexed(&inst.cnf, &index, &cfg, None, None)?;
            let x = outcome.final_point;
            let mut singles = Vec::new();
            let mut comparisons = Vec::new();
            if tests.matrix {
                singles.extend(matrix_cluster_test(&x, inst));
            }
            if tests.functional {
                for &(group, position, var) in &keys {
                    let cmp = functional_comparison_test(inst, &x, var, settle_sweeps, &cfg)?;
                    if let Some(bit) = cmp.predicted {
                        singles.push(BitVote::single(group, position, bit));
                    }
                    comparisons.push(cmp);
                }
            }
            Ok((fold_run_votes(inst, &singles), comparisons))
        })
        .collect();

    let mut singles = Vec::new();
    let mut comparisons: Vec<Vec<FunctionalComparison>> = Vec::new();
    for r in per_run {
        let (s, c) = r?;
        singles.extend(s);
        comparisons.push(c);
    }
    let votes = aggregate_votes(inst, &singles);
    let accuracy = accuracy_of(&votes, inst);

    let functional = if tests.functional {
        let truth = inst.truth_orientations().ok();
        keys.iter()
            .enumerate()
            .map(|(k, &(group, position, _))| {
                let finite = |f: f64| if f.is_finite() { Some(f) } else { None };
                let mean = |pick: fn(&FunctionalComparison) -> f64| {
                    let vals: Vec<f64> = comparisons.iter().filter_map(|c| finite(pick(&c[k]))).collect();
                    if vals.is_empty() {
                        f64::INFINITY
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    }
                };
                let (mean_f0, mean_f1) = (mean(|c| c.f0), mean(|c| c.f1));
                let difference = truth.as_ref().map(|t| {
                    let right = match group {
                        Group::P => t[0].0[position],
                        Group::Q => t[0].1[position],
                    };
                    if right {
                        mean_f1 - mean_f0
                    } else {
                        mean_f0 - mean_f1
                    }
                });
                FunctionalRow {
                    group,
                    position,
                    mean_f0,
                    mean_f1,
                    difference,
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(BitTestReport {
        runs,
        votes,
        accuracy,
        functional,
    })
}

/// One row of the determined-bits summary: how many key bits were decided
/// the same way in exactly `determined_in` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminationRow {
    pub determined_in: usize,
    pub determined_percent: f64,
    pub bit_count: usize,
    pub bit_percent: f64,
}

pub fn determination_table(report: &BitTestReport, key_bits: usize) -> Vec<DeterminationRow> {
    let mut counts = std::collections::BTreeMap::new();
    for v in report.votes.iter().filter(|v| v.votes_for > 0) {
        *counts.entry(v.votes_for).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .rev()
        .map(|(determined_in, bit_count)| DeterminationRow {
            determined_in,
            determined_percent: round2(100.0 * determined_in as f64 / report.runs as f64),
            bit_count,
            bit_percent: round2(100.0 * bit_count as f64 / key_bits as f64),
        })
        .collect()
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn group_name(g: Group) -> &'static str {
    match g {
        Group::P => "p",
        Group::Q => "q",
    }
}

/// Determined-bits table as CSV.
pub fn write_determination_csv<W: Write>(rows: &[DeterminationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["determined_in", "determined_percent", "bit_count", "bit_percent"])?;
    for r in rows {
        w.write_record([
            r.determined_in.to_string(),
            format!("{:.2}", r.determined_percent),
            r.bit_count.to_string(),
            format!("{:.2}", r.bit_percent),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-bit votes as CSV.
pub fn write_votes_csv<W: Write>(votes: &[BitVote], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "position", "predicted", "votes_for", "votes_total", "confidence"])?;
    for v in votes {
        w.write_record([
            group_name(v.group).to_string(),
            v.position.to_string(),
            u8::from(v.predicted).to_string(),
            v.votes_for.to_string(),
            v.votes_total.to_string(),
            format!("{:.4}", v.confidence),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Functional-comparison table as CSV: `group,position,f_right,f_wrong,difference`
/// when ground truth is known, `f0,f1` otherwise.
pub fn write_functional_csv<W: Write>(rows: &[FunctionalRow], inst: &FactorInstance, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let truth = inst.truth_orientations().ok();
    match &truth {
        Some(_) => w.write_record(["group", "position", "f_right", "f_wrong", "difference"])?,
        None => w.write_record(["group", "position", "f0", "f1"])?,
    }
    for r in rows {
        let mut record = vec![group_name(r.group).to_string(), r.position.to_string()];
        match &truth {
            Some(t) => {
                let right = match r.group {
                    Group::P => t[0].0[r.position],
                    Group::Q => t[0].1[r.position],
                };
                let (fr, fw) = if right { (r.mean_f1, r.mean_f0) } else { (r.mean_f0, r.mean_f1) };
                record.push(format!("{fr:.4}"));
                record.push(format!("{fw:.4}"));
                record.push(format!("{:.4}", fr - fw));
            }
            None => {
                record.push(format!("{:.4}", r.mean_f0));
                record.push(format!("{:.4}", r.mean_f1));
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Partial-product matrix snapshot: one CSV row per `q_i`, one column per `p_j`.
pub fn write_matrix_csv<W: Write>(x: &RelaxedPoint, inst: &FactorInstance, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string()];
    header.extend((0..inst.p_width()).map(|j| format!("p{j}")));
    w.write_record(&header)?;
    for (i, row) in inst.varmap.partial.iter().enumerate() {
        let mut record = vec![format!("q{i}")];
        record.extend(row.iter().map(|&m| format!("{:.4}", x.value(m))));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Assignment that sets the key bits to `(p, q)` and every auxiliary
/// variable to the value the circuit computes.
pub fn ground_truth_assignment(inst: &FactorInstance) -> Result<Assignment> {
    let (p, q) = inst.ground_truth.as_ref().ok_or(Error::NoGroundTruth)?;
    let mut cnf = inst.cnf.clone();
    for (group, position, var) in inst.varmap.key_bits() {
        let bit = match group {
            Group::P => p.bit(position as u64),
            Group::Q => q.bit(position as u64),
        };
        cnf = match cnf.condition(Literal::new(var, bit))?.into_cnf() {
            Some(c) => c,
            None => return Err(Error::Internal("ground truth contradicts the encoding".into())),
        };
    }
    let (_, stack) = crate::preprocess::unit_propagate(&cnf)
        .map_err(|_| Error::Internal("ground truth contradicts the encoding".into()))?;
    let mut a = Assignment::all_false(inst.cnf.num_vars());
    for (group, position, var) in inst.varmap.key_bits() {
        let bit = match group {
            Group::P => p.bit(position as u64),
            Group::Q => q.bit(position as u64),
        };
        a.set(var, bit);
    }
    for step in &stack.steps {
        if let crate::preprocess::ReconstructionStep::UnitFixed { var, value } = step {
            a.set(*var, *value);
        }
    }
    if !inst.cnf.is_satisfied_by(&a) {
        return Err(Error::Internal("circuit propagation left variables open".into()));
    }
    Ok(a)
}
