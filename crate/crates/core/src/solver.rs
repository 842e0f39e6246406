//! Successive approximation with inertia ("SAI mix").
//!
//! One sweep visits variables in ascending order and moves each to its
//! fixed-point target `x_v <- B / A_bar`, where `B` is taken at the current,
//! partially updated point (Gauss-Seidel order) and `A_bar` blends `A` over
//! the last `K` iterates with the inertia weights. Every
//! `reflection_period` sweeps the whole point is reflected through its
//! targets (`x <- 2x - B/A`, Jacobi order). When the best functional value
//! stalls for `stagnation_window` sweeps the trajectory policy perturbs the
//! point. After every sweep the point is rounded and checked.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Cnf};
use crate::error::{Error, Result};
use crate::functional::{OccurrenceIndex, RelaxedPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrajectoryPolicy {
    None,
    /// Displace every variable of a falsified clause toward satisfying it.
    PerturbUnsat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// `alpha_0 .. alpha_{K-1}`; `K` is the length.
    pub inertia_weights: Vec<f64>,
    pub max_sweeps: u64,
    /// 0 disables reflection.
    pub reflection_period: u64,
    pub stagnation_window: u64,
    pub stagnation_epsilon: f64,
    pub trajectory_policy: TrajectoryPolicy,
    pub perturb_magnitude: f64,
    /// Every `restart_every`-th consecutive trajectory change without
    /// progress redraws the whole point instead of perturbing it. 0 never
    /// restarts.
    pub restart_every: u64,
    /// `A` at or below this value leaves the component unchanged.
    pub division_guard: f64,
    /// Half-width of the uniform noise around 0.5 for the default start.
    pub init_noise: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            inertia_weights: vec![0.6, 0.3, 0.1],
            max_sweeps: 10_000,
            reflection_period: 7,
            stagnation_window: 50,
            stagnation_epsilon: 1e-6,
            trajectory_policy: TrajectoryPolicy::PerturbUnsat,
            perturb_magnitude: 0.3,
            restart_every: 2,
            division_guard: 1e-12,
            init_noise: 0.1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn inertia_depth(&self) -> usize {
        self.inertia_weights.len()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_sweeps(mut self, max_sweeps: u64) -> Self {
        self.max_sweeps = max_sweeps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.inertia_weights.is_empty() {
            return bad("inertia depth must be at least 1".into());
        }
        if let Some(w) = self
            .inertia_weights
            .iter()
            .find(|w| !(0.0..=1.0).contains(*w))
        {
            return bad(format!("inertia weight {w} outside [0, 1]"));
        }
        let sum: f64 = self.inertia_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return bad(format!("inertia weights sum to {sum}, expected 1"));
        }
        if !(self.perturb_magnitude > 0.0 && self.perturb_magnitude <= 1.0) {
            return bad(format!(
                "perturb magnitude {} outside (0, 1]",
                self.perturb_magnitude
            ));
        }
        if !(0.0..=0.5).contains(&self.init_noise) {
            return bad(format!("init noise {} outside [0, 0.5]", self.init_noise));
        }
        if self.division_guard < 0.0 || self.stagnation_epsilon < 0.0 {
            return bad("guards must be non-negative".into());
        }
        Ok(())
    }
}

/// Iterate history plus the bookkeeping one solver run needs.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Front is the current iterate, then `x(t-1)`, ... (`K` entries).
    history: VecDeque<Vec<f64>>,
    pub sweep_count: u64,
    pub best_f: f64,
    pub best_point: RelaxedPoint,
    rng: ChaCha8Rng,
}

impl SolverState {
    pub fn new(init: RelaxedPoint, config: &SolverConfig) -> Self {
        let k = config.inertia_depth().max(1);
        let history = std::iter::repeat_with(|| init.values().to_vec())
            .take(k)
            .collect();
        SolverState {
            history,
            sweep_count: 0,
            best_f: f64::INFINITY,
            best_point: init,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    pub fn current(&self) -> &[f64] {
        &self.history[0]
    }

    pub fn point(&self) -> RelaxedPoint {
        RelaxedPoint::new(self.history[0].clone())
    }

    /// Replaces every history slot with `x`.
    pub fn reset_history(&mut self, x: &[f64]) {
        for slot in self.history.iter_mut() {
            slot.copy_from_slice(x);
        }
    }

    fn record_checkpoint(&mut self, value: f64) -> bool {
        if value < self.best_f {
            self.best_f = value;
            self.best_point = self.point();
            true
        } else {
            false
        }
    }
}

/// Component `v` is 1 iff `x_v >= 0.5`.
pub fn round_point(x: &RelaxedPoint) -> Assignment {
    x.round()
}

/// One Gauss-Seidel sweep of the inertia iteration.
pub fn sai_sweep(state: &mut SolverState, index: &OccurrenceIndex, config: &SolverConfig) {
    let weights = &config.inertia_weights;
    // lag 0 is the point being updated; lag p >= 1 is x(t - p)
    let mut current = state.history[0].clone();
    let lag = |p: usize| -> &[f64] { &state.history[p] };

    for v in 1..=index.num_vars() as u32 {
        if index.occurrence_count(v) == 0 {
            continue;
        }
        let pair = index.coefficients(&current, v);
        // sum_p w_p A_p written as A_0 + sum_p w_p (A_p - A_0), exact when all lags agree
        let mut a_bar = pair.a;
        for (p, &w) in weights.iter().enumerate().skip(1) {
            if w != 0.0 {
                a_bar += w * (index.a_coefficient(lag(p), v) - pair.a);
            }
        }
        if a_bar > config.division_guard {
            current[v as usize - 1] = (pair.b / a_bar).clamp(0.0, 1.0);
        }
    }
    state.history.push_front(current);
    state.history.truncate(weights.len());
    state.sweep_count += 1;
}

/// Reflects the current iterate through its fixed-point targets.
pub fn reflect(state: &mut SolverState, index: &OccurrenceIndex, config: &SolverConfig) {
    let before = state.history[0].clone();
    let current = &mut state.history[0];
    for v in 1..=index.num_vars() as u32 {
        let i = v as usize - 1;
        if let Some(target) = index.coefficients(&before, v).target(config.division_guard) {
            current[i] = (2.0 * before[i] - target).clamp(0.0, 1.0);
        }
    }
}

/// Applies the configured trajectory policy to the current iterate and
/// resets the history to the result. No-op when the rounded point already
/// satisfies the formula or the policy is `None`.
pub fn change_trajectory(state: &mut SolverState, index: &OccurrenceIndex, config: &SolverConfig) {
    if config.trajectory_policy == TrajectoryPolicy::None {
        return;
    }
    let bits: Vec<bool> = state.current().iter().map(|&x| x >= 0.5).collect();
    let falsified = index.unsatisfied_clauses(&bits);
    if falsified.is_empty() {
        return;
    }
    let mut x = state.current().to_vec();
    let mut moved = vec![false; x.len()];
    for c in falsified {
        for &lit in index.clause_literals(c) {
            let i = lit.index();
            if moved[i] {
                continue;
            }
            moved[i] = true;
            // (0, 1]
            let u = 1.0 - state.rng.gen::<f64>();
            let step = config.perturb_magnitude * u;
            x[i] = if lit.is_positive() { x[i] + step } else { x[i] - step }.clamp(0.0, 1.0);
        }
    }
    state.reset_history(&x);
}

/// Replaces the current iterate with a uniform draw from the unit cube and
/// resets the history.
pub fn restart(state: &mut SolverState) {
    let x: Vec<f64> = (0..state.current().len())
        .map(|_| state.rng.gen::<f64>())
        .collect();
    state.reset_history(&x);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Satisfied,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: u64,
    pub f: f64,
    pub unsat_count: usize,
    pub right_bit_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub assignment: Option<Assignment>,
    pub sweeps_used: u64,
    pub trace: Vec<SweepRecord>,
    /// Iterate at termination.
    pub final_point: RelaxedPoint,
    pub best_f: f64,
    pub trajectory_changes: u64,
}

impl SolveOutcome {
    pub fn is_satisfied(&self) -> bool {
        self.status == SolveStatus::Satisfied
    }
}

/// Default start: every component `0.5 + u`, `u` uniform in
/// `[-init_noise, init_noise)`, drawn from a stream seeded with `seed`.
pub fn default_init(num_vars: usize, config: &SolverConfig) -> RelaxedPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_1A17);
    let noise = config.init_noise;
    RelaxedPoint::new(
        (0..num_vars)
            .map(|_| 0.5 + noise * (2.0 * rng.gen::<f64>() - 1.0))
            .collect(),
    )
}

/// A per-sweep observer, e.g. the fraction of bits agreeing with a known plant.
pub type Probe<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

pub fn solve(cnf: &Cnf, config: &SolverConfig, init: Option<RelaxedPoint>) -> Result<SolveOutcome> {
    let index = OccurrenceIndex::new(cnf);
    solve_indexed(cnf, &index, config, init, None)
}

/// Full solver loop over a prebuilt index, with an optional trace probe.
pub fn solve_indexed(
    cnf: &Cnf,
    index: &OccurrenceIndex,
    config: &SolverConfig,
    init: Option<RelaxedPoint>,
    probe: Option<Probe<'_>>,
) -> Result<SolveOutcome> {
    config.validate()?;
    let init = match init {
        Some(x) if x.len() != cnf.num_vars() => {
            return Err(Error::LengthMismatch {
                expected: cnf.num_vars(),
                got: x.len(),
            })
        }
        Some(x) => x,
        None => default_init(cnf.num_vars(), config),
    };

    let mut state = SolverState::new(init, config);
    let mut trace = Vec::new();
    let mut trajectory_changes = 0;
    let mut reference = f64::INFINITY;
    let mut last_improvement = 0;
    let mut stalled_changes = 0;

    let mut sweep = 0;
    loop {
        let bits: Vec<bool> = state.current().iter().map(|&x| x >= 0.5).collect();
        let unsat = index.count_unsatisfied(&bits);
        let f = index.evaluate(state.current());
        trace.push(SweepRecord {
            sweep,
            f,
            unsat_count: unsat,
            right_bit_fraction: probe.map(|p| p(state.current())),
        });
        state.record_checkpoint(f);
        state.record_checkpoint(unsat as f64);

        if unsat == 0 {
            let assignment = Assignment::new(bits);
            let verified = cnf.count_unsatisfied(&assignment)?;
            assert_eq!(verified, 0, "solver reported a non-model as satisfying");
            return Ok(SolveOutcome {
                status: SolveStatus::Satisfied,
                assignment: Some(assignment),
                sweeps_used: sweep,
                trace,
                final_point: state.point(),
                best_f: state.best_f,
                trajectory_changes,
            });
        }
        if sweep >= config.max_sweeps {
            break;
        }

        if state.best_f < reference - config.stagnation_epsilon {
            reference = state.best_f;
            last_improvement = sweep;
            stalled_changes = 0;
        } else if config.trajectory_policy != TrajectoryPolicy::None
            && config.stagnation_window > 0
            && sweep - last_improvement >= config.stagnation_window
        {
            stalled_changes += 1;
            if config.restart_every > 0 && stalled_changes % config.restart_every == 0 {
                restart(&mut state);
            } else {
                change_trajectory(&mut state, index, config);
            }
            trajectory_changes += 1;
            last_improvement = sweep;
        }

        sai_sweep(&mut state, index, config);
        sweep += 1;
        if config.reflection_period > 0 && sweep % config.reflection_period == 0 {
            // checked first, so the reflected point is what the next sweep starts from
            let bits: Vec<bool> = state.current().iter().map(|&x| x >= 0.5).collect();
            if index.count_unsatisfied(&bits) != 0 {
                reflect(&mut state, index, config);
            }
        }
    }

    Ok(SolveOutcome {
        status: SolveStatus::BudgetExceeded,
        assignment: None,
        sweeps_used: config.max_sweeps,
        trace,
        final_point: state.point(),
        best_f: state.best_f,
        trajectory_changes,
    })
}

/// Writes a trace as CSV: `sweep,F,unsat_count,right_bit_fraction`.
pub fn write_trace_csv<W: Write>(trace: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep", "F", "unsat_count", "right_bit_fraction"])?;
    for r in trace {
        w.write_record([
            r.sweep.to_string(),
            format!("{}", r.f),
            r.unsat_count.to_string(),
            r.right_bit_fraction.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cnf_a() -> Cnf {
        Cnf::from_dimacs_clauses(2, &[&[1, 2], &[-1]])
    }

    fn k1() -> SolverConfig {
        SolverConfig {
            inertia_weights: vec![1.0],
            ..SolverConfig::default()
        }
    }

    #[test]
    fn round_point_examples() {
        assert_eq!(
            round_point(&RelaxedPoint::new(vec![0.49, 0.51])),
            Assignment::from_bits(&[0, 1])
        );
        assert_eq!(round_point(&RelaxedPoint::new(vec![0.5])), Assignment::from_bits(&[1]));
        let boolean = Assignment::from_bits(&[1, 0, 1]);
        assert_eq!(round_point(&RelaxedPoint::from_assignment(&boolean)), boolean);
    }

    #[test]
    fn sweep_example_cnf_a() {
        let cnf = cnf_a();
        let index = OccurrenceIndex::new(&cnf);
        let config = k1();
        let mut state = SolverState::new(RelaxedPoint::constant(2, 0.5), &config);
        sai_sweep(&mut state, &index, &config);
        let x = state.current();
        assert!((x[0] - 0.2).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
        assert!((index.evaluate(x) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inertia_matches_k1() {
        let cnf = crate::cnf::gen_uniform_3sat(12, 40, 5).unwrap();
        let index = OccurrenceIndex::new(&cnf);
        let init = default_init(12, &SolverConfig::default());
        let one = k1();
        let two = SolverConfig {
            inertia_weights: vec![1.0, 0.0],
            ..SolverConfig::default()
        };
        let mut a = SolverState::new(init.clone(), &one);
        let mut b = SolverState::new(init, &two);
        for _ in 0..10 {
            sai_sweep(&mut a, &index, &one);
            sai_sweep(&mut b, &index, &two);
            assert_eq!(a.current(), b.current());
        }
    }

    #[test]
    fn inertia_uses_lagged_points() {
        let cnf = cnf_a();
        let index = OccurrenceIndex::new(&cnf);
        let config = SolverConfig {
            inertia_weights: vec![0.5, 0.5],
            ..SolverConfig::default()
        };
        let mut state = SolverState::new(RelaxedPoint::constant(2, 0.5), &config);
        state.history[1] = vec![0.0, 0.0];
        sai_sweep(&mut state, &index, &config);
        // x1: B = 0.25 at (0.5, 0.5); A(0, 0) = (1 - 0)^2 + 1 = 2
        let expected_x1 = 0.25 / (0.5 * 1.25 + 0.5 * 2.0);
        assert!((state.current()[0] - expected_x1).abs() < 1e-12);
        // history shifted: lag 1 is now the pre-sweep point
        assert_eq!(state.history.len(), 2);
        assert_eq!(state.history[1], vec![0.5, 0.5]);
    }

    #[test]
    fn reflect_examples() {
        let cnf = cnf_a();
        let index = OccurrenceIndex::new(&cnf);
        let config = k1();
        let mut state = SolverState::new(RelaxedPoint::constant(2, 0.5), &config);
        reflect(&mut state, &index, &config);
        let x = state.current();
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert_eq!(x[1], 0.0);

        // (0, 1) is a fixed point: x1 target 0, x2 target 1
        let mut fixed = SolverState::new(RelaxedPoint::new(vec![0.0, 1.0]), &config);
        reflect(&mut fixed, &index, &config);
        assert_eq!(fixed.current(), &[0.0, 1.0]);

        // single clause (y1): target 1 from 0.2 gives 2*0.2 - 1 < 0, clamped
        let unit = Cnf::from_dimacs_clauses(1, &[&[1]]);
        let unit_index = OccurrenceIndex::new(&unit);
        let mut s = SolverState::new(RelaxedPoint::new(vec![0.2]), &config);
        reflect(&mut s, &unit_index, &config);
        assert_eq!(s.current(), &[0.0]);
    }

    #[test]
    fn change_trajectory_examples() {
        let cnf = cnf_a();
        let index = OccurrenceIndex::new(&cnf);
        let config = SolverConfig::default().with_seed(11);

        let mut sat = SolverState::new(RelaxedPoint::new(vec![0.1, 0.9]), &config);
        change_trajectory(&mut sat, &index, &config);
        assert_eq!(sat.current(), &[0.1, 0.9]);

        let run = |seed| {
            let config = SolverConfig::default().with_seed(seed);
            let mut s = SolverState::new(RelaxedPoint::new(vec![1.0, 0.0]), &config);
            change_trajectory(&mut s, &index, &config);
            s.current().to_vec()
        };
        let first = run(11);
        assert!(first[0] < 1.0 && first[0] >= 1.0 - 0.3);
        assert_eq!(first[1], 0.0);
        assert_eq!(first, run(11));

        let none = SolverConfig {
            trajectory_policy: TrajectoryPolicy::None,
            ..SolverConfig::default()
        };
        let mut s = SolverState::new(RelaxedPoint::new(vec![1.0, 0.0]), &none);
        change_trajectory(&mut s, &index, &none);
        assert_eq!(s.current(), &[1.0, 0.0]);
    }

    #[test]
    fn solve_cnf_a() {
        let out = solve(&cnf_a(), &SolverConfig::default(), Some(RelaxedPoint::constant(2, 0.5))).unwrap();
        assert_eq!(out.status, SolveStatus::Satisfied);
        assert!(out.sweeps_used <= 2);
        assert_eq!(out.assignment, Some(Assignment::from_bits(&[0, 1])));
    }

    #[test]
    fn solve_never_claims_unsat_formula() {
        let cnf = Cnf::from_dimacs_clauses(1, &[&[1], &[-1]]);
        let out = solve(&cnf, &SolverConfig::default().with_max_sweeps(500), None).unwrap();
        assert_eq!(out.status, SolveStatus::BudgetExceeded);
        assert!(out.assignment.is_none());
        assert_eq!(out.trace.len(), 501);
        assert!(out.trace.iter().all(|r| r.unsat_count == 1));
    }

    #[test]
    fn solve_rejects_bad_init_and_config() {
        assert!(solve(&cnf_a(), &SolverConfig::default(), Some(RelaxedPoint::constant(3, 0.5))).is_err());
        let bad = SolverConfig {
            inertia_weights: vec![0.5, 0.4],
            ..SolverConfig::default()
        };
        assert!(solve(&cnf_a(), &bad, None).is_err());
        let negative = SolverConfig {
            inertia_weights: vec![1.5, -0.5],
            ..SolverConfig::default()
        };
        assert!(negative.validate().is_err());
        assert!(SolverConfig { inertia_weights: vec![], ..SolverConfig::default() }.validate().is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let trace = vec![
            SweepRecord { sweep: 0, f: 0.5, unsat_count: 2, right_bit_fraction: None },
            SweepRecord { sweep: 1, f: 0.25, unsat_count: 0, right_bit_fraction: Some(0.75) },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "sweep,F,unsat_count,right_bit_fraction\n0,0.5,2,\n1,0.25,0,0.75\n"
        );
    }
}
