//! Split solving and benchmark campaigns checked against raw clause lists.

mod common;

use sai_core::bench::{run_campaign, CampaignMode, CampaignSpec, GeneratorKind, GeneratorSpec, InstanceSource};
use sai_core::cnf::gen_planted;
use sai_core::solver::SolverConfig;
use sai_core::split::{solve_parallel, split};

#[test]
fn split_partitions_every_clause_once() {
    for seed in 0..20 {
        let (cnf, _) = gen_planted(30, 120, seed).unwrap();
        let plan = split(&cnf, seed).unwrap();
        let (a, b) = (plan.part1.num_clauses(), plan.part2.num_clauses());
        assert_eq!(a + b, 120);
        assert!(a.abs_diff(b) <= 1);
        let mut raw = common::raw_clauses(&plan.part1);
        raw.extend(common::raw_clauses(&plan.part2));
        let mut whole = common::raw_clauses(&cnf);
        raw.iter_mut().chain(whole.iter_mut()).for_each(|c| c.sort());
        raw.sort();
        whole.sort();
        assert_eq!(raw, whole);
    }
}

#[test]
fn parallel_solutions_satisfy_the_whole_formula() {
    let config = SolverConfig { max_sweeps: 2_000, ..SolverConfig::default() };
    for seed in 0..10 {
        let (cnf, _) = gen_planted(40, 160, 500 + seed).unwrap();
        let out = solve_parallel(&cnf, &config.clone().with_seed(seed), 10).unwrap();
        if let Some(a) = out.assignment() {
            assert_eq!(common::unsat_count_raw(&common::raw_clauses(&cnf), a.bits()), 0);
        }
        assert!(out.merged_f.is_finite());
    }
}

fn spec(mode: CampaignMode) -> CampaignSpec {
    CampaignSpec {
        name: "planted".into(),
        source: InstanceSource::Generator(GeneratorSpec {
            kind: GeneratorKind::Planted,
            n_vars: 30,
            n_clauses: 120,
            count: 6,
            seed: 3,
            require_sat: false,
            oracle_budget: 1_000_000,
        }),
        solver: SolverConfig::default(),
        repetitions: 2,
        max_sweeps: Some(3_000),
        mode,
        timing: false,
        threads: 2,
        csv_path: None,
        json_path: None,
    }
}

#[test]
fn campaigns_are_reproducible_and_consistent() {
    for mode in [CampaignMode::Sequential, CampaignMode::split_default()] {
        let first = run_campaign(&spec(mode)).unwrap();
        let second = run_campaign(&spec(mode)).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.rows.len(), 12);
        assert_eq!(first.aggregates.rows, 12);
        assert!(first.aggregates.solved <= first.aggregates.eligible);
        if matches!(mode, CampaignMode::Split { .. }) {
            assert!(first.rows.iter().all(|r| r.part_sweeps.is_some()));
        }
    }
}
