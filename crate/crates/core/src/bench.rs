//! Solver campaigns: instance sources, a worker pool of isolated runs, and
//! CSV/JSON reports.
//!
//! Reports embed the full campaign spec. Wall time is recorded only when
//! `timing` is set, so an untimed rerun of the same spec is byte-identical.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnf::{gen_planted, gen_uniform_3sat, parse_dimacs, Cnf};
use crate::error::{Error, Result};
use crate::oracle::{dpll_solve, OracleStatus};
use crate::solver::{solve, SolverConfig};
use crate::split::{solve_parallel, DEFAULT_MERGE_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Uniform,
    Planted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n_vars: usize,
    pub n_clauses: usize,
    pub count: usize,
    pub seed: u64,
    /// Keep only oracle-verified satisfiable instances (uniform only; seeds
    /// advance past rejected draws).
    #[serde(default)]
    pub require_sat: bool,
    #[serde(default = "default_oracle_budget")]
    pub oracle_budget: u64,
}

fn default_oracle_budget() -> u64 {
    10_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Files(Vec<PathBuf>),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignMode {
    #[default]
    Sequential,
    Split { merge_steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub name: String,
    pub source: InstanceSource,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Overrides `solver.max_sweeps` when set.
    #[serde(default)]
    pub max_sweeps: Option<u64>,
    #[serde(default)]
    pub mode: CampaignMode,
    #[serde(default)]
    pub timing: bool,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub json_path: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl CampaignSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CampaignSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be positive".into()));
        }
        if self.max_sweeps == Some(0) {
            return Err(Error::InvalidArgument("max_sweeps must be positive".into()));
        }
        if let CampaignMode::Split { merge_steps: 0 } = self.mode {
            return Err(Error::InvalidArgument("merge_steps must be positive".into()));
        }
        match &self.source {
            InstanceSource::Files(files) => {
                if let Some(missing) = files.iter().find(|p| !p.exists()) {
                    return Err(Error::InvalidArgument(format!(
                        "instance file {} does not exist",
                        missing.display()
                    )));
                }
            }
            InstanceSource::Generator(g) => {
                if g.count == 0 {
                    return Err(Error::InvalidArgument("generator count must be positive".into()));
                }
            }
        }
        self.solver_config(0).validate()
    }

    fn solver_config(&self, seed: u64) -> SolverConfig {
        let mut cfg = self.solver.clone().with_seed(seed);
        if let Some(budget) = self.max_sweeps {
            cfg.max_sweeps = budget;
        }
        cfg
    }
}

#[derive(Debug, Clone)]
struct Instance {
    name: String,
    cnf: std::result::Result<Cnf, String>,
    known_sat: Option<bool>,
}

fn load_instances(spec: &CampaignSpec) -> Result<Vec<Instance>> {
    match &spec.source {
        InstanceSource::Files(files) => Ok(files
            .iter()
            .map(|path| Instance {
                name: path.display().to_string(),
                cnf: std::fs::read_to_string(path)
                    .map_err(|e| e.to_string())
                    .and_then(|text| parse_dimacs(&text).map_err(|e| e.to_string())),
                known_sat: None,
            })
            .collect()),
        InstanceSource::Generator(g) => {
            let mut out = Vec::with_capacity(g.count);
            let mut seed = g.seed;
            let mut draws = 0usize;
            while out.len() < g.count {
                draws += 1;
                if draws > g.count.saturating_mul(1000) {
                    return Err(Error::InvalidArgument(
                        "generator produced too few satisfiable instances".into(),
                    ));
                }
                let (cnf, known_sat) = match g.kind {
                    GeneratorKind::Planted => (gen_planted(g.n_vars, g.n_clauses, seed)?.0, Some(true)),
                    GeneratorKind::Uniform => {
                        let cnf = gen_uniform_3sat(g.n_vars, g.n_clauses, seed)?;
                        if g.require_sat {
                            match dpll_solve(&cnf, g.oracle_budget).status {
                                OracleStatus::Sat => (cnf, Some(true)),
                                _ => {
                                    seed += 1;
                                    continue;
                                }
                            }
                        } else {
                            (cnf, None)
                        }
                    }
                };
                let prefix = match g.kind {
                    GeneratorKind::Planted => "planted",
                    GeneratorKind::Uniform => "uf",
                };
                out.push(Instance {
                    name: format!("{prefix}{}-{}-s{seed}", g.n_vars, g.n_clauses),
                    cnf: Ok(cnf),
                    known_sat,
                });
                seed += 1;
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowStatus {
    Satisfied,
    BudgetExceeded,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub repetition: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub sweeps: u64,
    /// Split mode: larger of the two part-phase sweep counts.
    pub part_sweeps: Option<u64>,
    /// Split mode: sweeps of the whole-CNF phase.
    pub whole_sweeps: Option<u64>,
    pub wall_ms: Option<f64>,
    pub known_sat: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignAggregates {
    pub rows: usize,
    /// Rows counted in `solved_percent`: known satisfiable or solved.
    pub eligible: usize,
    pub solved: usize,
    pub solved_percent: f64,
    pub max_sweeps: Option<u64>,
    pub median_sweeps: Option<f64>,
    pub max_part_sweeps: Option<u64>,
    pub max_whole_sweeps: Option<u64>,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub spec: CampaignSpec,
    pub rows: Vec<CampaignRow>,
    pub aggregates: CampaignAggregates,
}

/// Seed of repetition `rep` of instance `i`.
pub fn row_seed(base: u64, instance: usize, repetitions: usize, rep: usize) -> u64 {
    base.wrapping_add((instance * repetitions + rep) as u64)
}

fn run_row(spec: &CampaignSpec, inst: &Instance, i: usize, rep: usize) -> CampaignRow {
    let seed = row_seed(spec.solver.seed, i, spec.repetitions, rep);
    let mut row = CampaignRow {
        name: inst.name.clone(),
        n: 0,
        m: 0,
        repetition: rep,
        seed,
        status: RowStatus::Error,
        sweeps: 0,
        part_sweeps: None,
        whole_sweeps: None,
        wall_ms: None,
        known_sat: inst.known_sat,
        error: None,
    };
    let cnf = match &inst.cnf {
        Ok(cnf) => cnf,
        Err(e) => {
            row.error = Some(e.clone());
            return row;
        }
    };
    row.n = cnf.num_vars();
    row.m = cnf.num_clauses();
    let cfg = spec.solver_config(seed);
    let start = Instant::now();
    let result = match spec.mode {
        CampaignMode::Sequential => solve(cnf, &cfg, None).map(|o| (o.is_satisfied(), o.sweeps_used, None)),
        CampaignMode::Split { merge_steps } => solve_parallel(cnf, &cfg, merge_steps).map(|o| {
            let (part, whole) = (o.part_sweeps(), o.whole_sweeps());
            (o.is_satisfied(), part + whole, Some((part, whole)))
        }),
    };
    if spec.timing {
        row.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    match result {
        Ok((satisfied, sweeps, split)) => {
            row.status = if satisfied {
                RowStatus::Satisfied
            } else {
                RowStatus::BudgetExceeded
            };
            row.sweeps = sweeps;
            if let Some((part, whole)) = split {
                row.part_sweeps = Some(part);
                row.whole_sweeps = Some(whole);
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn median(sorted: &[u64]) -> Option<f64> {
    match sorted.len() {
        0 => None,
        n if n % 2 == 1 => Some(sorted[n / 2] as f64),
        n => Some((sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0),
    }
}

pub fn aggregate(rows: &[CampaignRow]) -> CampaignAggregates {
    let solved_rows: Vec<&CampaignRow> = rows.iter().filter(|r| r.status == RowStatus::Satisfied).collect();
    let eligible = rows
        .iter()
        .filter(|r| r.status == RowStatus::Satisfied || r.known_sat == Some(true))
        .count();
    let mut sweeps: Vec<u64> = solved_rows.iter().map(|r| r.sweeps).collect();
    sweeps.sort_unstable();
    CampaignAggregates {
        rows: rows.len(),
        eligible,
        solved: solved_rows.len(),
        solved_percent: if eligible == 0 {
            0.0
        } else {
            100.0 * solved_rows.len() as f64 / eligible as f64
        },
        max_sweeps: sweeps.last().copied(),
        median_sweeps: median(&sweeps),
        max_part_sweeps: solved_rows.iter().filter_map(|r| r.part_sweeps).max(),
        max_whole_sweeps: solved_rows.iter().filter_map(|r| r.whole_sweeps).max(),
        errors: rows.iter().filter(|r| r.status == RowStatus::Error).count(),
    }
}

/// Runs every (instance, repetition) pair on a worker pool; rows come back
/// in instance-major order regardless of scheduling.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignReport> {
    spec.validate()?;
    let instances = load_instances(spec)?;
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..spec.repetitions).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    let rows: Vec<CampaignRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, r)| run_row(spec, &instances[i], i, r))
            .collect()
    });
    let aggregates = aggregate(&rows);
    Ok(CampaignReport {
        spec: spec.clone(),
        rows,
        aggregates,
    })
}

/// Per-row CSV. Split-mode reports carry the part/whole columns.
pub fn write_rows_csv<W: std::io::Write>(report: &CampaignReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &report.rows {
        w.serialize(row)?;
    }
    if report.rows.is_empty() {
        w.write_record([
            "name", "n", "m", "repetition", "seed", "status", "sweeps", "part_sweeps", "whole_sweeps", "wall_ms",
            "known_sat", "error",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary line in the benchmark-table shape:
/// `benchmark,N,M,instances,solved_percent,max_sweeps,median_sweeps`, plus
/// `part_sweeps,whole_sweeps` in split mode.
pub fn write_summary_csv<W: std::io::Write>(report: &CampaignReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let split = matches!(report.spec.mode, CampaignMode::Split { .. });
    let mut header = vec!["benchmark", "N", "M", "instances", "solved_percent", "max_sweeps", "median_sweeps"];
    if split {
        header.extend(["part_sweeps", "whole_sweeps"]);
    }
    w.write_record(&header)?;
    let a = &report.aggregates;
    let first = report.rows.iter().find(|r| r.status != RowStatus::Error);
    let opt = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut record = vec![
        report.spec.name.clone(),
        first.map(|r| r.n.to_string()).unwrap_or_default(),
        first.map(|r| r.m.to_string()).unwrap_or_default(),
        a.rows.to_string(),
        format!("{:.2}", a.solved_percent),
        opt(a.max_sweeps),
        a.median_sweeps.map(|v| v.to_string()).unwrap_or_default(),
    ];
    if split {
        record.push(opt(a.max_part_sweeps));
        record.push(opt(a.max_whole_sweeps));
    }
    w.write_record(&record)?;
    w.flush()?;
    Ok(())
}

pub fn report_json(report: &CampaignReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// Writes the CSV and JSON artifacts named in the spec, resolving relative
/// paths against `out_dir`. Returns the paths written.
pub fn write_artifacts(report: &CampaignReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { out_dir.join(p) };
    let mut written = Vec::new();
    if let Some(csv_path) = &report.spec.csv_path {
        let path = resolve(csv_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_rows_csv(report, std::fs::File::create(&path)?)?;
        written.push(path);
    }
    if let Some(json_path) = &report.spec.json_path {
        let path = resolve(json_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, report_json(report)?)?;
        written.push(path);
    }
    Ok(written)
}

impl CampaignMode {
    pub fn split_default() -> Self {
        CampaignMode::Split {
            merge_steps: DEFAULT_MERGE_STEPS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator_spec(kind: GeneratorKind, count: usize) -> CampaignSpec {
        CampaignSpec {
            name: "t".into(),
            source: InstanceSource::Generator(GeneratorSpec {
                kind,
                n_vars: 20,
                n_clauses: 91,
                count,
                seed: 0,
                require_sat: true,
                oracle_budget: default_oracle_budget(),
            }),
            solver: SolverConfig::default(),
            repetitions: 1,
            max_sweeps: Some(10_000),
            mode: CampaignMode::Sequential,
            timing: false,
            threads: 2,
            csv_path: None,
            json_path: None,
        }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[1, 5, 9]), Some(5.0));
        assert_eq!(median(&[1, 5]), Some(3.0));
    }

    #[test]
    fn campaign_is_deterministic() {
        let spec = generator_spec(GeneratorKind::Uniform, 6);
        let a = run_campaign(&spec).unwrap();
        let b = run_campaign(&spec).unwrap();
        assert_eq!(report_json(&a).unwrap(), report_json(&b).unwrap());
        assert_eq!(a.rows.len(), 6);
        assert!(a.rows.iter().all(|r| r.known_sat == Some(true)));
        assert_eq!(a.aggregates.eligible, 6);
    }

    #[test]
    fn split_mode_reports_part_and_whole() {
        let mut spec = generator_spec(GeneratorKind::Planted, 3);
        spec.mode = CampaignMode::split_default();
        let report = run_campaign(&spec).unwrap();
        for row in &report.rows {
            assert_eq!(row.status, RowStatus::Satisfied);
            assert_eq!(row.sweeps, row.part_sweeps.unwrap() + row.whole_sweeps.unwrap());
        }
        let mut buf = Vec::new();
        write_summary_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("benchmark,N,M,instances,solved_percent,max_sweeps,median_sweeps,part_sweeps,whole_sweeps\n"));
    }

    #[test]
    fn unreadable_rows_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.cnf");
        let bad = dir.path().join("bad.cnf");
        std::fs::write(&good, "p cnf 2 2\n1 2 0\n-1 0\n").unwrap();
        std::fs::write(&bad, "p cnf 2 1\n3 0\n").unwrap();
        let mut spec = generator_spec(GeneratorKind::Uniform, 1);
        spec.source = InstanceSource::Files(vec![good, bad]);
        let report = run_campaign(&spec).unwrap();
        assert_eq!(report.rows[0].status, RowStatus::Satisfied);
        assert_eq!(report.rows[1].status, RowStatus::Error);
        assert!(report.rows[1].error.as_ref().unwrap().contains("exceeds declared"));
        assert_eq!(report.aggregates.errors, 1);
        assert_eq!(report.aggregates.solved_percent, 100.0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = generator_spec(GeneratorKind::Uniform, 1);
        spec.repetitions = 0;
        assert!(spec.validate().is_err());
        let mut spec = generator_spec(GeneratorKind::Uniform, 1);
        spec.source = InstanceSource::Files(vec!["/nonexistent/x.cnf".into()]);
        assert!(spec.validate().is_err());
        let json = r#"{"name":"x","source":{"generator":{"kind":"planted","n_vars":10,"n_clauses":40,"count":2,"seed":1}}}"#;
        let spec = CampaignSpec::from_json(json).unwrap();
        assert_eq!(spec.repetitions, 1);
        assert_eq!(spec.mode, CampaignMode::Sequential);
    }
}
