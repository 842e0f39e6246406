//! `sai`: solve, benchmark, preprocess, generate, and factor.
//!
//! Exit codes: `solve` returns 10 when a model is found and 0 when the sweep
//! budget runs out. Every command returns 2 on unreadable or invalid input
//! and 1 on any other failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use sai_core::bench::{self, CampaignSpec};
use sai_core::cnf::{emit_dimacs, gen_planted, gen_uniform_3sat, parse_dimacs, Cnf};
use sai_core::factor::{self, FactorInstance, TestSet};
use sai_core::functional::OccurrenceIndex;
use sai_core::oracle::{dpll_solve, OracleStatus};
use sai_core::preprocess::{preprocess, reconstruct};
use sai_core::solver::{solve_indexed, write_trace_csv, SolverConfig, TrajectoryPolicy};
use sai_core::split::{solve_parallel, DEFAULT_MERGE_STEPS};

const EXIT_SAT: u8 = 10;
const EXIT_INPUT: u8 = 2;
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "sai", version, about = "Relaxed-assignment SAT search and factoring experiments")]
struct Cli {
    /// Directory for relative report paths.
    #[arg(long, global = true, env = "SAI_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a DIMACS CNF file.
    Solve(SolveArgs),
    /// Run a campaign described by a JSON spec.
    Bench(BenchArgs),
    /// Simplify a DIMACS CNF file by resolution.
    Preprocess(PreprocessArgs),
    /// Generate an instance.
    Gen(GenArgs),
    /// Factor an odd integer through its multiplier encoding.
    Factor(FactorArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    None,
    PerturbUnsat,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// JSON solver config; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_sweeps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated inertia weights, most recent iterate first.
    #[arg(long, value_delimiter = ',')]
    inertia_weights: Option<Vec<f64>>,
    #[arg(long)]
    reflection_period: Option<u64>,
    #[arg(long)]
    stagnation_window: Option<u64>,
    #[arg(long)]
    stagnation_epsilon: Option<f64>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    perturb_magnitude: Option<f64>,
    #[arg(long)]
    restart_every: Option<u64>,
    #[arg(long)]
    division_guard: Option<f64>,
    #[arg(long)]
    init_noise: Option<f64>,
}

impl SolverFlags {
    fn build(&self) -> anyhow::Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => SolverConfig::default(),
        };
        if let Some(v) = self.max_sweeps {
            cfg.max_sweeps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.inertia_weights {
            cfg.inertia_weights = v.clone();
        }
        if let Some(v) = self.reflection_period {
            cfg.reflection_period = v;
        }
        if let Some(v) = self.stagnation_window {
            cfg.stagnation_window = v;
        }
        if let Some(v) = self.stagnation_epsilon {
            cfg.stagnation_epsilon = v;
        }
        if let Some(p) = self.policy {
            cfg.trajectory_policy = match p {
                PolicyArg::None => TrajectoryPolicy::None,
                PolicyArg::PerturbUnsat => TrajectoryPolicy::PerturbUnsat,
            };
        }
        if let Some(v) = self.perturb_magnitude {
            cfg.perturb_magnitude = v;
        }
        if let Some(v) = self.restart_every {
            cfg.restart_every = v;
        }
        if let Some(v) = self.division_guard {
            cfg.division_guard = v;
        }
        if let Some(v) = self.init_noise {
            cfg.init_noise = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Write the per-sweep trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Split into two parts, solve them concurrently, then finish on the whole formula.
    #[arg(long)]
    split: bool,
    #[arg(long, default_value_t = DEFAULT_MERGE_STEPS)]
    merge_steps: usize,
    /// Simplify first; the model is mapped back to the original variables.
    #[arg(long)]
    preprocess: bool,
}

#[derive(Args)]
struct BenchArgs {
    spec: PathBuf,
    /// Record wall time per row (reports are then no longer byte-reproducible).
    #[arg(long)]
    timing: bool,
    /// Override the spec's worker count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PreprocessArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 0)]
    growth_bound: usize,
    /// Output DIMACS path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Uniform,
    Planted,
    Factor,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 20)]
    vars: usize,
    #[arg(long, default_value_t = 91)]
    clauses: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Modulus for `factor`.
    #[arg(long)]
    n: Option<BigUint>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FactorArgs {
    n: BigUint,
    /// Exact factors from the complete oracle.
    #[arg(long)]
    oracle: bool,
    /// Relaxation attack on the full encoding.
    #[arg(long)]
    sai: bool,
    /// Key-bit voting over independent runs.
    #[arg(long)]
    votes: bool,
    /// Per-sweep right-bit fraction as CSV (needs known factors).
    #[arg(long)]
    trace_bits: bool,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    /// Voting tests: matrix, functional, or both.
    #[arg(long, value_enum, default_value = "both")]
    tests: TestsArg,
    #[arg(long, default_value_t = factor::DEFAULT_SETTLE_SWEEPS)]
    settle_sweeps: u64,
    #[arg(long, default_value_t = 100_000_000)]
    oracle_budget: u64,
    /// Report prefix under the output directory for vote and trace artifacts.
    #[arg(long)]
    report: Option<String>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestsArg {
    Matrix,
    Functional,
    Both,
}

/// Error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure {
        code: EXIT_INPUT,
        error: e.into(),
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error: e.into(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a, &cli.out_dir),
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Factor(a) => cmd_factor(a, &cli.out_dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read_cnf(path: &Path) -> Result<Cnf, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input)?;
    parse_dimacs(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(input)
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn print_model(values: &[i64]) {
    let mut line = String::from("v");
    for v in values {
        line.push_str(&format!(" {v}"));
    }
    println!("{line} 0");
}

fn cmd_solve(a: &SolveArgs) -> CmdResult {
    let original = read_cnf(&a.file)?;
    let config = a.solver.build().map_err(input)?;
    let (cnf, stack) = if a.preprocess {
        match preprocess(&original, 0) {
            Ok((cnf, stack, report)) => {
                println!(
                    "c preprocess: {} -> {} clauses, {} -> {} variables",
                    report.clauses_before, report.clauses_after, report.vars_before, report.vars_after
                );
                (cnf, Some(stack))
            }
            Err(sai_core::Error::Conflict) => {
                println!("c preprocess derived an empty clause");
                println!("s UNSATISFIABLE");
                return Ok(0);
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        (original.clone(), None)
    };

    let (outcome, split_sweeps) = if a.split && cnf.num_clauses() >= 2 {
        let out = solve_parallel(&cnf, &config, a.merge_steps).map_err(input)?;
        let sweeps = (out.part_sweeps(), out.whole_sweeps());
        (out.whole, Some(sweeps))
    } else {
        let index = OccurrenceIndex::new(&cnf);
        (solve_indexed(&cnf, &index, &config, None, None).map_err(input)?, None)
    };

    if let Some(path) = &a.trace {
        write_trace_csv(&outcome.trace, fs::File::create(path)?)?;
    }
    if let Some((part, whole)) = split_sweeps {
        println!("c part sweeps {part}, whole sweeps {whole}");
    }
    println!("c sweeps {}", outcome.sweeps_used);
    match outcome.assignment {
        Some(model) => {
            let model = match &stack {
                Some(stack) => reconstruct(&model, stack, &original)?,
                None => model,
            };
            assert!(original.is_satisfied_by(&model), "reported model fails the input formula");
            println!("s SATISFIABLE");
            print_model(&model.to_dimacs_literals());
            Ok(EXIT_SAT)
        }
        None => {
            println!("s UNKNOWN");
            Ok(0)
        }
    }
}

fn cmd_bench(a: &BenchArgs, out_dir: &Path) -> CmdResult {
    let text = fs::read_to_string(&a.spec)
        .with_context(|| format!("reading {}", a.spec.display()))
        .map_err(input)?;
    let mut spec = CampaignSpec::from_json(&text).map_err(input)?;
    if a.timing {
        spec.timing = true;
    }
    if let Some(t) = a.threads {
        spec.threads = t;
    }
    let report = bench::run_campaign(&spec)?;
    let mut summary = Vec::new();
    bench::write_summary_csv(&report, &mut summary)?;
    io::stdout().write_all(&summary)?;
    for path in bench::write_artifacts(&report, out_dir)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_preprocess(a: &PreprocessArgs) -> CmdResult {
    let cnf = read_cnf(&a.file)?;
    match preprocess(&cnf, a.growth_bound) {
        Ok((reduced, _, report)) => {
            write_output(a.output.as_deref(), &emit_dimacs(&reduced))?;
            eprintln!(
                "clauses {} -> {} ({:.3}x), variables {} -> {}",
                report.clauses_before,
                report.clauses_after,
                report.clause_reduction_factor(),
                report.vars_before,
                report.vars_after
            );
            if let Some(path) = &a.report {
                fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            Ok(0)
        }
        Err(sai_core::Error::Conflict) => {
            eprintln!("formula is unsatisfiable: empty clause derived");
            write_output(a.output.as_deref(), &format!("p cnf {} 1\n0\n", cnf.num_vars()))?;
            Ok(0)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_gen(a: &GenArgs) -> CmdResult {
    let text = match a.kind {
        GenKind::Uniform => emit_dimacs(&gen_uniform_3sat(a.vars, a.clauses, a.seed).map_err(input)?),
        GenKind::Planted => {
            let (cnf, plant) = gen_planted(a.vars, a.clauses, a.seed).map_err(input)?;
            let plant: Vec<String> = plant.to_dimacs_literals().iter().map(i64::to_string).collect();
            format!("c planted {} 0\n{}", plant.join(" "), emit_dimacs(&cnf))
        }
        GenKind::Factor => {
            let Some(n) = &a.n else {
                return Err(input(anyhow::anyhow!("gen factor needs --n")));
            };
            let inst = factor::encode(n).map_err(input)?;
            let vm = &inst.varmap;
            let list = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            format!(
                "c n {}\nc p bits (lsb first) {}\nc q bits (lsb first) {}\n{}",
                n,
                list(&vm.p_bits),
                list(&vm.q_bits),
                emit_dimacs(&inst.cnf)
            )
        }
    };
    write_output(a.output.as_deref(), &text)?;
    Ok(0)
}

/// Instance with ground truth attached when `n` fits in 64 bits.
fn factor_instance(n: &BigUint) -> Result<FactorInstance, Failure> {
    let mut inst = factor::encode(n).map_err(input)?;
    if let Ok(small) = u64::try_from(n) {
        let p = factor::smallest_factor(small);
        if p != small {
            if let Ok(with_truth) = FactorInstance::from_factors(&BigUint::from(p), &BigUint::from(small / p)) {
                inst = with_truth;
            }
        }
    }
    Ok(inst)
}

fn report_path(out_dir: &Path, prefix: &Option<String>, n: &BigUint, suffix: &str) -> PathBuf {
    let stem = prefix.clone().unwrap_or_else(|| format!("factor-{n}"));
    out_dir.join(format!("{stem}-{suffix}"))
}

fn cmd_factor(a: &FactorArgs, out_dir: &Path) -> CmdResult {
    if !(a.oracle || a.sai || a.votes || a.trace_bits) {
        return Err(input(anyhow::anyhow!(
            "choose at least one of --oracle, --sai, --votes, --trace-bits"
        )));
    }
    let inst = factor_instance(&a.n)?;
    let config = a.solver.build().map_err(input)?;
    println!(
        "c n = {} ({} bits): {} variables, {} clauses",
        inst.n,
        inst.n_bits,
        inst.cnf.num_vars(),
        inst.cnf.num_clauses()
    );

    if a.oracle {
        let result = dpll_solve(&inst.cnf, a.oracle_budget);
        match result.status {
            OracleStatus::Sat => {
                let (p, q) = factor::decode(result.model.as_ref().unwrap(), &inst)?;
                let (p, q) = if p <= q { (p, q) } else { (q, p) };
                println!("{} = {} × {}", inst.n, p, q);
            }
            OracleStatus::Unsat => println!("{} has no nontrivial factorization", inst.n),
            OracleStatus::BudgetExceeded => println!("oracle budget exceeded after {} nodes", result.nodes),
        }
    }

    if a.sai {
        let outcome = factor::traced_run(&inst, &config)?;
        match &outcome.assignment {
            Some(model) => {
                let (p, q) = factor::decode(model, &inst)?;
                assert_eq!(&p * &q, inst.n);
                let (p, q) = if p <= q { (p, q) } else { (q, p) };
                println!("{} = {} × {} (sai, {} sweeps)", inst.n, p, q, outcome.sweeps_used);
            }
            None => {
                let path = report_path(out_dir, &a.report, &inst.n, "sai-trace.csv");
                fs::create_dir_all(out_dir)?;
                write_trace_csv(&outcome.trace, fs::File::create(&path)?)?;
                println!(
                    "budget exceeded after {} sweeps (best F {:.4}); trace in {}",
                    outcome.sweeps_used,
                    outcome.best_f,
                    path.display()
                );
            }
        }
    }

    if a.votes {
        let tests = match a.tests {
            TestsArg::Matrix => TestSet::MATRIX,
            TestsArg::Functional => TestSet {
                matrix: false,
                functional: true,
            },
            TestsArg::Both => TestSet::BOTH,
        };
        let report = factor::vote_with_settle(&inst, a.runs, &config, tests, a.settle_sweeps)?;
        let table = factor::determination_table(&report, inst.key_bit_count());
        factor::write_determination_csv(&table, io::stdout())?;
        if let Some(acc) = report.accuracy {
            println!("c accuracy {acc:.4}");
        }
        fs::create_dir_all(out_dir)?;
        let votes_path = report_path(out_dir, &a.report, &inst.n, "votes.csv");
        factor::write_votes_csv(&report.votes, fs::File::create(&votes_path)?)?;
        let json_path = report_path(out_dir, &a.report, &inst.n, "votes.json");
        let json = serde_json::json!({
            "n": inst.n.to_string(),
            "config": config,
            "runs": a.runs,
            "settle_sweeps": a.settle_sweeps,
            "report": report,
            "determination": table,
        });
        fs::write(&json_path, serde_json::to_string_pretty(&json)? + "\n")?;
        if !report.functional.is_empty() {
            let path = report_path(out_dir, &a.report, &inst.n, "functional.csv");
            factor::write_functional_csv(&report.functional, &inst, fs::File::create(&path)?)?;
        }
        eprintln!("wrote {} and {}", votes_path.display(), json_path.display());
    }

    if a.trace_bits {
        if inst.ground_truth.is_none() {
            return Err(input(anyhow::anyhow!(
                "--trace-bits needs a semiprime below 2^64 with factors that fit the registers"
            )));
        }
        let outcome = factor::traced_run(&inst, &config)?;
        write_trace_csv(&outcome.trace, io::stdout())?;
    }
    Ok(0)
}
