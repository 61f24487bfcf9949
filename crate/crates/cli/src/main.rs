//! `rdbsc` — generate instances, solve them, simulate periodic reassignment,
//! run the oracle suites and time the grid index.
//!
//! Exit codes: 0 on success, 1 on runtime or I/O failure, 2 on usage errors.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rdbsc_core::harness::io::{read_tasks, read_workers, write_assignment, write_tasks, write_workers};
use rdbsc_core::harness::{
    export_report, generate_instance, reduction_from_number_partition, run_suite, simulate_incremental, Distribution,
    GeneratorConfig, ReportFormat, SimulationConfig, Suite,
};
use rdbsc_core::index::GridIndex;
use rdbsc_core::model::enumerate_pairs;
use rdbsc_core::solvers::{solve, Algorithm, DcConfig, SubSolver};
use rdbsc_core::{objective, Error, Instance, Task, WaitPolicy, Worker};

#[derive(Parser)]
#[command(name = "rdbsc", version, about = "Reliable diversity-based spatial crowdsourcing assignment")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Format of files written with --out.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file, or directory for commands that write instances.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the summary on standard output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Uniform,
    Skewed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Greedy,
    Sampling,
    Dc,
    Gtruth,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Greedy => Algorithm::Greedy,
            Algo::Sampling => Algorithm::Sampling,
            Algo::Dc => Algorithm::Dc,
            Algo::Gtruth => Algorithm::Gtruth,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Leaf {
    Greedy,
    Sampling,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    /// Arrivals must fall inside the valid period.
    Strict,
    /// Early arrivals wait for the period to open.
    Wait,
}

impl From<Policy> for WaitPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Strict => WaitPolicy::Strict,
            Policy::Wait => WaitPolicy::Wait,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Lemma1,
    Bounds,
    Pruning,
    SamplingRank,
    NpReduction,
    IndexEquivalence,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Lemma1 => Suite::Lemma1,
            SuiteArg::Bounds => Suite::Bounds,
            SuiteArg::Pruning => Suite::Pruning,
            SuiteArg::SamplingRank => Suite::SamplingRank,
            SuiteArg::NpReduction => Suite::NpReduction,
            SuiteArg::IndexEquivalence => Suite::IndexEquivalence,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance as tasks.csv and workers.csv (or instance.json).
    Generate(GenerateArgs),
    /// Assign workers to tasks and report the objective.
    Solve(SolveArgs),
    /// Run periodic reassignment over a time horizon.
    Simulate(SimulateArgs),
    /// Run an oracle property suite.
    Verify(VerifyArgs),
    /// Time indexed against brute-force pair retrieval.
    IndexBench(BenchArgs),
    /// Encode a number-partitioning instance as an assignment problem.
    ReduceNp(ReduceArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of tasks.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Number of workers.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Dist::Uniform)]
    dist: Dist,
    #[arg(long, default_value_t = 1.0)]
    rt_min: f64,
    #[arg(long, default_value_t = 2.0)]
    rt_max: f64,
    #[arg(long, default_value_t = 0.0)]
    start_min: f64,
    #[arg(long, default_value_t = 24.0)]
    start_max: f64,
    #[arg(long, default_value_t = 0.9)]
    p_min: f64,
    #[arg(long, default_value_t = 1.0)]
    p_max: f64,
    #[arg(long, default_value_t = 0.2)]
    v_min: f64,
    #[arg(long, default_value_t = 0.3)]
    v_max: f64,
    /// Draw speeds from a Gaussian around the middle of the range.
    #[arg(long)]
    gaussian_velocity: bool,
    /// Smallest cone width, radians.
    #[arg(long, default_value_t = 0.0)]
    width_min: f64,
    /// Largest cone width, radians.
    #[arg(long, default_value_t = std::f64::consts::PI / 6.0)]
    width_max: f64,
    #[arg(long, default_value_t = 0.4)]
    beta_min: f64,
    #[arg(long, default_value_t = 0.6)]
    beta_max: f64,
}

#[derive(Args)]
struct InstanceArgs {
    /// Task CSV (id,x,y,s,e,beta).
    #[arg(long)]
    tasks: PathBuf,
    /// Worker CSV (id,x,y,v,alo,ahi,p).
    #[arg(long)]
    workers: PathBuf,
    #[arg(long, value_enum, default_value_t = Policy::Strict)]
    policy: Policy,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Algo::Greedy)]
    algo: Algo,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.9)]
    delta: f64,
    /// Largest subproblem (in tasks) divide and conquer solves directly.
    #[arg(long, default_value_t = 8)]
    gamma: usize,
    /// Solver used on divide-and-conquer leaves.
    #[arg(long, value_enum, default_value_t = Leaf::Sampling)]
    leaf: Leaf,
    /// Upper limit on any sample size.
    #[arg(long, default_value_t = 100_000)]
    k_cap: u64,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> DcConfig {
        DcConfig {
            gamma: self.gamma,
            sub_solver: match self.leaf {
                Leaf::Greedy => SubSolver::Greedy,
                Leaf::Sampling => SubSolver::Sampling,
            },
            seed,
            epsilon: self.epsilon,
            delta: self.delta,
            k_cap: self.k_cap,
            ..DcConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Clock at which workers depart, hours.
    #[arg(long, default_value_t = 0.0)]
    now: f64,
    /// Retrieve pairs through the grid index.
    #[arg(long)]
    index: bool,
    /// Also run greedy and report whether this result falls below it.
    #[arg(long)]
    compare: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Hours between reassignment rounds.
    #[arg(long, default_value_t = 1.0)]
    t_interval: f64,
    /// Simulated hours.
    #[arg(long, default_value_t = 24.0)]
    horizon: f64,
    /// Half-width of uniform noise on answer angles.
    #[arg(long, default_value_t = 0.0)]
    angle_jitter: f64,
    /// Half-width of uniform noise on answer times.
    #[arg(long, default_value_t = 0.0)]
    time_jitter: f64,
    /// Retrieve pairs by full sweep instead of the grid index.
    #[arg(long)]
    no_index: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Entity counts; each run uses this many tasks and workers.
    #[arg(long, value_delimiter = ',', default_values_t = [1000, 2000, 5000, 10_000, 20_000, 30_000])]
    sizes: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Dist::Uniform)]
    dist: Dist,
    #[arg(long, value_enum, default_value_t = Policy::Strict)]
    policy: Policy,
}

#[derive(Args)]
struct ReduceArgs {
    /// Positive integers to partition.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<u64>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(&cli, a),
        Command::Solve(a) => cmd_solve(&cli, a),
        Command::Simulate(a) => cmd_simulate(&cli, a),
        Command::Verify(a) => cmd_verify(&cli, a),
        Command::IndexBench(a) => cmd_index_bench(&cli, a),
        Command::ReduceNp(a) => cmd_reduce_np(&cli, a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn say(cli: &Cli, line: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", line.as_ref());
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))
}

fn load(args: &InstanceArgs) -> Result<(Vec<Task>, Vec<Worker>), Failure> {
    let tasks = read_tasks(open(&args.tasks)?).map_err(|e| Failure::Runtime(format!("{}: {e}", args.tasks.display())))?;
    let workers = read_workers(open(&args.workers)?).map_err(|e| Failure::Runtime(format!("{}: {e}", args.workers.display())))?;
    Ok((tasks, workers))
}

/// Writes an instance into `dir` as CSV pair or a single JSON file.
fn write_instance(dir: &Path, format: Format, tasks: &[Task], workers: &[Worker]) -> Result<Vec<PathBuf>, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    match format {
        Format::Csv => {
            let (tp, wp) = (dir.join("tasks.csv"), dir.join("workers.csv"));
            write_tasks(create(&tp)?, tasks)?;
            write_workers(create(&wp)?, workers)?;
            Ok(vec![tp, wp])
        }
        Format::Json => {
            let path = dir.join("instance.json");
            let mut out = create(&path)?;
            serde_json::to_writer_pretty(&mut out, &json!({ "tasks": tasks, "workers": workers })).map_err(Error::from)?;
            writeln!(out)?;
            out.flush()?;
            Ok(vec![path])
        }
    }
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Outcome {
    let cfg = GeneratorConfig {
        m: a.m,
        n: a.n,
        distribution: match a.dist {
            Dist::Uniform => Distribution::Uniform,
            Dist::Skewed => Distribution::Skewed,
        },
        rt: (a.rt_min, a.rt_max),
        start: (a.start_min, a.start_max),
        confidence: (a.p_min, a.p_max),
        velocity: (a.v_min, a.v_max),
        gaussian_velocity: a.gaussian_velocity,
        cone_width: (a.width_min, a.width_max),
        beta: (a.beta_min, a.beta_max),
        seed: cli.seed,
    };
    let (tasks, workers) = generate_instance(&cfg)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let files = write_instance(&dir, cli.format, &tasks, &workers)?;
    let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    say(
        cli,
        format!("generated {} tasks and {} workers (seed {}) -> {}", tasks.len(), workers.len(), cli.seed, names.join(", ")),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(cli: &Cli, a: &SolveArgs) -> Outcome {
    let (tasks, workers) = load(&a.instance)?;
    let policy = a.instance.policy.into();
    let cfg = a.solver.config(cli.seed);
    cfg.validate()?;
    let started = Instant::now();
    let pairs = if a.index {
        GridIndex::build_auto(&tasks, &workers, a.now, policy)?.retrieve_valid_pairs()
    } else {
        let inst = Instance::new(tasks.clone(), workers.clone())?;
        enumerate_pairs(&inst, a.now, policy)
    };
    let instance = Instance::new(tasks, workers)?;
    let algorithm: Algorithm = a.solver.algo.into();
    let outcome = solve(algorithm, &instance, &pairs, &cfg)?;
    let seconds = started.elapsed().as_secs_f64();
    let obj = objective(&outcome.assignment, &instance)?;

    say(
        cli,
        format!(
            "{algorithm:?}: {} tasks, {} workers, {} pairs, {} assigned",
            instance.tasks().len(),
            instance.workers().len(),
            pairs.len(),
            outcome.assignment.len()
        )
        .to_lowercase(),
    );
    say(cli, format!("min_rel={:.12} total_std={:.12} seconds={seconds:.6}", obj.min_rel, obj.total_std));
    if let Some(plan) = &outcome.plan {
        say(cli, format!("k_hat={} epsilon={} delta={} cap_hit={}", plan.k_hat, plan.epsilon, plan.delta, plan.cap_hit));
    }
    let baseline = if a.compare {
        let g = objective(&solve(Algorithm::Greedy, &instance, &pairs, &cfg)?.assignment, &instance)?;
        let below = obj.min_rel < g.min_rel;
        say(
            cli,
            format!(
                "greedy baseline: min_rel={:.12} total_std={:.12}{}",
                g.min_rel,
                g.total_std,
                if below { " (min_rel below greedy)" } else { "" }
            ),
        );
        Some((g, below))
    } else {
        None
    };

    if let Some(path) = &cli.out {
        let mut out = create(path)?;
        match cli.format {
            Format::Csv => write_assignment(&mut out, &outcome.assignment)?,
            Format::Json => {
                let report = json!({
                    "algorithm": algorithm,
                    "seed": cli.seed,
                    "pairs": pairs.len(),
                    "objective": obj,
                    "seconds": seconds,
                    "plan": outcome.plan,
                    "greedy_baseline": baseline.map(|(g, below)| json!({ "objective": g, "min_rel_below": below })),
                    "assignment": outcome.assignment,
                });
                serde_json::to_writer_pretty(&mut out, &report).map_err(Error::from)?;
                writeln!(out)?;
            }
        }
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Outcome {
    let (tasks, workers) = load(&a.instance)?;
    let cfg = SimulationConfig {
        t_interval: a.t_interval,
        horizon: a.horizon,
        algorithm: a.solver.algo.into(),
        solver: a.solver.config(cli.seed),
        policy: a.instance.policy.into(),
        use_index: !a.no_index,
        angle_jitter: a.angle_jitter,
        time_jitter: a.time_jitter,
        seed: cli.seed,
    };
    let report = simulate_incremental(&tasks, &workers, &cfg)?;
    say(
        cli,
        format!(
            "{} rounds: {} assigned, {} answered, {} failed; min_rel={:.12} total_std={:.12} realized_std={:.12}",
            report.rounds.len(),
            report.assigned,
            report.successes,
            report.failures,
            report.min_rel,
            report.total_std,
            report.realized_std
        ),
    );
    if let Some(path) = &cli.out {
        let mut out = create(path)?;
        export_report(&report, cli.format.into(), &mut out)?;
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Outcome {
    let report = run_suite(a.suite.into(), a.trials, cli.seed)?;
    say(
        cli,
        format!(
            "{} {:?}: {} trials, {} failures, max error {:e} ({})",
            if report.passed { "PASS" } else { "FAIL" },
            report.suite,
            report.trials,
            report.failures,
            report.max_error,
            report.detail
        ),
    );
    if let Some(path) = &cli.out {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report).map_err(Error::from)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_index_bench(cli: &Cli, a: &BenchArgs) -> Outcome {
    if a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(Failure::Usage("sizes must be positive".into()));
    }
    let policy: WaitPolicy = a.policy.into();
    let header = "n,eta,pairs,build_seconds,indexed_seconds,brute_seconds,speedup";
    let mut rows = vec![header.to_string()];
    say(cli, header);
    for &n in &a.sizes {
        let cfg = GeneratorConfig {
            m: n,
            n,
            distribution: match a.dist {
                Dist::Uniform => Distribution::Uniform,
                Dist::Skewed => Distribution::Skewed,
            },
            seed: cli.seed,
            ..GeneratorConfig::default()
        };
        let (tasks, workers) = generate_instance(&cfg)?;
        // the middle of the day, so that a share of tasks is open
        let now = 12.0;
        let t0 = Instant::now();
        let index = GridIndex::build_auto(&tasks, &workers, now, policy)?;
        let build = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let indexed = index.retrieve_valid_pairs();
        let indexed_secs = t1.elapsed().as_secs_f64();
        let inst = Instance::new(tasks, workers)?;
        let t2 = Instant::now();
        let brute = enumerate_pairs(&inst, now, policy);
        let brute_secs = t2.elapsed().as_secs_f64();
        if indexed != brute {
            return Err(Failure::Runtime(format!("indexed and brute-force pairs differ at n={n}")));
        }
        let row = format!(
            "{n},{:.6},{},{build:.6},{indexed_secs:.6},{brute_secs:.6},{:.2}",
            index.eta(),
            indexed.len(),
            brute_secs / indexed_secs.max(1e-9)
        );
        say(cli, &row);
        rows.push(row);
    }
    if let Some(path) = &cli.out {
        let mut out = create(path)?;
        match cli.format {
            Format::Csv => {
                for r in &rows {
                    writeln!(out, "{r}")?;
                }
            }
            Format::Json => {
                let cols: Vec<&str> = header.split(',').collect();
                let table: Vec<serde_json::Value> = rows[1..]
                    .iter()
                    .map(|r| {
                        let obj: serde_json::Map<String, serde_json::Value> = cols
                            .iter()
                            .zip(r.split(','))
                            .map(|(c, v)| (c.to_string(), v.parse::<f64>().map_or(json!(v), |x| json!(x))))
                            .collect();
                        serde_json::Value::Object(obj)
                    })
                    .collect();
                serde_json::to_writer_pretty(&mut out, &table).map_err(Error::from)?;
                writeln!(out)?;
            }
        }
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_reduce_np(cli: &Cli, a: &ReduceArgs) -> Outcome {
    let np = reduction_from_number_partition(&a.values).map_err(|e| Failure::Usage(e.to_string()))?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let files = write_instance(&dir, cli.format, np.instance.tasks(), np.instance.workers())?;
    let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    say(
        cli,
        format!(
            "encoded {} values as {} tasks and {} workers -> {}",
            np.values.len(),
            np.instance.tasks().len(),
            np.instance.workers().len(),
            names.join(", ")
        ),
    );
    Ok(ExitCode::SUCCESS)
}
