//! `badmm`: generate transport instances, run BADMM / ADMM, write traces.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use badmm::config::{DEFAULT_GAMMA, DEFAULT_MAX_ITERS, DEFAULT_RHO, DEFAULT_TOL};
use badmm::logistic::{self, LogisticConfig};
use badmm::oracle::assignment_bruteforce;
use badmm::transport::{self, SolveOutcome};
use badmm::{io, uniform_cost_matrix, Matrix, Schedule, SolverConfig, TransportProblem, Variant, Vector};

/// Relative oracle gap accepted by `--check-oracle`.
const ORACLE_REL_TOL: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "badmm", version, about = "Bregman ADMM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one transport instance.
    Solve(SolveArgs),
    /// Run both variants on the same instances across seeds.
    Compare(CompareArgs),
    /// Sparse logistic regression by linearized BADMM.
    Logistic(LogisticArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    #[value(name = "badmm-kl")]
    BadmmKl,
    Admm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Constant,
    #[value(name = "sqrt-t")]
    SqrtT,
}

/// Flags shared by `solve` and `compare`. Unset flags fall back to the
/// config file, then to built-in defaults.
#[derive(Args, Default)]
struct SolverFlags {
    /// Rows of the generated cost matrix (defaults to --n).
    #[arg(long)]
    m: Option<usize>,
    /// Columns of the generated cost matrix.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV or `.bin` cost matrix; replaces the generated instance.
    #[arg(long)]
    cost_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau_ratio: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho_z: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Residual threshold; `inf` runs exactly --max-iters sweeps.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleArg>,
    #[arg(long, allow_negative_numbers = true)]
    c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c2: Option<f64>,
    /// Compare against the brute-force assignment optimum (n <= 8).
    #[arg(long)]
    check_oracle: bool,
    /// Flat `key = value` file using the flag names.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Write 0 to the elapsed_sec column so traces are reproducible byte for byte.
    #[arg(long)]
    fixed_clock: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    solver: SolverFlags,
    /// Number of consecutive seeds, starting at --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LogisticArgs {
    /// Samples as CSV, label (+1/-1) in the last column.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    tau_ratio: f64,
    /// Proximal weight; defaults to the Lipschitz bound of the loss gradient.
    #[arg(long, allow_negative_numbers = true)]
    rho_x: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            // --help and --version
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let _ = err.print();
            return ExitCode::FAILURE;
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Logistic(args) => cmd_logistic(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Values read from a `--config` file, keyed by flag name.
#[derive(Default)]
struct ConfigFile {
    values: BTreeMap<String, String>,
}

const CONFIG_KEYS: &[&str] = &[
    "m", "n", "seed", "cost-file", "variant", "rho", "tau-ratio", "rho-x", "rho-z", "gamma",
    "max-iters", "tol", "schedule", "c1", "c2", "check-oracle",
];

impl ConfigFile {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key '{key}'", lineno + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("config key '{key}' = '{v}': {e}"))
            })
            .transpose()
    }
}

/// Fully resolved `solve` / `compare` settings.
struct Resolved {
    m: usize,
    n: usize,
    seed: u64,
    cost_file: Option<PathBuf>,
    config: SolverConfig,
    check_oracle: bool,
}

fn resolve(flags: &SolverFlags) -> Result<Resolved> {
    let file = match &flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    macro_rules! pick {
        ($field:ident, $key:literal, $default:expr) => {
            match flags.$field {
                Some(v) => v,
                None => file.get($key)?.unwrap_or($default),
            }
        };
    }
    let n: usize = pick!(n, "n", 64);
    let m: usize = pick!(m, "m", n);
    let seed: u64 = pick!(seed, "seed", 0);
    let variant = match flags.variant {
        Some(VariantArg::BadmmKl) => Variant::BadmmKL,
        Some(VariantArg::Admm) => Variant::AdmmEuclidean,
        None => file.get::<Variant>("variant")?.unwrap_or(Variant::BadmmKL),
    };
    let schedule_name = match flags.schedule {
        Some(ScheduleArg::Constant) => "constant".to_string(),
        Some(ScheduleArg::SqrtT) => "sqrt-t".to_string(),
        None => file
            .get::<String>("schedule")?
            .unwrap_or_else(|| "constant".into()),
    };
    let c1: f64 = pick!(c1, "c1", 1.0);
    let c2: f64 = pick!(c2, "c2", 1.0);
    let schedule = match schedule_name.as_str() {
        "constant" => Schedule::Constant,
        "sqrt-t" => Schedule::SqrtT { c1, c2 },
        other => bail!("unknown schedule '{other}'"),
    };
    let cost_file = match &flags.cost_file {
        Some(p) => Some(p.clone()),
        None => file.get::<PathBuf>("cost-file")?,
    };
    let check_oracle = flags.check_oracle || file.get::<bool>("check-oracle")?.unwrap_or(false);
    let config = SolverConfig {
        rho: pick!(rho, "rho", DEFAULT_RHO),
        tau_ratio: pick!(tau_ratio, "tau-ratio", 1.0),
        rho_x: pick!(rho_x, "rho-x", 0.0),
        rho_z: pick!(rho_z, "rho-z", 0.0),
        gamma: pick!(gamma, "gamma", DEFAULT_GAMMA),
        max_iters: pick!(max_iters, "max-iters", DEFAULT_MAX_ITERS),
        tol: pick!(tol, "tol", DEFAULT_TOL),
        variant,
        schedule,
        seed,
    };
    config.validate()?;
    if m == 0 || n == 0 {
        bail!("--m and --n must be at least 1");
    }
    Ok(Resolved {
        m,
        n,
        seed,
        cost_file,
        config,
        check_oracle,
    })
}

/// Unit row marginals; column marginals `m / n` so the masses balance.
fn build_problem(cost: Matrix) -> Result<TransportProblem> {
    let (m, n) = cost.shape();
    if m == n {
        return Ok(TransportProblem::assignment(cost)?);
    }
    Ok(TransportProblem::new(
        cost,
        Vector::filled(m, 1.0),
        Vector::filled(n, m as f64 / n as f64),
    )?)
}

fn load_problem(r: &Resolved, seed: u64) -> Result<TransportProblem> {
    let cost = match &r.cost_file {
        Some(path) => io::read_cost_file(path)
            .with_context(|| format!("cannot load cost file {}", path.display()))?,
        None => uniform_cost_matrix(r.m, r.n, seed)?,
    };
    build_problem(cost)
}

/// Relative gap of `objective` to the assignment optimum, with the optimum.
fn oracle_gap(problem: &TransportProblem, objective: f64) -> Result<(f64, f64)> {
    let opt = assignment_bruteforce(problem.cost())
        .context("--check-oracle needs a square cost matrix with n <= 8")?
        .value;
    let rel = (objective - opt).abs() / opt.abs().max(f64::MIN_POSITIVE);
    Ok((opt, rel))
}

fn run(problem: &TransportProblem, config: &SolverConfig, fixed_clock: bool) -> Result<SolveOutcome> {
    Ok(if fixed_clock {
        transport::solve_with_clock(problem, config, || 0.0)?
    } else {
        transport::solve(problem, config)?
    })
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let r = resolve(&args.solver)?;
    let problem = load_problem(&r, r.seed)?;
    let start = Instant::now();
    let out = run(&problem, &r.config, args.fixed_clock)?;
    let wall = start.elapsed().as_secs_f64();
    if let Some(path) = &args.trace_out {
        io::write_trace_csv(path, &out.trace)
            .with_context(|| format!("cannot write trace {}", path.display()))?;
    }
    println!(
        "variant={} n={} iters={} objective={} time={:.3}s reason={}",
        r.config.variant,
        problem.cols(),
        out.iterations(),
        out.objective(),
        wall,
        out.reason
    );
    if r.check_oracle {
        let (opt, rel) = oracle_gap(&problem, out.objective())?;
        println!("oracle={opt} gap={rel:.3e}");
        if rel > ORACLE_REL_TOL {
            bail!("objective {} is {rel:.3e} from the oracle optimum {opt}", out.objective());
        }
    }
    Ok(())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let r = resolve(&args.solver)?;
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let variants = [Variant::BadmmKL, Variant::AdmmEuclidean];
    let mut csv = String::from("seed,variant,iters,elapsed_sec,objective\n");
    let mut stats: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = vec![Default::default(); variants.len()];
    let mut failures = Vec::new();
    for seed in r.seed..r.seed + args.seeds {
        let problem = load_problem(&r, seed)?;
        for (k, &variant) in variants.iter().enumerate() {
            let config = SolverConfig {
                variant,
                seed,
                ..r.config.clone()
            };
            let out = run(&problem, &config, false)?;
            csv.push_str(&format!(
                "{seed},{variant},{},{:.16e},{:.16e}\n",
                out.iterations(),
                out.elapsed_sec(),
                out.objective()
            ));
            stats[k].0.push(out.iterations() as f64);
            stats[k].1.push(out.elapsed_sec());
            stats[k].2.push(out.objective());
            if r.check_oracle {
                let (opt, rel) = oracle_gap(&problem, out.objective())?;
                eprintln!("seed={seed} variant={variant} oracle={opt} gap={rel:.3e}");
                if rel > ORACLE_REL_TOL {
                    failures.push(format!("seed {seed} {variant}: gap {rel:.3e}"));
                }
            }
        }
    }
    for (k, variant) in variants.iter().enumerate() {
        let (iters, time, obj) = &mut stats[k];
        csv.push_str(&format!(
            "median,{variant},{},{:.16e},{:.16e}\n",
            median(iters),
            median(time),
            median(obj)
        ));
    }
    match &args.out {
        Some(path) => fs::write(path, &csv)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{csv}"),
    }
    if !failures.is_empty() {
        bail!("oracle check failed: {}", failures.join("; "));
    }
    Ok(())
}

fn cmd_logistic(args: &LogisticArgs) -> Result<()> {
    let problem = match &args.data {
        Some(path) => io::read_logistic_csv(path, args.lambda)
            .with_context(|| format!("cannot load samples {}", path.display()))?,
        None => logistic::synthetic(args.samples, args.dim, args.lambda, args.seed)?,
    };
    let config = LogisticConfig {
        rho: args.rho,
        tau_ratio: args.tau_ratio,
        rho_x: args.rho_x,
        max_iters: args.max_iters,
        tol: args.tol,
    };
    let out = logistic::solve(&problem, &config)?;
    if let Some(path) = &args.trace_out {
        io::write_trace_csv(path, &out.trace)
            .with_context(|| format!("cannot write trace {}", path.display()))?;
    }
    let z = &out.state.z;
    let l1 = problem.lambda() * z.norm1();
    let nnz = z.iter().filter(|v| **v != 0.0).count();
    println!(
        "objective={} l1={} consensus_gap={:.3e} nnz={} iters={} reason={}",
        out.objective(),
        l1,
        out.consensus_gap(),
        nnz,
        out.state.t,
        out.reason
    );
    Ok(())
}
