//! Command-line front end: ingest censored data or dense density matrices,
//! run a chosen solver, and emit estimates, traces, and benchmark tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mixem::censored::{npmle_with, CensoredSample, Observation};
use mixem::error::Error;
use mixem::problem::MixtureProblem;
use mixem::simbench::{
    build_normal_grid_problem, generate_doubly_censored_rep, run_benchmark, DoublyCensoredConfig,
    NormalGridConfig,
};
use mixem::solver::{solve, Algorithm, SolveReport, SolverConfig};

#[derive(Parser)]
#[command(name = "mixem", version, about = "EM-type solvers for mixture proportions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Iteration mapping to run.
    #[arg(long, default_value = "cocktail", value_parser = parse_algorithm)]
    algorithm: Algorithm,
    /// Convergence threshold on the gradient gap max_j d_j - n.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Iteration cap; hitting it is a warning, not an error.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Record (log-likelihood, gap) per iteration in the report.
    #[arg(long)]
    trace: bool,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            algorithm: self.algorithm,
            epsilon: self.epsilon,
            max_iterations: self.max_iter,
            trace: self.trace,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a distribution function from censored intervals (CSV with
    /// header `left,right`; `inf` for right censoring, `left == right` exact).
    Npmle {
        input: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Use the expanded dense density table instead of the sparse kernels
        /// (debug path; same result).
        #[arg(long)]
        dense_kernels: bool,
        /// Output path prefix (default: the input path without extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximize the mixture likelihood for an arbitrary nonnegative density
    /// matrix (numeric CSV, one row per observation, no header).
    SolveDense {
        input: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare algorithms on simulated doubly censored data or on a normal
    /// mean-grid problem built from a dataset file.
    Bench {
        /// Problem generator: `doubly` or `normal-grid`.
        #[arg(long, default_value = "doubly")]
        gen: String,
        /// Sample size per replication (doubly).
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Lower examination rank, 1 <= q1 < q2 <= 20 (doubly).
        #[arg(long, default_value_t = 3)]
        q1: usize,
        /// Upper examination rank (doubly).
        #[arg(long, default_value_t = 18)]
        q2: usize,
        /// Number of independent replications.
        #[arg(long, default_value_t = 10)]
        reps: u64,
        /// Comma-separated algorithm list.
        #[arg(long, default_value = "em,nne+,vem,cocktail")]
        algos: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Dataset file for `normal-grid`: one number per line.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        grid_lo: f64,
        #[arg(long, default_value_t = 33.94)]
        grid_hi: f64,
        #[arg(long, default_value_t = 64)]
        grid_count: usize,
        #[arg(long, default_value_t = 0.95)]
        sigma: f64,
        /// Summary CSV path (default: print to stdout only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Every result file points back to how it was produced.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    inputs: Vec<String>,
    config: SolverConfig,
    version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct RunReport {
    manifest: RunManifest,
    #[serde(flatten)]
    report: SolveReport,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "input error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateEta { .. } | Error::ZeroSlopes => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Input(_) => ExitCode::from(1),
                CliError::Numerical(_) => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Npmle {
            input,
            solver,
            dense_kernels,
            out,
        } => cmd_npmle(&input, &solver.config(), dense_kernels, out),
        Command::SolveDense { input, solver, out } => cmd_solve_dense(&input, &solver.config(), out),
        Command::Bench {
            gen,
            n,
            q1,
            q2,
            reps,
            algos,
            seed,
            epsilon,
            max_iter,
            data,
            grid_lo,
            grid_hi,
            grid_count,
            sigma,
            out,
        } => cmd_bench(BenchArgs {
            gen,
            n,
            q1,
            q2,
            reps,
            algos,
            seed,
            epsilon,
            max_iter,
            data,
            grid_lo,
            grid_hi,
            grid_count,
            sigma,
            out,
        }),
    }
}

fn out_prefix(input: &Path, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| input.with_extension(""))
}

fn parse_float(field: &str, line: usize) -> Result<f64, CliError> {
    let field = field.trim();
    if field.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    field
        .parse()
        .map_err(|_| CliError::Input(format!("line {line}: cannot parse `{field}` as a number")))
}

fn read_censored_csv(path: &Path) -> Result<CensoredSample, CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "left,right" => {}
        _ => {
            return Err(CliError::Input(format!(
                "{}: expected header `left,right`",
                path.display()
            )))
        }
    }
    let mut obs = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (l, r) = line.split_once(',').ok_or_else(|| {
            CliError::Input(format!("line {lineno}: expected two comma-separated fields"))
        })?;
        let left = parse_float(l, lineno)?;
        let right = parse_float(r, lineno)?;
        let o = if left == right {
            Observation::exact(left)
        } else {
            Observation::interval(left, right)
        }
        .map_err(|e| CliError::Input(format!("line {lineno}: {e}")))?;
        obs.push(o);
    }
    Ok(CensoredSample::new(obs)?)
}

fn fmt_time(z: f64) -> String {
    if z == f64::INFINITY {
        "inf".to_string()
    } else {
        z.to_string()
    }
}

fn write_report(
    path: &Path,
    command: &str,
    inputs: Vec<String>,
    config: &SolverConfig,
    seed: Option<u64>,
    outputs: Vec<String>,
    report: &SolveReport,
) -> Result<(), CliError> {
    let run_report = RunReport {
        manifest: RunManifest {
            command: command.to_string(),
            inputs,
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            outputs,
        },
        report: report.clone(),
    };
    let json = serde_json::to_string_pretty(&run_report)
        .map_err(|e| CliError::Input(e.to_string()))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

fn warn_if_capped(report: &SolveReport) {
    if !report.converged {
        eprintln!(
            "warning: iteration cap reached after {} iterations (gap {}); estimate may be short of optimal",
            report.iterations, report.gap
        );
    }
}

fn cmd_npmle(
    input: &Path,
    config: &SolverConfig,
    dense_kernels: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let sample = read_censored_csv(input)?;
    let (estimate, report) = npmle_with(&sample, config, dense_kernels)?;

    let prefix = out_prefix(input, out);
    let estimate_path = prefix.with_extension("estimate.csv");
    let report_path = prefix.with_extension("report.json");

    let mut csv = String::from("z,p,F_hat\n");
    let grid = estimate.grid();
    let masses = estimate.masses();
    let mut cdf = 0.0;
    for j in 0..grid.mass_count() {
        let z = grid.mass_time(j);
        if z.is_finite() {
            cdf += masses[j];
            writeln!(csv, "{},{},{}", fmt_time(z), masses[j], cdf).unwrap();
        } else {
            // Mass beyond the last finite time; F is undefined there.
            writeln!(csv, "inf,{},", masses[j]).unwrap();
        }
    }
    fs::write(&estimate_path, &csv)?;
    write_report(
        &report_path,
        "npmle",
        vec![input.display().to_string()],
        config,
        None,
        vec![
            estimate_path.display().to_string(),
            report_path.display().to_string(),
        ],
        &report,
    )?;
    warn_if_capped(&report);
    println!(
        "npmle: {} observations, {} masses, loglik {}, {} iterations -> {}",
        sample.len(),
        grid.mass_count(),
        report.loglik,
        report.iterations,
        estimate_path.display()
    );
    Ok(())
}

fn read_dense_csv(path: &Path) -> Result<MixtureProblem, CliError> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_float(f, idx + 1))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no rows", path.display())));
    }
    Ok(MixtureProblem::from_rows(&rows)?)
}

fn cmd_solve_dense(
    input: &Path,
    config: &SolverConfig,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let problem = read_dense_csv(input)?;
    let report = solve(&problem, config, None)?;

    let prefix = out_prefix(input, out);
    let p_path = prefix.with_extension("p.csv");
    let report_path = prefix.with_extension("report.json");

    let mut csv = String::from("j,p\n");
    for (j, pj) in report.p_hat.as_slice().iter().enumerate() {
        writeln!(csv, "{j},{pj}").unwrap();
    }
    fs::write(&p_path, &csv)?;
    write_report(
        &report_path,
        "solve-dense",
        vec![input.display().to_string()],
        config,
        None,
        vec![p_path.display().to_string(), report_path.display().to_string()],
        &report,
    )?;
    warn_if_capped(&report);
    println!(
        "solve-dense: {}x{} problem, loglik {}, gap {}, {} iterations -> {}",
        problem.n(),
        problem.m(),
        report.loglik,
        report.gap,
        report.iterations,
        p_path.display()
    );
    Ok(())
}

struct BenchArgs {
    gen: String,
    n: usize,
    q1: usize,
    q2: usize,
    reps: u64,
    algos: String,
    seed: u64,
    epsilon: f64,
    max_iter: usize,
    data: Option<PathBuf>,
    grid_lo: f64,
    grid_hi: f64,
    grid_count: usize,
    sigma: f64,
    out: Option<PathBuf>,
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let algorithms = args
        .algos
        .split(',')
        .map(|s| s.trim().parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()?;

    let (problems, scenario) = match args.gen.as_str() {
        "doubly" => {
            let scenario = DoublyCensoredConfig {
                n: args.n,
                q1: args.q1,
                q2: args.q2,
                seed: args.seed,
            };
            let mut problems = Vec::with_capacity(args.reps as usize);
            for rep in 0..args.reps {
                let sample = generate_doubly_censored_rep(&scenario, rep)?;
                let (_, matrix) = mixem::censored::build_censored_problem(&sample)?;
                problems.push(MixtureProblem::sparse(matrix));
            }
            (problems, Some(scenario))
        }
        "normal-grid" => {
            let data_path = args.data.as_ref().ok_or_else(|| {
                CliError::Input("--gen normal-grid requires --data <file>".into())
            })?;
            let text = fs::read_to_string(data_path)?;
            let data = text
                .split_whitespace()
                .enumerate()
                .map(|(i, f)| parse_float(f, i + 1))
                .collect::<Result<Vec<f64>, _>>()?;
            let config = NormalGridConfig {
                data,
                grid_lo: args.grid_lo,
                grid_hi: args.grid_hi,
                grid_count: args.grid_count,
                sigma: args.sigma,
            };
            (vec![build_normal_grid_problem(&config)?], None)
        }
        other => {
            return Err(CliError::Input(format!(
                "unknown generator `{other}` (expected `doubly` or `normal-grid`)"
            )))
        }
    };

    let summary = run_benchmark(&problems, &algorithms, args.epsilon, args.max_iter)?;
    let csv = summary.to_csv(scenario.as_ref());
    print!("{csv}");
    if let Some(path) = args.out {
        fs::write(&path, &csv)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
