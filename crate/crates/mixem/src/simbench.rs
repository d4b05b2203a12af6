//! Simulated data generators and a small benchmarking harness for comparing
//! solver algorithms on identical problem instances.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::time::Instant;

use crate::censored::{CensoredSample, Observation};
use crate::error::{Error, Result};
use crate::problem::MixtureProblem;
use crate::solver::{solve, Algorithm, SolverConfig};

/// Doubly censored exponential lifetimes: the failure time `T ~ Exp(1)` is
/// observed exactly only when it falls between the `q1`-th and `q2`-th order
/// statistics `L < U` of 20 independent uniform(0,1) examination times;
/// otherwise the interval `(0, L]` or `(U, inf)` is recorded.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoublyCensoredConfig {
    pub n: usize,
    pub q1: usize,
    pub q2: usize,
    pub seed: u64,
}

impl DoublyCensoredConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig {
                reason: "sample size must be positive".into(),
            });
        }
        if !(1 <= self.q1 && self.q1 < self.q2 && self.q2 <= 20) {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "order-statistic ranks must satisfy 1 <= q1 < q2 <= 20, got q1={} q2={}",
                    self.q1, self.q2
                ),
            });
        }
        Ok(())
    }
}

fn uniform01(rng: &mut ChaCha12Rng) -> f64 {
    // 53 random bits in [0, 1); never returns 1.0.
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn exp1(rng: &mut ChaCha12Rng) -> f64 {
    -(1.0 - uniform01(rng)).ln()
}

/// Draws one replication.  `rep` selects an independent RNG stream under the
/// same seed, so replications are reproducible individually.
pub fn generate_doubly_censored_rep(
    config: &DoublyCensoredConfig,
    rep: u64,
) -> Result<CensoredSample> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(rep);
    let mut obs = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let t = exp1(&mut rng);
        let mut exams: Vec<f64> = (0..20).map(|_| uniform01(&mut rng)).collect();
        exams.sort_by(|a, b| a.partial_cmp(b).expect("finite uniforms"));
        let l = exams[config.q1 - 1];
        let u = exams[config.q2 - 1];
        let o = if t <= l {
            Observation::interval(0.0, l)?
        } else if t > u {
            Observation::interval(u, f64::INFINITY)?
        } else {
            Observation::exact(t)?
        };
        obs.push(o);
    }
    CensoredSample::new(obs)
}

/// Draws the first replication (stream 0).
pub fn generate_doubly_censored(config: &DoublyCensoredConfig) -> Result<CensoredSample> {
    generate_doubly_censored_rep(config, 0)
}

/// Mixture of normals on an equally spaced mean grid: column `j` is the
/// N(mu_j, sigma^2) density evaluated at each data point.  Useful for fitting
/// a nonparametric mixing distribution to real-valued data.
#[derive(Debug, Clone, Serialize)]
pub struct NormalGridConfig {
    pub data: Vec<f64>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_count: usize,
    pub sigma: f64,
}

impl NormalGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.data.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "normal-grid problem needs data".into(),
            });
        }
        if self.grid_count < 2 || !(self.grid_hi > self.grid_lo) {
            return Err(Error::InvalidConfig {
                reason: "grid must have at least 2 points with grid_hi > grid_lo".into(),
            });
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig {
                reason: "sigma must be positive".into(),
            });
        }
        Ok(())
    }
}

pub fn build_normal_grid_problem(config: &NormalGridConfig) -> Result<MixtureProblem> {
    config.validate()?;
    let m = config.grid_count;
    let step = (config.grid_hi - config.grid_lo) / (m - 1) as f64;
    let norm = 1.0 / (config.sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut rows = Vec::with_capacity(config.data.len());
    for &y in &config.data {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            let mu = config.grid_lo + step * j as f64;
            let z = (y - mu) / config.sigma;
            row.push(norm * (-0.5 * z * z).exp());
        }
        rows.push(row);
    }
    MixtureProblem::from_rows(&rows)
}

/// Per-algorithm summary over a batch of problem instances.
#[derive(Debug, Clone, Serialize)]
pub struct AlgorithmStats {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub capped_runs: usize,
    pub mean_iters: f64,
    pub sd_iters: Option<f64>,
    pub mean_seconds: f64,
    pub sd_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkSummary {
    pub stats: Vec<AlgorithmStats>,
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Runs each algorithm on each problem from the uniform start, sequentially
/// (no parallelism, so wall times are comparable).
pub fn run_benchmark(
    problems: &[MixtureProblem],
    algorithms: &[Algorithm],
    epsilon: f64,
    max_iterations: usize,
) -> Result<BenchmarkSummary> {
    if problems.is_empty() || algorithms.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "benchmark needs at least one problem and one algorithm".into(),
        });
    }
    let mut stats = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        let config = SolverConfig {
            algorithm,
            epsilon,
            max_iterations,
            trace: false,
        };
        let mut iters = Vec::with_capacity(problems.len());
        let mut secs = Vec::with_capacity(problems.len());
        let mut capped = 0usize;
        for problem in problems {
            let start = Instant::now();
            let report = solve(problem, &config, None)?;
            secs.push(start.elapsed().as_secs_f64());
            iters.push(report.iterations as f64);
            if !report.converged {
                capped += 1;
            }
        }
        let (mean_iters, sd_iters) = mean_sd(&iters);
        let (mean_seconds, sd_seconds) = mean_sd(&secs);
        stats.push(AlgorithmStats {
            algorithm,
            runs: problems.len(),
            capped_runs: capped,
            mean_iters,
            sd_iters,
            mean_seconds,
            sd_seconds,
        });
    }
    Ok(BenchmarkSummary { stats })
}

impl BenchmarkSummary {
    /// CSV rows `algorithm,n,q1,q2,mean_iters,sd_iters,mean_seconds,sd_seconds,capped_runs`.
    /// The scenario columns are left empty when `scenario` is `None`.
    pub fn to_csv(&self, scenario: Option<&DoublyCensoredConfig>) -> String {
        let mut out = String::from(
            "algorithm,n,q1,q2,mean_iters,sd_iters,mean_seconds,sd_seconds,capped_runs\n",
        );
        let (n, q1, q2) = match scenario {
            Some(c) => (c.n.to_string(), c.q1.to_string(), c.q2.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        for s in &self.stats {
            let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.algorithm,
                n,
                q1,
                q2,
                s.mean_iters,
                fmt_opt(s.sd_iters),
                s.mean_seconds,
                fmt_opt(s.sd_seconds),
                s.capped_runs
            ));
        }
        out
    }
}
