//! Solver driver: runs one of the iteration mappings to the common
//! convergence criterion `max_j d_j - n <= epsilon`, which bounds the
//! log-likelihood shortfall by `epsilon`.

pub mod exchange;
pub mod steps;
pub mod waterfill;

use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{log_likelihood_from_eta, MixtureProblem, ProbabilityVector};
use steps::{renormalize, Workspace};

pub use exchange::{exchange_kernel, exchange_spec, ExchangeSpec};
pub use steps::{
    cocktail_iteration, default_beta, em_step, nne_pass, squeeze1_step, squeeze2_step,
    squeeze_overlap, vdm_step, vem_step, BetaVector, SqueezeVector,
};
pub use waterfill::{waterfill, Waterfill};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Em,
    Squeeze1,
    Squeeze2,
    #[serde(rename = "nne+")]
    NnePlus,
    Vem,
    Cocktail,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Em,
        Algorithm::Squeeze1,
        Algorithm::Squeeze2,
        Algorithm::NnePlus,
        Algorithm::Vem,
        Algorithm::Cocktail,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Em => "em",
            Algorithm::Squeeze1 => "squeeze1",
            Algorithm::Squeeze2 => "squeeze2",
            Algorithm::NnePlus => "nne+",
            Algorithm::Vem => "vem",
            Algorithm::Cocktail => "cocktail",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(Algorithm::Em),
            "squeeze1" => Ok(Algorithm::Squeeze1),
            "squeeze2" => Ok(Algorithm::Squeeze2),
            "nne+" | "nne_plus" | "nneplus" => Ok(Algorithm::NnePlus),
            "vem" => Ok(Algorithm::Vem),
            "cocktail" => Ok(Algorithm::Cocktail),
            other => Err(Error::InvalidConfig {
                reason: format!("unknown algorithm `{other}`"),
            }),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Cocktail,
            epsilon: 1e-6,
            max_iterations: 100_000,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("epsilon must be positive, got {}", self.epsilon),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig {
                reason: "max_iterations must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub p_hat: ProbabilityVector,
    pub loglik: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<(f64, f64)>>,
    pub wall_time: f64,
}

/// Runs the configured algorithm from `p0` (default: uniform) until the gap
/// criterion or the iteration cap.  Hitting the cap is not an error; the
/// report says `converged: false`.
pub fn solve(
    problem: &MixtureProblem,
    config: &SolverConfig,
    p0: Option<ProbabilityVector>,
) -> Result<SolveReport> {
    config.validate()?;
    let m = problem.m();
    let n = problem.n();
    let p0 = p0.unwrap_or_else(|| ProbabilityVector::uniform(m));
    if p0.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: p0.len(),
        });
    }

    // Squeeze amounts are data-dependent only; compute them once.
    let (g, beta) = match config.algorithm {
        Algorithm::Squeeze1 => (squeeze_overlap(problem).as_slice().to_vec(), vec![0.0; m]),
        Algorithm::Squeeze2 => {
            let g = squeeze_overlap(problem);
            let beta = default_beta(problem, &g);
            (g.as_slice().to_vec(), beta.as_slice().to_vec())
        }
        _ => (vec![0.0; n], vec![0.0; m]),
    };

    let started = Instant::now();
    let mut p = p0.into_vec();
    let mut ws = Workspace::new(n, m);
    let mut trace = config.trace.then(Vec::new);
    let mut iterations = 0;
    let (gap, loglik) = loop {
        ws.refresh(problem, &p)?;
        let gap = ws.d.iter().copied().fold(f64::NEG_INFINITY, f64::max) - n as f64;
        let loglik = log_likelihood_from_eta(&ws.eta);
        if let Some(t) = trace.as_mut() {
            t.push((loglik, gap));
        }
        if gap <= config.epsilon || iterations >= config.max_iterations {
            break (gap, loglik);
        }
        match config.algorithm {
            Algorithm::Em | Algorithm::Squeeze1 | Algorithm::Squeeze2 => {
                steps::squeeze_from_grad(&mut p, &g, &beta, &ws.eta, &ws.d)?;
            }
            Algorithm::Vem => {
                steps::vem_from_grad(problem, &mut p, &ws.eta, &ws.d)?;
            }
            Algorithm::NnePlus => {
                steps::vdm_from_grad(problem, &mut p, &ws.eta, &ws.d)?;
                steps::nne_inner(problem, &mut p, &mut ws)?;
            }
            Algorithm::Cocktail => {
                steps::vdm_from_grad(problem, &mut p, &ws.eta, &ws.d)?;
                steps::nne_inner(problem, &mut p, &mut ws)?;
                ws.refresh(problem, &p)?;
                steps::squeeze_from_grad(&mut p, &g, &beta, &ws.eta, &ws.d)?;
            }
        }
        renormalize(&mut p);
        iterations += 1;
    };

    Ok(SolveReport {
        p_hat: ProbabilityVector::new(p)?,
        loglik,
        gap,
        iterations,
        converged: gap <= config.epsilon,
        trace,
        wall_time: started.elapsed().as_secs_f64(),
    })
}
