//! EM-type solvers for mixture proportions with known component densities,
//! specialized for the nonparametric MLE of a distribution function from
//! interval and doubly censored data.
//!
//! The library provides conventional EM, two squeezing accelerations,
//! nearest-neighbor exchanges, the vertex direction and vertex exchange
//! methods, and the cocktail algorithm that combines them, together with
//! O(n)-per-iteration kernels for the consecutive-ones density matrices that
//! arise from censored observations.

pub mod censored;
pub mod error;
pub mod problem;
pub mod simbench;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use problem::{
    convergence_gap, log_likelihood, mixture_densities, simplex_gradient, MixtureDensities,
    MixtureProblem, ProbabilityVector, SimplexGradient,
};
pub use solver::{solve, Algorithm, SolveReport, SolverConfig};
