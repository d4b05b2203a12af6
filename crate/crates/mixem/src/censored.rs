//! NPMLE of a distribution function from censored observations.
//!
//! Each observation is an interval `(l_i, r_i]` (open left, closed right):
//! `l = r` encodes an exact failure time, `l = 0` left censoring, `r = inf`
//! right censoring.  Ordering the distinct finite endpoints as
//! `0 = z_0 < z_1 < ... < z_{m-1} < z_m = inf` turns the likelihood into a
//! mixture over the grid masses `p_j = F(z_j) - F(z_{j-1})` with a
//! consecutive-ones density matrix, so every solver in this crate applies.

use crate::error::{Error, Result};
use crate::problem::{MixtureProblem, ProbabilityVector};
use crate::solver::{solve, SolveReport, SolverConfig};
use crate::sparse::SparseIntervalMatrix;

/// One possibly censored failure time.  `right` is `f64::INFINITY` for right
/// censoring; that value is an exact sentinel, membership tests never compare
/// against a large finite float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    left: f64,
    right: f64,
}

impl Observation {
    /// The interval `(left, right]`, with `right = f64::INFINITY` allowed.
    pub fn interval(left: f64, right: f64) -> Result<Self> {
        if !left.is_finite() || left < 0.0 || !(right > left) {
            return Err(Error::InvalidInterval {
                index: 0,
                left,
                right,
            });
        }
        Ok(Self { left, right })
    }

    /// An exactly observed failure time (`left == right`).
    pub fn exact(t: f64) -> Result<Self> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidInterval {
                index: 0,
                left: t,
                right: t,
            });
        }
        Ok(Self { left: t, right: t })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn is_exact(&self) -> bool {
        self.left == self.right
    }

    pub fn is_right_censored(&self) -> bool {
        self.right == f64::INFINITY
    }

    pub fn is_left_censored(&self) -> bool {
        self.left == 0.0 && !self.is_exact()
    }
}

#[derive(Debug, Clone)]
pub struct CensoredSample {
    observations: Vec<Observation>,
}

impl CensoredSample {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "a censored sample needs at least one observation".into(),
            });
        }
        Ok(Self { observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }
}

/// The grid `0 = z_0 < z_1 < ... < z_{m-1} < inf = z_m` of distinct finite
/// endpoints; only the finite interior points are stored.  Mass `j`
/// (0-based) sits on `(z_j, z_{j+1}]`; the last one is the mass beyond the
/// largest finite time.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    finite: Vec<f64>,
}

impl TimeGrid {
    /// Finite grid times `z_1..z_{m-1}` in increasing order.
    pub fn finite_times(&self) -> &[f64] {
        &self.finite
    }

    /// Number of estimable masses, `m = #finite + 1`.
    pub fn mass_count(&self) -> usize {
        self.finite.len() + 1
    }

    /// The grid time at which mass `j` is placed: `z_{j+1}`, infinite for the
    /// final mass.
    pub fn mass_time(&self, j: usize) -> f64 {
        self.finite.get(j).copied().unwrap_or(f64::INFINITY)
    }
}

/// Builds the time grid and the consecutive-ones matrix for a sample.
///
/// Endpoints are deduplicated by exact floating-point equality; the grid is
/// the sorted distinct finite endpoints plus the sentinels.  Setup sorts once,
/// O(n log n); the dense `n x m` table is never materialized.
pub fn build_censored_problem(
    sample: &CensoredSample,
) -> Result<(TimeGrid, SparseIntervalMatrix)> {
    let obs = sample.observations();
    let mut endpoints: Vec<f64> = Vec::with_capacity(2 * obs.len());
    for (index, o) in obs.iter().enumerate() {
        if !o.left.is_finite() || o.left < 0.0 || o.right < o.left {
            return Err(Error::InvalidInterval {
                index,
                left: o.left,
                right: o.right,
            });
        }
        if o.left > 0.0 {
            endpoints.push(o.left);
        }
        if o.right.is_finite() && o.right > 0.0 {
            endpoints.push(o.right);
        }
    }
    endpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite endpoints"));
    endpoints.dedup();
    let grid = TimeGrid { finite: endpoints };
    let m = grid.mass_count();

    let finite = &grid.finite;
    // Index of the first finite grid time strictly greater than t.
    let first_above = |t: f64| finite.partition_point(|&z| z <= t);
    // Column of the finite grid time equal to t, if present.
    let column_of = |t: f64| {
        let k = finite.partition_point(|&z| z < t);
        (k < finite.len() && finite[k] == t).then_some(k)
    };

    let mut a = Vec::with_capacity(obs.len());
    let mut b = Vec::with_capacity(obs.len());
    for (index, o) in obs.iter().enumerate() {
        let (ai, bi) = if o.is_exact() {
            match column_of(o.left) {
                Some(j) => (j, j),
                None => {
                    return Err(Error::EmptyObservation {
                        index,
                        left: o.left,
                        right: o.right,
                    })
                }
            }
        } else {
            let ai = first_above(o.left);
            let bi = if o.right.is_finite() {
                match column_of(o.right) {
                    Some(j) => j,
                    None => {
                        return Err(Error::EmptyObservation {
                            index,
                            left: o.left,
                            right: o.right,
                        })
                    }
                }
            } else {
                m - 1
            };
            (ai, bi)
        };
        if ai > bi || bi >= m {
            return Err(Error::EmptyObservation {
                index,
                left: o.left,
                right: o.right,
            });
        }
        a.push(ai);
        b.push(bi);
    }
    let matrix = SparseIntervalMatrix::new(a, b, m)?;
    Ok((grid, matrix))
}

/// The estimated step distribution function.
#[derive(Debug, Clone)]
pub struct NpmleEstimate {
    grid: TimeGrid,
    masses: ProbabilityVector,
}

impl NpmleEstimate {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn masses(&self) -> &ProbabilityVector {
        &self.masses
    }

    /// Cumulative `F(z_j)` over the finite grid times.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.grid
            .finite
            .iter()
            .enumerate()
            .map(|(j, _)| {
                acc += self.masses[j];
                acc
            })
            .collect()
    }

    /// Mass assigned past the largest finite grid time, reported explicitly
    /// rather than folded into a finite jump.
    pub fn mass_beyond_last_finite(&self) -> f64 {
        self.masses[self.grid.mass_count() - 1]
    }
}

/// Computes the NPMLE by running the configured solver on the sparse kernels.
/// `dense_kernels` switches to the expanded dense table (debug path; same
/// result, O(nm) per iteration).
pub fn npmle_with(
    sample: &CensoredSample,
    config: &SolverConfig,
    dense_kernels: bool,
) -> Result<(NpmleEstimate, SolveReport)> {
    let (grid, matrix) = build_censored_problem(sample)?;
    let problem = MixtureProblem::sparse(matrix);
    let problem = if dense_kernels {
        problem.to_dense()
    } else {
        problem
    };
    let report = solve(&problem, config, None)?;
    let estimate = NpmleEstimate {
        grid,
        masses: report.p_hat.clone(),
    };
    Ok((estimate, report))
}

/// Computes the NPMLE on the sparse kernels.
pub fn npmle(
    sample: &CensoredSample,
    config: &SolverConfig,
) -> Result<(NpmleEstimate, SolveReport)> {
    npmle_with(sample, config, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(pairs: &[(f64, f64)]) -> CensoredSample {
        CensoredSample::new(
            pairs
                .iter()
                .map(|&(l, r)| {
                    if l == r {
                        Observation::exact(l).unwrap()
                    } else {
                        Observation::interval(l, r).unwrap()
                    }
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn grid_and_matrix_for_disjoint_intervals() {
        let s = sample(&[(0.0, 2.0), (3.0, f64::INFINITY)]);
        let (grid, mat) = build_censored_problem(&s).unwrap();
        assert_eq!(grid.finite_times(), &[2.0, 3.0]);
        assert_eq!(grid.mass_count(), 3);
        assert_eq!((mat.a(0), mat.b(0)), (0, 0));
        assert_eq!((mat.a(1), mat.b(1)), (2, 2));
    }

    #[test]
    fn grid_for_single_exact_observation() {
        let s = sample(&[(1.0, 1.0)]);
        let (grid, mat) = build_censored_problem(&s).unwrap();
        assert_eq!(grid.finite_times(), &[1.0]);
        assert_eq!(grid.mass_count(), 2);
        assert_eq!((mat.a(0), mat.b(0)), (0, 0));
    }

    #[test]
    fn duplicate_intervals_share_grid_points() {
        let s = sample(&[(0.0, 5.0), (0.0, 5.0)]);
        let (grid, mat) = build_censored_problem(&s).unwrap();
        assert_eq!(grid.mass_count(), 2);
        assert_eq!((mat.a(0), mat.b(0)), (0, 0));
        assert_eq!((mat.a(1), mat.b(1)), (0, 0));
    }

    #[test]
    fn exact_time_shares_grid_point_with_interval_endpoint() {
        let s = sample(&[(2.0, 2.0), (0.0, 2.0), (2.0, 4.0)]);
        let (grid, mat) = build_censored_problem(&s).unwrap();
        assert_eq!(grid.finite_times(), &[2.0, 4.0]);
        assert_eq!((mat.a(0), mat.b(0)), (0, 0));
        assert_eq!((mat.a(1), mat.b(1)), (0, 0));
        assert_eq!((mat.a(2), mat.b(2)), (1, 1));
    }

    #[test]
    fn malformed_intervals_are_rejected() {
        assert!(Observation::interval(2.0, 2.0).is_err());
        assert!(Observation::interval(-1.0, 2.0).is_err());
        assert!(Observation::interval(f64::INFINITY, f64::INFINITY).is_err());
        assert!(Observation::exact(0.0).is_err());
    }

    #[test]
    fn npmle_disjoint_two_interval_sample() {
        let s = sample(&[(0.0, 2.0), (3.0, f64::INFINITY)]);
        let (estimate, report) = npmle(&s, &SolverConfig::default()).unwrap();
        assert!(report.converged);
        let p = estimate.masses().as_slice();
        assert!((p[0] - 0.5).abs() < 1e-9);
        assert!(p[1].abs() < 1e-9);
        assert!((p[2] - 0.5).abs() < 1e-9);
        assert!((estimate.mass_beyond_last_finite() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn npmle_all_exact_is_the_empirical_cdf() {
        let times = [0.5, 1.25, 2.0, 3.5, 7.0];
        let s = CensoredSample::new(
            times.iter().map(|&t| Observation::exact(t).unwrap()).collect(),
        )
        .unwrap();
        let (estimate, report) = npmle(&s, &SolverConfig::default()).unwrap();
        assert!(report.converged);
        let cdf = estimate.cdf();
        for (j, f) in cdf.iter().enumerate() {
            assert!((f - (j + 1) as f64 / times.len() as f64).abs() < 1e-9);
        }
        assert!(estimate.mass_beyond_last_finite() < 1e-9);
    }

    #[test]
    fn npmle_right_censored_only_puts_mass_at_infinity() {
        let s = sample(&[(1.0, f64::INFINITY), (2.5, f64::INFINITY)]);
        let (estimate, report) = npmle(&s, &SolverConfig::default()).unwrap();
        assert!(report.converged);
        assert!((estimate.mass_beyond_last_finite() - 1.0).abs() < 1e-9);
    }
}
