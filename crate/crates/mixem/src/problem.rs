//! The mixture-proportions problem and its shared numerical kernels.
//!
//! A problem holds the `n x m` component-density evaluations `f_ij`, either as a
//! dense table or in the consecutive-ones interval form used for censored data.
//! Everything a solver needs is derived from three quantities: the mixture
//! densities `eta_i = sum_j f_ij p_j`, the log-likelihood `sum_i log(eta_i)`,
//! and the simplex gradient `d_j = sum_i f_ij / eta_i`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::SparseIntervalMatrix;

/// Below this, a mixture density is treated as a numerical degeneracy rather
/// than rounded to `-inf`.  Solves started from the uniform vector on validated
/// problems never get here.
pub const ETA_GUARD: f64 = 1e-300;

/// Storage for the density evaluations `f_ij`.
#[derive(Debug, Clone)]
pub enum Densities {
    /// Row-major `n x m` table.
    Dense(Vec<f64>),
    /// Zero-one rows whose ones occupy the consecutive range `a(i)..=b(i)`.
    Sparse(SparseIntervalMatrix),
}

#[derive(Debug, Clone)]
pub struct MixtureProblem {
    n: usize,
    m: usize,
    densities: Densities,
}

impl MixtureProblem {
    /// Builds a dense problem from a row-major table of density values.
    pub fn dense(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 || values.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: values.len(),
            });
        }
        for i in 0..n {
            let mut has_positive = false;
            for j in 0..m {
                let v = values[i * m + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidDensity {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                has_positive |= v > 0.0;
            }
            if !has_positive {
                return Err(Error::EmptyRow { row: i });
            }
        }
        Ok(Self {
            n,
            m,
            densities: Densities::Dense(values),
        })
    }

    /// Convenience constructor from per-row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::dense(n, m, values)
    }

    /// Wraps a consecutive-ones matrix; its invariants already guarantee every
    /// row has a positive entry.
    pub fn sparse(matrix: SparseIntervalMatrix) -> Self {
        Self {
            n: matrix.rows(),
            m: matrix.cols(),
            densities: Densities::Sparse(matrix),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn densities(&self) -> &Densities {
        &self.densities
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.densities, Densities::Sparse(_))
    }

    pub fn as_sparse(&self) -> Option<&SparseIntervalMatrix> {
        match &self.densities {
            Densities::Sparse(s) => Some(s),
            Densities::Dense(_) => None,
        }
    }

    /// Density of component `j` at observation `i`.
    #[inline]
    pub fn f(&self, i: usize, j: usize) -> f64 {
        match &self.densities {
            Densities::Dense(v) => v[i * self.m + j],
            Densities::Sparse(s) => {
                if s.a(i) <= j && j <= s.b(i) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Expands the sparse form into an equivalent dense problem (debug path).
    pub fn to_dense(&self) -> Self {
        match &self.densities {
            Densities::Dense(_) => self.clone(),
            Densities::Sparse(s) => {
                let mut values = vec![0.0; self.n * self.m];
                for i in 0..self.n {
                    for j in s.a(i)..=s.b(i) {
                        values[i * self.m + j] = 1.0;
                    }
                }
                MixtureProblem::dense(self.n, self.m, values).expect("sparse rows are nonempty")
            }
        }
    }

    /// Row minima `g_i = min_j f_ij`, the maximal amount that can be squeezed
    /// out of every component.
    pub fn row_minima(&self) -> Vec<f64> {
        match &self.densities {
            Densities::Dense(v) => (0..self.n)
                .map(|i| {
                    v[i * self.m..(i + 1) * self.m]
                        .iter()
                        .copied()
                        .fold(f64::INFINITY, f64::min)
                })
                .collect(),
            Densities::Sparse(s) => (0..self.n)
                .map(|i| {
                    if s.a(i) == 0 && s.b(i) == self.m - 1 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    }

    /// Fills `eta_i = sum_j f_ij p_j`, summing in ascending index order.
    /// `prefix` is scratch space for the sparse path.
    pub fn eta_into(&self, p: &[f64], eta: &mut [f64], prefix: &mut Vec<f64>) {
        debug_assert_eq!(p.len(), self.m);
        debug_assert_eq!(eta.len(), self.n);
        match &self.densities {
            Densities::Dense(v) => {
                for i in 0..self.n {
                    let row = &v[i * self.m..(i + 1) * self.m];
                    let mut acc = 0.0;
                    for j in 0..self.m {
                        acc += row[j] * p[j];
                    }
                    eta[i] = acc;
                }
            }
            Densities::Sparse(s) => s.eta_into(p, eta, prefix),
        }
    }

    /// Fills `d_j = sum_i f_ij / eta_i`, accumulating over ascending `i`.
    pub fn gradient_into(&self, eta: &[f64], d: &mut [f64]) {
        debug_assert_eq!(eta.len(), self.n);
        debug_assert_eq!(d.len(), self.m);
        match &self.densities {
            Densities::Dense(v) => {
                d.fill(0.0);
                for i in 0..self.n {
                    let w = 1.0 / eta[i];
                    let row = &v[i * self.m..(i + 1) * self.m];
                    for j in 0..self.m {
                        d[j] += row[j] * w;
                    }
                }
            }
            Densities::Sparse(s) => s.gradient_into(eta, d),
        }
    }

    fn check_dims(&self, p: &ProbabilityVector) -> Result<()> {
        if p.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: p.len(),
            });
        }
        Ok(())
    }
}

/// Proportions on the m-simplex.  Construction renormalizes benign
/// floating-point drift (|sum - 1| <= 1e-9) and rejects anything worse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProbabilityVector {
                reason: "empty vector".into(),
            });
        }
        let mut sum = 0.0;
        for (j, &v) in p.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidProbabilityVector {
                    reason: format!("entry {j} is {v}"),
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbabilityVector {
                reason: format!("entries sum to {sum}"),
            });
        }
        let mut p = p;
        if sum != 1.0 {
            for v in &mut p {
                *v /= sum;
            }
        }
        Ok(Self(p))
    }

    /// The interior starting point `p_j = 1/m` used by every solve.
    pub fn uniform(m: usize) -> Self {
        Self::new(vec![1.0 / m as f64; m]).expect("uniform vector is valid")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Indices with strictly positive mass.  Exact zeros only arise from the
    /// clamped exchange updates, so the comparison is exact.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| self.0[j] > 0.0).collect()
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// The per-observation mixture densities `eta_i`.
#[derive(Debug, Clone)]
pub struct MixtureDensities(pub Vec<f64>);

/// The simplex gradient `d_j = dl/dp_j`.  At a global maximum `max_j d_j = n`.
#[derive(Debug, Clone)]
pub struct SimplexGradient(pub Vec<f64>);

/// `l(p) = sum_i log(sum_j f_ij p_j)`; `-inf` when some row has zero density.
pub fn log_likelihood(problem: &MixtureProblem, p: &ProbabilityVector) -> Result<f64> {
    problem.check_dims(p)?;
    let eta = mixture_densities(problem, p)?;
    Ok(log_likelihood_from_eta(&eta.0))
}

pub(crate) fn log_likelihood_from_eta(eta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for &e in eta {
        if e <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += e.ln();
    }
    ll
}

pub fn mixture_densities(problem: &MixtureProblem, p: &ProbabilityVector) -> Result<MixtureDensities> {
    problem.check_dims(p)?;
    let mut eta = vec![0.0; problem.n()];
    let mut prefix = Vec::new();
    problem.eta_into(p.as_slice(), &mut eta, &mut prefix);
    Ok(MixtureDensities(eta))
}

pub fn simplex_gradient(problem: &MixtureProblem, p: &ProbabilityVector) -> Result<SimplexGradient> {
    problem.check_dims(p)?;
    let eta = mixture_densities(problem, p)?;
    check_eta(&eta.0)?;
    let mut d = vec![0.0; problem.m()];
    problem.gradient_into(&eta.0, &mut d);
    Ok(SimplexGradient(d))
}

/// Rejects degenerate mixture densities before they turn into infinities.
pub(crate) fn check_eta(eta: &[f64]) -> Result<()> {
    for (i, &e) in eta.iter().enumerate() {
        if !(e >= ETA_GUARD) {
            return Err(Error::DegenerateEta { row: i, value: e });
        }
    }
    Ok(())
}

/// The stopping quantity `max_j d_j - n` of the common convergence criterion;
/// nonnegative on the simplex, zero exactly at global maxima, and an upper
/// bound on `l(p_hat) - l(p)`.
pub fn convergence_gap(problem: &MixtureProblem, p: &ProbabilityVector) -> Result<f64> {
    let d = simplex_gradient(problem, p)?;
    let max = d.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max - problem.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem_2x2(rows: [[f64; 2]; 2]) -> MixtureProblem {
        MixtureProblem::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]).unwrap()
    }

    fn pv(p: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn log_likelihood_identity_densities() {
        let prob = problem_2x2([[1.0, 0.0], [0.0, 1.0]]);
        let ll = log_likelihood(&prob, &pv(&[0.5, 0.5])).unwrap();
        assert!((ll - 2.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_vertex() {
        let prob = problem_2x2([[2.0, 1.0], [1.0, 1.0]]);
        let ll = log_likelihood(&prob, &pv(&[1.0, 0.0])).unwrap();
        assert!((ll - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_zero_row_is_neg_inf() {
        let prob = problem_2x2([[1.0, 0.0], [0.0, 1.0]]);
        let ll = log_likelihood(&prob, &pv(&[1.0, 0.0])).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn mixture_densities_hand_sum() {
        let prob = problem_2x2([[2.0, 1.0], [1.0, 1.0]]);
        let eta = mixture_densities(&prob, &pv(&[0.5, 0.5])).unwrap();
        assert_eq!(eta.0, vec![1.5, 1.0]);
    }

    #[test]
    fn mixture_densities_unit_vector_picks_column() {
        let prob = problem_2x2([[2.0, 1.0], [1.0, 3.0]]);
        let eta = mixture_densities(&prob, &pv(&[0.0, 1.0])).unwrap();
        assert_eq!(eta.0, vec![1.0, 3.0]);
    }

    #[test]
    fn mixture_densities_constant_row() {
        let prob = MixtureProblem::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let eta = mixture_densities(&prob, &pv(&[0.3, 0.7])).unwrap();
        assert!((eta.0[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_mle_equals_n() {
        let prob = problem_2x2([[1.0, 0.0], [0.0, 1.0]]);
        let d = simplex_gradient(&prob, &pv(&[0.5, 0.5])).unwrap();
        assert_eq!(d.0, vec![2.0, 2.0]);
    }

    #[test]
    fn gradient_hand_sums() {
        let prob = problem_2x2([[2.0, 1.0], [1.0, 1.0]]);
        let d = simplex_gradient(&prob, &pv(&[1.0, 0.0])).unwrap();
        assert!((d.0[0] - 2.0).abs() < 1e-12);
        assert!((d.0[1] - 1.5).abs() < 1e-12);

        let d = simplex_gradient(&prob, &pv(&[0.5, 0.5])).unwrap();
        assert!((d.0[0] - (2.0 / 1.5 + 1.0)).abs() < 1e-12);
        assert!((d.0[1] - (1.0 / 1.5 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_rejects_degenerate_eta() {
        let prob = problem_2x2([[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            simplex_gradient(&prob, &pv(&[1.0, 0.0])),
            Err(Error::DegenerateEta { .. })
        ));
    }

    #[test]
    fn convergence_gap_examples() {
        let prob = problem_2x2([[1.0, 0.0], [0.0, 1.0]]);
        assert!(convergence_gap(&prob, &pv(&[0.5, 0.5])).unwrap().abs() < 1e-12);

        let prob = problem_2x2([[2.0, 1.0], [1.0, 1.0]]);
        assert!(convergence_gap(&prob, &pv(&[1.0, 0.0])).unwrap().abs() < 1e-12);
        let gap = convergence_gap(&prob, &pv(&[0.5, 0.5])).unwrap();
        assert!((gap - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn probability_vector_renormalizes_drift_and_rejects_garbage() {
        let p = ProbabilityVector::new(vec![0.5, 0.5 + 1e-12]).unwrap();
        let sum: f64 = p.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn dense_construction_rejects_zero_row_and_negatives() {
        assert!(matches!(
            MixtureProblem::from_rows(&[vec![0.0, 0.0]]),
            Err(Error::EmptyRow { row: 0 })
        ));
        assert!(matches!(
            MixtureProblem::from_rows(&[vec![1.0, -0.1]]),
            Err(Error::InvalidDensity { .. })
        ));
    }

    #[test]
    fn log_likelihood_permutation_invariant() {
        let prob = problem_2x2([[2.0, 1.0], [1.0, 3.0]]);
        let swapped = problem_2x2([[1.0, 2.0], [3.0, 1.0]]);
        let a = log_likelihood(&prob, &pv(&[0.3, 0.7])).unwrap();
        let b = log_likelihood(&swapped, &pv(&[0.7, 0.3])).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences_on_simplex_directions() {
        let prob = MixtureProblem::from_rows(&[
            vec![0.8, 1.3, 0.2],
            vec![1.1, 0.4, 2.0],
            vec![0.5, 0.9, 0.7],
        ])
        .unwrap();
        let p = pv(&[0.2, 0.5, 0.3]);
        let d = simplex_gradient(&prob, &p).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            for k in 0..3 {
                if j == k {
                    continue;
                }
                let mut plus = p.as_slice().to_vec();
                plus[j] += h;
                plus[k] -= h;
                let mut minus = p.as_slice().to_vec();
                minus[j] -= h;
                minus[k] += h;
                // Step off the simplex on purpose, so evaluate Eq. (1) directly.
                let eval = |q: &[f64]| {
                    (0..3)
                        .map(|i| (0..3).map(|c| prob.f(i, c) * q[c]).sum::<f64>().ln())
                        .sum::<f64>()
                };
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let exact = d.0[j] - d.0[k];
                assert!(
                    (fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                    "direction ({j},{k}): fd {fd} vs {exact}"
                );
            }
        }
    }
}
