//! Consecutive-ones density matrices and their O(n + m) kernels.
//!
//! For univariate censored data the density table is a zero-one matrix whose
//! ones are consecutive in each row: `f_ij = 1` iff `a(i) <= j <= b(i)`.
//! Storing only the endpoints lets every per-iteration quantity be computed
//! from cumulative sums instead of the full table.

use crate::error::{Error, Result};

/// Row intervals `a(i)..=b(i)` over `m` columns, 0-based.
#[derive(Debug, Clone)]
pub struct SparseIntervalMatrix {
    a: Vec<usize>,
    b: Vec<usize>,
    m: usize,
}

impl SparseIntervalMatrix {
    pub fn new(a: Vec<usize>, b: Vec<usize>, m: usize) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.is_empty() || m == 0 {
            return Err(Error::InvalidConfig {
                reason: "sparse matrix needs at least one row and one column".into(),
            });
        }
        for i in 0..a.len() {
            if a[i] > b[i] || b[i] >= m {
                return Err(Error::InvalidInterval {
                    index: i,
                    left: a[i] as f64,
                    right: b[i] as f64,
                });
            }
        }
        Ok(Self { a, b, m })
    }

    pub fn rows(&self) -> usize {
        self.a.len()
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn a(&self, i: usize) -> usize {
        self.a[i]
    }

    #[inline]
    pub fn b(&self, i: usize) -> usize {
        self.b[i]
    }

    /// Whether column `j` is covered by row `i`.
    #[inline]
    pub fn covers(&self, i: usize, j: usize) -> bool {
        self.a[i] <= j && j <= self.b[i]
    }

    /// Algorithm 1: `eta_i = s_{b(i)} - s_{a(i)-1}` from the cumulative sums
    /// `s_j` of `p`.  Costs O(m + n).
    pub fn eta_into(&self, p: &[f64], eta: &mut [f64], prefix: &mut Vec<f64>) {
        debug_assert_eq!(p.len(), self.m);
        debug_assert_eq!(eta.len(), self.rows());
        prefix.clear();
        prefix.reserve(self.m + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &v in p {
            acc += v;
            prefix.push(acc);
        }
        for i in 0..self.rows() {
            eta[i] = prefix[self.b[i] + 1] - prefix[self.a[i]];
        }
    }

    /// Algorithm 2: difference-array accumulation of `d_j = sum 1/eta_i` over
    /// the rows covering `j`, finished by a prefix sum.  Costs O(m + n).
    pub fn gradient_into(&self, eta: &[f64], d: &mut [f64]) {
        debug_assert_eq!(eta.len(), self.rows());
        debug_assert_eq!(d.len(), self.m);
        d.fill(0.0);
        for i in 0..self.rows() {
            let w = 1.0 / eta[i];
            d[self.a[i]] += w;
            if self.b[i] + 1 < self.m {
                d[self.b[i] + 1] -= w;
            }
        }
        for j in 1..self.m {
            d[j] += d[j - 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::{RngCore, SeedableRng};

    #[test]
    fn eta_prefix_sums() {
        let m = SparseIntervalMatrix::new(vec![0, 1], vec![1, 2], 3).unwrap();
        let mut eta = vec![0.0; 2];
        let mut prefix = Vec::new();
        m.eta_into(&[0.2, 0.3, 0.5], &mut eta, &mut prefix);
        assert!((eta[0] - 0.5).abs() < 1e-15);
        assert!((eta[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn eta_full_rows_are_one() {
        let m = SparseIntervalMatrix::new(vec![0, 0], vec![2, 2], 3).unwrap();
        let mut eta = vec![0.0; 2];
        m.eta_into(&[0.2, 0.3, 0.5], &mut eta, &mut Vec::new());
        for e in eta {
            assert!((e - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_difference_array() {
        let m = SparseIntervalMatrix::new(vec![0, 1], vec![1, 2], 3).unwrap();
        let mut d = vec![0.0; 3];
        m.gradient_into(&[0.5, 0.8], &mut d);
        assert!((d[0] - 2.0).abs() < 1e-12);
        assert!((d[1] - 3.25).abs() < 1e-12);
        assert!((d[2] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn gradient_single_full_row() {
        let m = SparseIntervalMatrix::new(vec![0], vec![3], 4).unwrap();
        let mut d = vec![0.0; 4];
        m.gradient_into(&[1.0], &mut d);
        assert_eq!(d, vec![1.0; 4]);
    }

    #[test]
    fn invalid_intervals_rejected() {
        assert!(SparseIntervalMatrix::new(vec![2], vec![1], 3).is_err());
        assert!(SparseIntervalMatrix::new(vec![0], vec![3], 3).is_err());
    }

    // Executable form of Proposition 1: the kernels agree with the direct
    // double sums on random instances.
    #[test]
    fn kernels_match_dense_oracle() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let n = 1 + (rng.next_u64() % 30) as usize;
            let m = 2 + (rng.next_u64() % 20) as usize;
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for _ in 0..n {
                let lo = (rng.next_u64() % m as u64) as usize;
                let hi = lo + (rng.next_u64() % (m - lo) as u64) as usize;
                a.push(lo);
                b.push(hi);
            }
            let mat = SparseIntervalMatrix::new(a, b, m).unwrap();
            let mut p: Vec<f64> = (0..m)
                .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 + 1e-3)
                .collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);

            let mut eta = vec![0.0; n];
            mat.eta_into(&p, &mut eta, &mut Vec::new());
            for i in 0..n {
                let direct: f64 = (mat.a(i)..=mat.b(i)).map(|j| p[j]).sum();
                assert!((eta[i] - direct).abs() <= 1e-12, "eta[{i}]");
            }

            let mut d = vec![0.0; m];
            mat.gradient_into(&eta, &mut d);
            for j in 0..m {
                let direct: f64 = (0..n)
                    .filter(|&i| mat.covers(i, j))
                    .map(|i| 1.0 / eta[i])
                    .sum();
                assert!((d[j] - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "d[{j}]");
            }
        }
    }
}
