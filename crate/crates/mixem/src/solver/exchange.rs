//! The generalized two-component exchange kernel.
//!
//! Maximizes `sum_i log(r_i + f_iu p_u + f_iv p_v)` over `p_u, p_v >= 0` with
//! `p_u + p_v = beta0` fixed, by one squeezed EM update.  The clamping can
//! transfer all the mass between the two sides in a single step, which is what
//! makes the nearest-neighbor and vertex moves effective.

use crate::error::{Error, Result};

/// The per-side squeeze bounds of an exchange, plus the fixed total.
#[derive(Debug, Clone, Copy)]
pub struct ExchangeSpec {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Streaming accumulator over the rows of an exchange.  Rows where the two
/// densities coincide contribute exactly zero, so sparse callers may feed only
/// the rows that cover one side.
pub(crate) struct ExchangeAcc {
    beta0: f64,
    p_u: f64,
    p_v: f64,
    sum_u: f64,
    sum_v: f64,
    beta1: f64,
    beta2: f64,
}

impl ExchangeAcc {
    pub fn new(p_u: f64, p_v: f64) -> Self {
        Self {
            beta0: p_u + p_v,
            p_u,
            p_v,
            sum_u: 0.0,
            sum_v: 0.0,
            beta1: f64::INFINITY,
            beta2: f64::INFINITY,
        }
    }

    /// Adds one observation: densities `f_u`, `f_v`, residual `r`, and the
    /// full mixture density `denom = r + f_u p_u + f_v p_v` (> 0).
    #[inline]
    pub fn add_row(&mut self, f_u: f64, f_v: f64, r: f64, denom: f64) {
        let g = f_u.min(f_v);
        self.sum_u += (f_u - g) / denom;
        self.sum_v += (f_v - g) / denom;
        if f_u > f_v {
            self.beta1 = self.beta1.min((r + self.beta0 * f_v) / (f_u - f_v));
        } else if f_v > f_u {
            self.beta2 = self.beta2.min((r + self.beta0 * f_u) / (f_v - f_u));
        }
    }

    pub fn spec(&self) -> ExchangeSpec {
        // A minimum over an empty index set is taken as zero; the matching
        // S-side is zero as well, so the clamped update is unaffected.
        ExchangeSpec {
            beta0: self.beta0,
            beta1: if self.beta1.is_finite() { self.beta1 } else { 0.0 },
            beta2: if self.beta2.is_finite() { self.beta2 } else { 0.0 },
        }
    }

    /// The updated pair, or `None` when the two densities are identical on
    /// every row fed in (then the step is a no-op by convention).
    pub fn finish(&self) -> Option<(f64, f64)> {
        let ExchangeSpec { beta0, beta1, beta2 } = self.spec();
        let s_u = (self.p_u + beta1) * self.sum_u;
        let s_v = (self.p_v + beta2) * self.sum_v;
        let total = s_u + s_v;
        if total == 0.0 {
            return None;
        }
        let raw = (beta0 + beta1 + beta2) * s_u / total - beta1;
        let mut p_u = raw.clamp(0.0, beta0);
        // Snap results within rounding distance of a boundary onto it, so a
        // component leaving the support hits zero exactly regardless of the
        // accumulation order that produced the sums.
        let snap = 1e-14 * beta0;
        if p_u <= snap {
            p_u = 0.0;
        } else if beta0 - p_u <= snap {
            p_u = beta0;
        }
        Some((p_u, beta0 - p_u))
    }
}

/// One exchange over explicit density columns and residuals.  Returns the
/// updated `(p_u, p_v)`; the inputs are returned unchanged when the columns
/// are identical.
pub fn exchange_kernel(
    f_u: &[f64],
    f_v: &[f64],
    r: &[f64],
    p_u: f64,
    p_v: f64,
) -> Result<(f64, f64)> {
    if f_u.len() != f_v.len() || f_u.len() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: f_u.len(),
            got: f_v.len().max(r.len()),
        });
    }
    let mut acc = ExchangeAcc::new(p_u, p_v);
    for i in 0..f_u.len() {
        let denom = (r[i] + f_u[i] * p_u) + f_v[i] * p_v;
        if !(denom > 0.0) {
            return Err(Error::DegenerateEta {
                row: i,
                value: denom,
            });
        }
        acc.add_row(f_u[i], f_v[i], r[i], denom);
    }
    Ok(acc.finish().unwrap_or((p_u, p_v)))
}

/// The squeeze bounds of an exchange, exposed for diagnostics and tests.
pub fn exchange_spec(f_u: &[f64], f_v: &[f64], r: &[f64], p_u: f64, p_v: f64) -> Result<ExchangeSpec> {
    let mut acc = ExchangeAcc::new(p_u, p_v);
    for i in 0..f_u.len() {
        let denom = (r[i] + f_u[i] * p_u) + f_v[i] * p_v;
        if !(denom > 0.0) {
            return Err(Error::DegenerateEta {
                row: i,
                value: denom,
            });
        }
        acc.add_row(f_u[i], f_v[i], r[i], denom);
    }
    Ok(acc.spec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::{RngCore, SeedableRng};

    #[test]
    fn disjoint_columns_reduce_to_two_component_em() {
        let (pu, pv) =
            exchange_kernel(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], 0.3, 0.7).unwrap();
        assert!((pu - 0.5).abs() < 1e-15);
        assert!((pv - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_mass_transfer_in_one_step() {
        let spec = exchange_spec(&[2.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], 0.5, 0.5).unwrap();
        assert!((spec.beta1 - 1.0).abs() < 1e-15);
        assert_eq!(spec.beta2, 0.0);
        let (pu, pv) =
            exchange_kernel(&[2.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], 0.5, 0.5).unwrap();
        assert_eq!(pu, 1.0);
        assert_eq!(pv, 0.0);
    }

    #[test]
    fn identical_columns_are_a_no_op() {
        let (pu, pv) =
            exchange_kernel(&[1.0, 1.0], &[1.0, 1.0], &[0.3, 0.1], 0.4, 0.6).unwrap();
        assert_eq!((pu, pv), (0.4, 0.6));
    }

    #[test]
    fn zero_denominator_is_degenerate() {
        assert!(exchange_kernel(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], 0.0, 1.0).is_err());
    }

    fn edge_loglik(f_u: &[f64], f_v: &[f64], r: &[f64], p_u: f64, p_v: f64) -> f64 {
        (0..f_u.len())
            .map(|i| (r[i] + f_u[i] * p_u + f_v[i] * p_v).ln())
            .sum()
    }

    // The kernel never decreases the pair log-likelihood, and its output is
    // at least as good as a fine grid search over the transfer amount.
    #[test]
    fn beats_grid_search_on_random_instances() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let unif = |r: &mut rand_chacha::ChaCha12Rng| (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        for _ in 0..200 {
            let n = 2 + (rng.next_u64() % 20) as usize;
            let f_u: Vec<f64> = (0..n).map(|_| unif(&mut rng) * 2.0).collect();
            let f_v: Vec<f64> = (0..n).map(|_| unif(&mut rng) * 2.0).collect();
            let r: Vec<f64> = (0..n).map(|_| unif(&mut rng) * 0.5 + 0.05).collect();
            let p_u = unif(&mut rng);
            let p_v = 1.0 - p_u;
            let (qu, qv) = exchange_kernel(&f_u, &f_v, &r, p_u, p_v).unwrap();
            assert!((qu + qv - (p_u + p_v)).abs() < 1e-12);
            assert!(qu >= 0.0 && qu <= p_u + p_v + 1e-12);

            let before = edge_loglik(&f_u, &f_v, &r, p_u, p_v);
            let after = edge_loglik(&f_u, &f_v, &r, qu, qv);
            assert!(after >= before - 1e-12 * (1.0 + before.abs()));

            // Fixed points of the kernel coincide with grid-search maxima.
            let (su, sv) = exchange_kernel(&f_u, &f_v, &r, qu, qv).unwrap();
            if (su - qu).abs() < 1e-10 {
                let beta0 = p_u + p_v;
                let grid = 10_000;
                let best = (0..=grid)
                    .map(|k| {
                        let pu = beta0 * k as f64 / grid as f64;
                        edge_loglik(&f_u, &f_v, &r, pu, beta0 - pu)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    edge_loglik(&f_u, &f_v, &r, su, sv) >= best - 1e-6 * (1.0 + best.abs()),
                    "kernel fixed point below grid maximum"
                );
            }
        }
    }
}
