//! Waterfilling solve of the clamped-linear M-step.
//!
//! Given nonnegative slopes `S_j`, offsets `beta_j`, and a target total, find
//! `delta` such that `sum_j max(0, delta * S_j - beta_j) = total`, then return
//! the clamped masses.  The left-hand side is continuous, piecewise linear,
//! and increasing in `delta`, so sorting the breakpoints `beta_j / S_j` and
//! scanning the segments solves it in O(m log m).

use crate::error::{Error, Result};

pub struct Waterfill {
    pub delta: f64,
    pub p: Vec<f64>,
}

pub fn waterfill(s: &[f64], beta: &[f64], total: f64) -> Result<Waterfill> {
    debug_assert_eq!(s.len(), beta.len());
    debug_assert!(total > 0.0);
    // With no offsets every breakpoint is zero and the scan below would only
    // accept the final segment, so skip the O(m log m) sort: delta is just
    // total over the positive slopes, accumulated in the same index order.
    if beta.iter().all(|&b| b == 0.0) {
        let cum_s: f64 = s.iter().filter(|&&v| v > 0.0).sum();
        if cum_s == 0.0 {
            return Err(Error::ZeroSlopes);
        }
        let delta = total / cum_s;
        let p = s.iter().map(|&sj| (delta * sj).max(0.0)).collect();
        return Ok(Waterfill { delta, p });
    }

    let mut order: Vec<usize> = (0..s.len()).filter(|&j| s[j] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::ZeroSlopes);
    }
    order.sort_by(|&x, &y| {
        (beta[x] / s[x])
            .partial_cmp(&(beta[y] / s[y]))
            .expect("breakpoints are finite")
            .then(x.cmp(&y))
    });

    // Components become active in breakpoint order; delta solves the segment
    // on which the running candidate no longer overshoots the next breakpoint.
    let mut cum_s = 0.0;
    let mut cum_beta = 0.0;
    let mut delta = f64::NAN;
    for (k, &j) in order.iter().enumerate() {
        cum_s += s[j];
        cum_beta += beta[j];
        let candidate = (total + cum_beta) / cum_s;
        let next_breakpoint = match order.get(k + 1) {
            Some(&jn) => beta[jn] / s[jn],
            None => f64::INFINITY,
        };
        if candidate <= next_breakpoint {
            delta = candidate;
            break;
        }
    }
    debug_assert!(delta.is_finite());

    let p = (0..s.len())
        .map(|j| (delta * s[j] - beta[j]).max(0.0))
        .collect();
    Ok(Waterfill { delta, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::{RngCore, SeedableRng};

    #[test]
    fn zero_offsets_is_plain_normalization() {
        let w = waterfill(&[2.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((w.delta - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn both_active_branch() {
        let w = waterfill(&[2.0, 1.0], &[0.5, 0.0], 1.0).unwrap();
        assert!((w.delta - 0.5).abs() < 1e-15);
        assert!((w.p[0] - 0.5).abs() < 1e-15);
        assert!((w.p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clamped_component() {
        let w = waterfill(&[10.0, 1.0], &[0.0, 5.0], 1.0).unwrap();
        assert!((w.delta - 0.1).abs() < 1e-15);
        assert_eq!(w.p[1], 0.0);
        assert!((w.p[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_slopes_rejected() {
        assert!(matches!(
            waterfill(&[0.0, 0.0], &[0.0, 1.0], 1.0),
            Err(Error::ZeroSlopes)
        ));
    }

    /// Bisection oracle on the monotone residual, independent of the
    /// segment-scanning implementation.
    pub(crate) fn bisect_delta(s: &[f64], beta: &[f64], total: f64) -> f64 {
        let filled = |delta: f64| -> f64 {
            (0..s.len())
                .map(|j| (delta * s[j] - beta[j]).max(0.0))
                .sum()
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while filled(hi) < total {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if filled(mid) < total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn matches_bisection_oracle_on_random_instances() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let unif = |r: &mut rand_chacha::ChaCha12Rng| (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        for _ in 0..2000 {
            let m = 1 + (rng.next_u64() % 50) as usize;
            let s: Vec<f64> = (0..m)
                .map(|_| if rng.next_u64() % 5 == 0 { 0.0 } else { unif(&mut rng) * 3.0 })
                .collect();
            if s.iter().all(|&v| v == 0.0) {
                continue;
            }
            let beta: Vec<f64> = (0..m)
                .map(|_| if rng.next_u64() % 3 == 0 { 0.0 } else { unif(&mut rng) })
                .collect();
            let total = 0.1 + unif(&mut rng) * 2.0;
            let w = waterfill(&s, &beta, total).unwrap();
            let oracle = bisect_delta(&s, &beta, total);
            assert!(
                (w.delta - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()),
                "delta {} vs oracle {oracle}",
                w.delta
            );
            let sum: f64 = w.p.iter().sum();
            assert!((sum - total).abs() <= 1e-10 * (1.0 + total));
        }
    }
}
