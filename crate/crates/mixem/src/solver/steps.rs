//! Iteration mappings: conventional EM, squeezing EM I/II, nearest-neighbor
//! exchange passes, VDM, and VEM.
//!
//! All of them are EM updates on some reformulation of the likelihood, so each
//! one is monotone in `l(p)`.  EM and the squeeze steps share a single code
//! path (`g = 0` collapses squeeze I to EM, `beta = 0` collapses squeeze II to
//! squeeze I, bit for bit).  The exchange-based moves share the two-component
//! kernel of [`super::exchange`].

use crate::error::{Error, Result};
use crate::problem::{
    check_eta, Densities, MixtureProblem, ProbabilityVector,
};
use crate::solver::exchange::ExchangeAcc;
use crate::solver::waterfill::waterfill;

/// Per-observation squeeze amount, `0 <= g_i <= min_j f_ij`.
#[derive(Debug, Clone)]
pub struct SqueezeVector {
    g: Vec<f64>,
}

impl SqueezeVector {
    pub fn new(problem: &MixtureProblem, g: Vec<f64>) -> Result<Self> {
        if g.len() != problem.n() {
            return Err(Error::DimensionMismatch {
                expected: problem.n(),
                got: g.len(),
            });
        }
        let minima = problem.row_minima();
        for (i, (&gi, &mi)) in g.iter().zip(&minima).enumerate() {
            if !gi.is_finite() || gi < 0.0 || gi > mi {
                return Err(Error::InvalidConfig {
                    reason: format!("g[{i}] = {gi} outside [0, {mi}]"),
                });
            }
        }
        Ok(Self { g })
    }

    pub fn zeros(n: usize) -> Self {
        Self { g: vec![0.0; n] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.g
    }
}

/// Per-component mass shifts `beta_j >= 0` with the row feasibility
/// `g_i - sum_j (f_ij - g_i) beta_j >= 0`.
#[derive(Debug, Clone)]
pub struct BetaVector {
    beta: Vec<f64>,
    beta_plus: f64,
}

impl BetaVector {
    pub fn new(problem: &MixtureProblem, g: &SqueezeVector, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != problem.m() {
            return Err(Error::DimensionMismatch {
                expected: problem.m(),
                got: beta.len(),
            });
        }
        for (j, &bj) in beta.iter().enumerate() {
            if !bj.is_finite() || bj < 0.0 {
                return Err(Error::InvalidConfig {
                    reason: format!("beta[{j}] = {bj} is negative or non-finite"),
                });
            }
        }
        for i in 0..problem.n() {
            let gi = g.as_slice()[i];
            let shifted: f64 = (0..problem.m())
                .map(|j| (problem.f(i, j) - gi) * beta[j])
                .sum();
            if shifted > gi + 1e-9 * (1.0 + gi) {
                return Err(Error::InvalidConfig {
                    reason: format!("beta violates row {i}: sum {shifted} > g {gi}"),
                });
            }
        }
        Ok(Self::from_raw(beta))
    }

    fn from_raw(beta: Vec<f64>) -> Self {
        let beta_plus = beta.iter().sum();
        Self { beta, beta_plus }
    }

    pub fn zeros(m: usize) -> Self {
        Self::from_raw(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta_plus(&self) -> f64 {
        self.beta_plus
    }
}

/// The maximal squeeze `g_i = min_j f_ij`, i.e. the overlap among all
/// component densities.
pub fn squeeze_overlap(problem: &MixtureProblem) -> SqueezeVector {
    SqueezeVector {
        g: problem.row_minima(),
    }
}

/// Default mass shifts for squeezing II.  For `m = 2` this is the explicit
/// upper bound of the two-component feasibility condition; for larger `m` a
/// conservative per-row split that still satisfies the row condition.  A
/// minimum over an empty set is zero.
pub fn default_beta(problem: &MixtureProblem, g: &SqueezeVector) -> BetaVector {
    let n = problem.n();
    let m = problem.m();
    if m == 2 {
        let mut b1 = f64::INFINITY;
        let mut b2 = f64::INFINITY;
        for i in 0..n {
            let f1 = problem.f(i, 0);
            let f2 = problem.f(i, 1);
            if f1 > f2 {
                b1 = b1.min(f2 / (f1 - f2));
            } else if f2 > f1 {
                b2 = b2.min(f1 / (f2 - f1));
            }
        }
        let fix = |b: f64| if b.is_finite() { b } else { 0.0 };
        return BetaVector::from_raw(vec![fix(b1), fix(b2)]);
    }
    let mut beta = vec![f64::INFINITY; m];
    for i in 0..n {
        let gi = g.as_slice()[i];
        let positive = (0..m).filter(|&j| problem.f(i, j) - gi > 0.0).count();
        if positive == 0 {
            continue;
        }
        for j in 0..m {
            let ft = problem.f(i, j) - gi;
            if ft > 0.0 {
                beta[j] = beta[j].min(gi / (positive as f64 * ft));
            }
        }
    }
    for b in &mut beta {
        if !b.is_finite() {
            *b = 0.0;
        }
    }
    BetaVector::from_raw(beta)
}

/// Reusable per-solve buffers.
pub(crate) struct Workspace {
    pub eta: Vec<f64>,
    pub d: Vec<f64>,
    pub prefix: Vec<f64>,
    support: Vec<usize>,
    bucket_start: Vec<usize>,
    bucket_rows: Vec<usize>,
    cursor: Vec<usize>,
}

impl Workspace {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            eta: vec![0.0; n],
            d: vec![0.0; m],
            prefix: Vec::with_capacity(m + 1),
            support: Vec::with_capacity(m),
            bucket_start: Vec::new(),
            bucket_rows: Vec::new(),
            cursor: Vec::new(),
        }
    }

    /// Refreshes `eta` and `d` at `p`, rejecting degenerate densities.
    pub fn refresh(&mut self, problem: &MixtureProblem, p: &[f64]) -> Result<()> {
        problem.eta_into(p, &mut self.eta, &mut self.prefix);
        check_eta(&self.eta)?;
        problem.gradient_into(&self.eta, &mut self.d);
        Ok(())
    }
}

/// Divides out benign drift so iterates stay on the simplex.
pub(crate) fn renormalize(p: &mut [f64]) {
    let sum: f64 = p.iter().sum();
    if sum != 1.0 {
        for v in p.iter_mut() {
            *v /= sum;
        }
    }
}

/// The shared squeezing M-step: `S_j = (p_j + beta_j)(d_j - t)` with
/// `t = sum_i g_i / eta_i`, solved by waterfilling to total mass one.
/// `g = beta = 0` is exactly conventional EM.
pub(crate) fn squeeze_from_grad(
    p: &mut Vec<f64>,
    g: &[f64],
    beta: &[f64],
    eta: &[f64],
    d: &[f64],
) -> Result<()> {
    let n = eta.len() as f64;
    let mut t = 0.0;
    for i in 0..eta.len() {
        t += g[i] / eta[i];
    }
    if !(n - t > 1e-12 * n) {
        // All components identical: the M-step is not unique, keep p.
        return Ok(());
    }
    for j in 0..p.len() {
        // s can round to a tiny negative; waterfill treats it as inactive.
        let s = (p[j] + beta[j]) * (d[j] - t);
        p[j] = s;
    }
    let filled = waterfill(p, beta, 1.0)?;
    p.copy_from_slice(&filled.p);
    Ok(())
}

/// VDM: move mass toward the component with the largest derivative, with the
/// step length chosen by the two-component kernel on the edge between the
/// current mixture and that vertex.
/// Relative band for derivative comparisons.  Near a maximizer every support
/// component has derivative close to n, so a raw argmax would be decided by
/// the last bits of the accumulation; taking the lowest index within the band
/// keeps the selection stable across summation orders (the sparse and dense
/// kernels accumulate differently) while still picking an essentially maximal
/// direction.  The band must stay well below any usable stopping threshold or
/// the exchange steps stall on directions with no usable ascent.
const SELECT_BAND: f64 = 1e-12;

fn argmax_banded(d: &[f64]) -> usize {
    let mut dmax = d[0];
    for &v in &d[1..] {
        if v > dmax {
            dmax = v;
        }
    }
    let cutoff = dmax - SELECT_BAND * (1.0 + dmax.abs());
    d.iter().position(|&v| v >= cutoff).unwrap_or(0)
}

pub(crate) fn vdm_from_grad(
    problem: &MixtureProblem,
    p: &mut [f64],
    eta: &[f64],
    d: &[f64],
) -> Result<()> {
    let j_sharp = argmax_banded(d);
    let mut acc = ExchangeAcc::new(1.0, 0.0);
    for i in 0..eta.len() {
        let f_v = problem.f(i, j_sharp);
        let denom = (0.0 + eta[i] * 1.0) + f_v * 0.0;
        acc.add_row(eta[i], f_v, 0.0, denom);
    }
    if let Some((w_keep, w_vertex)) = acc.finish() {
        for v in p.iter_mut() {
            *v *= w_keep;
        }
        p[j_sharp] += w_vertex;
    }
    Ok(())
}

/// VEM: exchange mass between the best overall component and the worst
/// component currently in the support.
pub(crate) fn vem_from_grad(
    problem: &MixtureProblem,
    p: &mut [f64],
    eta: &[f64],
    d: &[f64],
) -> Result<()> {
    let j_sharp = argmax_banded(d);
    let mut dmin = f64::INFINITY;
    for j in 0..d.len() {
        if p[j] > 0.0 && d[j] < dmin {
            dmin = d[j];
        }
    }
    let cutoff = dmin + SELECT_BAND * (1.0 + dmin.abs());
    let j_low = (0..d.len())
        .find(|&j| p[j] > 0.0 && d[j] <= cutoff)
        .expect("support is nonempty on the simplex");
    // At a maximizer every usable derivative difference has collapsed into
    // the band; exchanging on what remains would chase accumulation noise.
    if j_sharp == j_low || d[j_sharp] - d[j_low] <= SELECT_BAND * (1.0 + d[j_sharp].abs()) {
        return Ok(());
    }
    let (u, v) = (j_sharp, j_low);
    let mut acc = ExchangeAcc::new(p[u], p[v]);
    for i in 0..eta.len() {
        let f_u = problem.f(i, u);
        let f_v = problem.f(i, v);
        let r = (eta[i] - f_u * p[u]) - f_v * p[v];
        acc.add_row(f_u, f_v, r, eta[i]);
    }
    if let Some((pu, pv)) = acc.finish() {
        p[u] = pu;
        p[v] = pv;
    }
    Ok(())
}

/// One pass of nearest-neighbor exchanges over adjacent support points.
/// `eta` in the workspace is refreshed at entry and maintained incrementally
/// across the exchanges.  The sparse path touches only the rows that cover
/// exactly one endpoint of each pair, O(n) per pass in total.
pub(crate) fn nne_inner(
    problem: &MixtureProblem,
    p: &mut [f64],
    ws: &mut Workspace,
) -> Result<()> {
    problem.eta_into(p, &mut ws.eta, &mut ws.prefix);
    check_eta(&ws.eta)?;
    ws.support.clear();
    ws.support.extend((0..p.len()).filter(|&j| p[j] > 0.0));
    if ws.support.len() < 2 {
        return Ok(());
    }
    match problem.densities() {
        Densities::Dense(_) => nne_dense(problem, p, ws),
        Densities::Sparse(_) => nne_sparse(problem, p, ws),
    }
    Ok(())
}

fn nne_dense(problem: &MixtureProblem, p: &mut [f64], ws: &mut Workspace) {
    let n = problem.n();
    for k in 0..ws.support.len() - 1 {
        let u = ws.support[k];
        let v = ws.support[k + 1];
        let mut acc = ExchangeAcc::new(p[u], p[v]);
        for i in 0..n {
            let f_u = problem.f(i, u);
            let f_v = problem.f(i, v);
            let r = (ws.eta[i] - f_u * p[u]) - f_v * p[v];
            acc.add_row(f_u, f_v, r, ws.eta[i]);
        }
        if let Some((pu, pv)) = acc.finish() {
            let du = pu - p[u];
            let dv = pv - p[v];
            for i in 0..n {
                let f_u = problem.f(i, u);
                let f_v = problem.f(i, v);
                if f_u != f_v {
                    ws.eta[i] += f_u * du + f_v * dv;
                }
            }
            p[u] = pu;
            p[v] = pv;
        }
    }
}

/// Sparse pass: bucket each row into the (at most two) pairs whose endpoints
/// it covers exactly one of — the last support point inside `a(i)..=b(i)`
/// pairs with its right neighbor, the first with its left neighbor.
fn nne_sparse(problem: &MixtureProblem, p: &mut [f64], ws: &mut Workspace) {
    let mat = problem.as_sparse().expect("sparse path");
    let sup = &ws.support;
    let pairs = sup.len() - 1;
    let n = mat.rows();

    // counts_below[j] = number of support points with index < j.
    let m = problem.m();
    let mut counts_below = vec![0usize; m + 1];
    {
        let mut k = 0;
        for j in 0..=m {
            while k < sup.len() && sup[k] < j {
                k += 1;
            }
            counts_below[j] = k;
        }
    }
    let memberships = |i: usize| -> (Option<usize>, Option<usize>) {
        let (a, b) = (mat.a(i), mat.b(i));
        // Last support point <= b, first support point >= a.
        let hi = counts_below[b + 1];
        let lo = counts_below[a];
        let mut left_pair = None;
        let mut right_pair = None;
        if hi > 0 && sup[hi - 1] >= a {
            // Covers sup[hi-1] but not its right neighbor.
            if hi - 1 < pairs {
                left_pair = Some(hi - 1);
            }
        }
        if lo < sup.len() && sup[lo] <= b && lo > 0 {
            // Covers sup[lo] but not its left neighbor.
            right_pair = Some(lo - 1);
        }
        (left_pair, right_pair)
    };

    ws.bucket_start.clear();
    ws.bucket_start.resize(pairs + 1, 0);
    for i in 0..n {
        let (lp, rp) = memberships(i);
        if let Some(k) = lp {
            ws.bucket_start[k + 1] += 1;
        }
        if let Some(k) = rp {
            ws.bucket_start[k + 1] += 1;
        }
    }
    for k in 0..pairs {
        ws.bucket_start[k + 1] += ws.bucket_start[k];
    }
    ws.bucket_rows.clear();
    ws.bucket_rows.resize(ws.bucket_start[pairs], 0);
    ws.cursor.clear();
    ws.cursor.extend_from_slice(&ws.bucket_start[..pairs]);
    for i in 0..n {
        let (lp, rp) = memberships(i);
        if let Some(k) = lp {
            ws.bucket_rows[ws.cursor[k]] = i;
            ws.cursor[k] += 1;
        }
        if let Some(k) = rp {
            ws.bucket_rows[ws.cursor[k]] = i;
            ws.cursor[k] += 1;
        }
    }

    for k in 0..pairs {
        let u = sup[k];
        let v = sup[k + 1];
        let rows = &ws.bucket_rows[ws.bucket_start[k]..ws.bucket_start[k + 1]];
        let mut acc = ExchangeAcc::new(p[u], p[v]);
        for &i in rows {
            let covers_u = mat.covers(i, u);
            let (f_u, f_v) = if covers_u { (1.0, 0.0) } else { (0.0, 1.0) };
            let r = (ws.eta[i] - f_u * p[u]) - f_v * p[v];
            acc.add_row(f_u, f_v, r, ws.eta[i]);
        }
        if let Some((pu, pv)) = acc.finish() {
            let du = pu - p[u];
            let dv = pv - p[v];
            for &i in rows {
                let (f_u, f_v) = if mat.covers(i, u) { (1.0, 0.0) } else { (0.0, 1.0) };
                ws.eta[i] += f_u * du + f_v * dv;
            }
            p[u] = pu;
            p[v] = pv;
        }
    }
}

fn finish(problem: &MixtureProblem, p: Vec<f64>) -> Result<ProbabilityVector> {
    debug_assert_eq!(p.len(), problem.m());
    ProbabilityVector::new(p)
}

fn checked_state(
    problem: &MixtureProblem,
    p: &ProbabilityVector,
) -> Result<(Vec<f64>, Workspace)> {
    if p.len() != problem.m() {
        return Err(Error::DimensionMismatch {
            expected: problem.m(),
            got: p.len(),
        });
    }
    let mut ws = Workspace::new(problem.n(), problem.m());
    ws.refresh(problem, p.as_slice())?;
    Ok((p.as_slice().to_vec(), ws))
}

/// Conventional EM, `p_j' proportional to p_j d_j`.
pub fn em_step(problem: &MixtureProblem, p: &ProbabilityVector) -> Result<ProbabilityVector> {
    let (mut q, ws) = checked_state(problem, p)?;
    let zeros_g = vec![0.0; problem.n()];
    let zeros_b = vec![0.0; problem.m()];
    squeeze_from_grad(&mut q, &zeros_g, &zeros_b, &ws.eta, &ws.d)?;
    finish(problem, q)
}

/// Squeezing EM I (Eq.-(8)-style update); `g = 0` reproduces [`em_step`].
pub fn squeeze1_step(
    problem: &MixtureProblem,
    p: &ProbabilityVector,
    g: &SqueezeVector,
) -> Result<ProbabilityVector> {
    let (mut q, ws) = checked_state(problem, p)?;
    let zeros_b = vec![0.0; problem.m()];
    squeeze_from_grad(&mut q, g.as_slice(), &zeros_b, &ws.eta, &ws.d)?;
    finish(problem, q)
}

/// Squeezing EM II with the waterfilling M-step; `beta = 0` reproduces
/// [`squeeze1_step`].
pub fn squeeze2_step(
    problem: &MixtureProblem,
    p: &ProbabilityVector,
    g: &SqueezeVector,
    beta: &BetaVector,
) -> Result<ProbabilityVector> {
    let (mut q, ws) = checked_state(problem, p)?;
    squeeze_from_grad(&mut q, g.as_slice(), beta.as_slice(), &ws.eta, &ws.d)?;
    finish(problem, q)
}

/// One pass of nearest-neighbor exchanges.
pub fn nne_pass(problem: &MixtureProblem, p: &ProbabilityVector) -> Result<ProbabilityVector> {
    let (mut q, mut ws) = checked_state(problem, p)?;
    nne_inner(problem, &mut q, &mut ws)?;
    finish(problem, q)
}

/// One vertex-direction step.
pub fn vdm_step(problem: &MixtureProblem, p: &ProbabilityVector) -> Result<ProbabilityVector> {
    let (mut q, ws) = checked_state(problem, p)?;
    vdm_from_grad(problem, &mut q, &ws.eta, &ws.d)?;
    finish(problem, q)
}

/// One vertex-exchange step.
pub fn vem_step(problem: &MixtureProblem, p: &ProbabilityVector) -> Result<ProbabilityVector> {
    let (mut q, ws) = checked_state(problem, p)?;
    vem_from_grad(problem, &mut q, &ws.eta, &ws.d)?;
    finish(problem, q)
}

/// One cocktail iteration: VDM, then the nearest-neighbor pass, then EM.
pub fn cocktail_iteration(
    problem: &MixtureProblem,
    p: &ProbabilityVector,
) -> Result<ProbabilityVector> {
    let (mut q, mut ws) = checked_state(problem, p)?;
    vdm_from_grad(problem, &mut q, &ws.eta, &ws.d)?;
    nne_inner(problem, &mut q, &mut ws)?;
    ws.refresh(problem, &q)?;
    let zeros_g = vec![0.0; problem.n()];
    let zeros_b = vec![0.0; problem.m()];
    squeeze_from_grad(&mut q, &zeros_g, &zeros_b, &ws.eta, &ws.d)?;
    finish(problem, q)
}
