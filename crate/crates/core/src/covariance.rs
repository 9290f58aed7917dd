//! Limiting covariances `D_{i,j}` of the realigned component sums and the
//! covariance function of the limit process `xi`.
//!
//! For `i, j <= k` with `g = gcd(i, j)`, `i = g i'`, `j = g j'`, the summands
//! `F_i(X(n), ..., X(i n))` and `F_j(X(m), ..., X(j m))` stay correlated only
//! through the coordinate pairs `(X(s i' n), X(s j' m))`, `s = 1..g`, whose
//! time differences are `s u` with `u = i' n - j' m`. Everything else
//! decouples, so
//!
//! `a(u) = sum_{x, y} A_i(x) A_j(y) prod_s J_{s u}(x_s, y_s)`
//!
//! where `A_i` integrates `F_i` over its non-resonant coordinates and
//! `J_l(x, y) = P(X(t + l) = x, X(t) = y)`. Then
//! `D_{i,j} = (g / (i j)) sum_u a(u)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{psi_coefficient, ContinuousMarkovModel, DiscreteMarkovModel, PsiTail};
use crate::observables::Decomposition;
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcdStructure {
    pub i: usize,
    pub j: usize,
    pub upsilon: usize,
    pub i_prime: usize,
    pub j_prime: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn gcd_structure(i: usize, j: usize) -> GcdStructure {
    let upsilon = gcd(i, j);
    GcdStructure { i, j, upsilon, i_prime: i / upsilon, j_prime: j / upsilon }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TailBoundMode {
    /// Stop once the certified geometric tail bound drops below `abs_tol`.
    Geometric,
    /// Stop after `run` consecutive lags whose terms are below `abs_tol`.
    Plateau { run: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub abs_tol: f64,
    pub max_lag: u64,
    pub tail_bound_mode: TailBoundMode,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_lag: 10_000, tail_bound_mode: TailBoundMode::Geometric }
    }
}

impl TruncationPolicy {
    pub fn new(abs_tol: f64, max_lag: u64, tail_bound_mode: TailBoundMode) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::InvalidExperiment("abs_tol must be positive".into()));
        }
        if max_lag == 0 {
            return Err(Error::InvalidExperiment("max_lag must be positive".into()));
        }
        if let TailBoundMode::Plateau { run } = tail_bound_mode {
            if run == 0 {
                return Err(Error::InvalidExperiment("plateau run must be positive".into()));
            }
        }
        Ok(Self { abs_tol, max_lag, tail_bound_mode })
    }
}

/// Integrates an `dims`-dimensional table against `mu` over every
/// coordinate not listed in `keep` (1-based, ascending). The result is
/// indexed by the kept coordinates in order.
pub fn integrate_out(table: &[f64], dims: usize, keep: &[usize], mu: &[f64]) -> Vec<f64> {
    let s = mu.len();
    let mut out = vec![0.0; s.pow(keep.len() as u32)];
    let mut coords = vec![0usize; dims];
    for &value in table {
        let mut weight = 1.0;
        let mut out_idx = 0;
        let mut next_keep = 0;
        for (p, &c) in coords.iter().enumerate() {
            if keep.get(next_keep) == Some(&(p + 1)) {
                out_idx = out_idx * s + c;
                next_keep += 1;
            } else {
                weight *= mu[c];
            }
        }
        out[out_idx] += value * weight;
        for c in (0..dims).rev() {
            coords[c] += 1;
            if coords[c] < s {
                break;
            }
            coords[c] = 0;
        }
    }
    out
}

/// `sum_{x, y} left(x) right(y) prod_s pairs[s](x_s, y_s)`, contracting
/// one axis at a time.
fn contract(left: &[f64], right: &[f64], pairs: &[DMatrix<f64>]) -> f64 {
    let s = pairs.first().map_or(1, |m| m.nrows());
    let dims = pairs.len();
    let mut t = right.to_vec();
    let mut scratch = vec![0.0; t.len()];
    for (axis, j) in pairs.iter().enumerate() {
        let stride = s.pow((dims - 1 - axis) as u32);
        let block = stride * s;
        for (src, dst) in t.chunks_exact(block).zip(scratch.chunks_exact_mut(block)) {
            for x in 0..s {
                for inner in 0..stride {
                    let mut acc = 0.0;
                    for y in 0..s {
                        acc += j[(x, y)] * src[y * stride + inner];
                    }
                    dst[x * stride + inner] = acc;
                }
            }
        }
        std::mem::swap(&mut t, &mut scratch);
    }
    left.iter().zip(&t).map(|(a, b)| a * b).sum()
}

fn weighted_l1(table: &[f64], mu: &[f64], dims: usize) -> f64 {
    let s = mu.len();
    table
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let w: f64 = (0..dims).map(|c| mu[(idx / s.pow(c as u32)) % s]).product();
            v.abs() * w
        })
        .sum()
}

fn check_marginal(mu: &[f64], pi: &[f64]) -> Result<()> {
    if mu.len() != pi.len() || mu.iter().zip(pi).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidObservable("decomposition was not built against the stationary law".into()));
    }
    Ok(())
}

/// The resonant marginals `A_i`, `A_j` of a linear pair.
#[derive(Debug, Clone)]
struct ResonantPair {
    left: Vec<f64>,
    right: Vec<f64>,
    /// `||A_i||_1 ||A_j||_1` in `L^1(pi)`.
    l1: f64,
}

impl ResonantPair {
    fn new(decomposition: &Decomposition, i: usize, j: usize, keep_i: &[usize], keep_j: &[usize]) -> Self {
        let mu = decomposition.mu();
        let left = integrate_out(decomposition.component(i), i, keep_i, mu);
        let right = integrate_out(decomposition.component(j), j, keep_j, mu);
        let l1 = weighted_l1(&left, mu, keep_i.len()) * weighted_l1(&right, mu, keep_j.len());
        Self { left, right, l1 }
    }

    fn is_zero(&self) -> bool {
        self.l1 == 0.0
    }
}

fn discrete_resonance(decomposition: &Decomposition, g: &GcdStructure) -> ResonantPair {
    let keep_i: Vec<usize> = (1..=g.upsilon).map(|s| s * g.i_prime).collect();
    let keep_j: Vec<usize> = (1..=g.upsilon).map(|s| s * g.j_prime).collect();
    ResonantPair::new(decomposition, g.i, g.j, &keep_i, &keep_j)
}

fn check_linear(decomposition: &Decomposition, i: usize, j: usize) -> Result<()> {
    if i == 0 || j == 0 || i > decomposition.ell() || j > decomposition.ell() {
        return Err(Error::InvalidExperiment(format!("components ({i}, {j}) outside 1..={}", decomposition.ell())));
    }
    Ok(())
}

fn discrete_a(model: &DiscreteMarkovModel, pair: &ResonantPair, upsilon: usize, u: i64) -> f64 {
    let joints: Vec<DMatrix<f64>> =
        (1..=upsilon as i64).map(|s| model.pair_distribution(-s * u).joint).collect();
    contract(&pair.left, &pair.right, &joints)
}

/// `a_{i,j}(u, 2u, ..., g u)` for a stationary discrete chain.
pub fn a_term(model: &DiscreteMarkovModel, decomposition: &Decomposition, i: usize, j: usize, u: i64) -> Result<f64> {
    check_linear(decomposition, i, j)?;
    check_marginal(decomposition.mu(), model.stationary())?;
    let g = gcd_structure(i, j);
    let pair = discrete_resonance(decomposition, &g);
    Ok(if pair.is_zero() { 0.0 } else { discrete_a(model, &pair, g.upsilon, u) })
}

/// A computed term of the `a`-series with its a priori bound
/// `||A_i||_1 ||A_j||_1 psi(|u|) (1 + psi(|u|))^(g - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ATerm {
    pub u: i64,
    pub value: f64,
    pub bound: f64,
}

/// `a(u)` for `|u| <= max_u` in summation order `0, 1, -1, 2, -2, ...`.
pub fn a_series(
    model: &DiscreteMarkovModel,
    decomposition: &Decomposition,
    i: usize,
    j: usize,
    max_u: u64,
) -> Result<Vec<ATerm>> {
    check_linear(decomposition, i, j)?;
    check_marginal(decomposition.mu(), model.stationary())?;
    let g = gcd_structure(i, j);
    let pair = discrete_resonance(decomposition, &g);
    let tail = PsiTail::discrete(model, max_u as usize);
    let mut out = Vec::new();
    for m in 0..=max_u as i64 {
        let psi = tail.psi(m as usize).unwrap();
        let bound = pair.l1 * psi * (1.0 + psi).powi(g.upsilon as i32 - 1);
        for u in if m == 0 { vec![0] } else { vec![m, -m] } {
            let value = if pair.is_zero() { 0.0 } else { discrete_a(model, &pair, g.upsilon, u) };
            out.push(ATerm { u, value, bound });
        }
    }
    Ok(out)
}

/// One entry of `D` with its truncation error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DEntry {
    pub value: f64,
    pub error_bound: f64,
    /// Largest `|u|` summed (discrete) or integration half-width (continuous).
    pub extent: f64,
    pub upsilon: usize,
}

/// `D_{i,j} = (g/(ij)) sum_u a(u)`, `i, j <= k`, truncated per `policy`.
pub fn d_linear(
    model: &DiscreteMarkovModel,
    decomposition: &Decomposition,
    i: usize,
    j: usize,
    policy: &TruncationPolicy,
) -> Result<DEntry> {
    check_linear(decomposition, i, j)?;
    check_marginal(decomposition.mu(), model.stationary())?;
    let g = gcd_structure(i, j);
    let pair = discrete_resonance(decomposition, &g);
    let factor = g.upsilon as f64 / (i * j) as f64;
    if pair.is_zero() {
        return Ok(DEntry { value: 0.0, error_bound: 0.0, extent: 0.0, upsilon: g.upsilon });
    }
    let full_horizon = policy.max_lag as usize * 2 + 2;
    let mut tail = PsiTail::discrete(model, 64.min(full_horizon));
    let mut tail_bound = |after: u64| -> Option<f64> {
        loop {
            let found = tail.psi(after as usize + 1).zip(tail.tail_sum(after as usize));
            if found.is_some() || tail.max_lag() >= full_horizon {
                let (psi_next, sum) = found?;
                return Some(2.0 * factor * pair.l1 * (1.0 + psi_next).powi(g.upsilon as i32 - 1) * sum);
            }
            tail = PsiTail::discrete(model, (tail.max_lag() * 2).min(full_horizon));
        }
    };

    let mut total = discrete_a(model, &pair, g.upsilon, 0);
    let mut quiet = 0usize;
    let mut m = 0u64;
    loop {
        let bound = tail_bound(m);
        match policy.tail_bound_mode {
            TailBoundMode::Geometric => {
                if bound.is_some_and(|b| b <= policy.abs_tol) {
                    return Ok(DEntry {
                        value: factor * total,
                        error_bound: bound.unwrap(),
                        extent: m as f64,
                        upsilon: g.upsilon,
                    });
                }
            }
            TailBoundMode::Plateau { run } => {
                if quiet >= run {
                    return Ok(DEntry {
                        value: factor * total,
                        error_bound: bound.unwrap_or(f64::INFINITY),
                        extent: m as f64,
                        upsilon: g.upsilon,
                    });
                }
            }
        }
        if m >= policy.max_lag {
            return Err(Error::TruncationFailed {
                bound: bound.unwrap_or(f64::INFINITY),
                tol: policy.abs_tol,
                max_lag: policy.max_lag,
            });
        }
        m += 1;
        let step = discrete_a(model, &pair, g.upsilon, m as i64) + discrete_a(model, &pair, g.upsilon, -(m as i64));
        total += step;
        if (factor * step).abs() < policy.abs_tol {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }
}

/// `D_{i,i} = int F_i^2 d mu^i` for a fast component `i > k`.
pub fn d_fast_diagonal(decomposition: &Decomposition, i: usize) -> f64 {
    decomposition.second_moment(i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairInfo {
    pub i: usize,
    pub j: usize,
    pub upsilon: usize,
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub mode: TimeMode,
    pub k: usize,
    pub ell: usize,
    /// Row-major `ell x ell`.
    pub d: Vec<Vec<f64>>,
    pub error_bounds: Vec<Vec<f64>>,
    /// Time scales of the linear components (`alpha_i`, default `i`).
    pub scales: Vec<f64>,
    pub pairs: Vec<PairInfo>,
    pub policy: TruncationPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprints: Option<crate::report::Fingerprints>,
}

impl CovarianceReport {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.d[i - 1][j - 1]
    }

    pub fn error_bound(&self, i: usize, j: usize) -> f64 {
        self.error_bounds[i - 1][j - 1]
    }

    /// Largest `|D_ij - D_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.ell {
            for j in 0..self.ell {
                worst = worst.max((self.d[i][j] - self.d[j][i]).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the `k x k` linear block.
    pub fn min_linear_eigenvalue(&self) -> f64 {
        let block = DMatrix::from_fn(self.k, self.k, |a, b| 0.5 * (self.d[a][b] + self.d[b][a]));
        SymmetricEigen::new(block).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Cov(xi(s), xi(t)) = sum_{i,j<=k} D_ij min(a_i s, a_j t) + sum_{i>k} D_ii min(s, t)`.
    pub fn xi_covariance(&self, s: f64, t: f64) -> f64 {
        let mut total = 0.0;
        for i in 1..=self.k {
            for j in 1..=self.k {
                total += self.entry(i, j) * (self.scales[i - 1] * s).min(self.scales[j - 1] * t);
            }
        }
        for i in self.k + 1..=self.ell {
            total += self.entry(i, i) * s.min(t);
        }
        total
    }

    /// Error bound carried by [`Self::xi_covariance`].
    pub fn xi_covariance_bound(&self, s: f64, t: f64) -> f64 {
        let mut total = 0.0;
        for i in 1..=self.k {
            for j in 1..=self.k {
                total += self.error_bound(i, j) * (self.scales[i - 1] * s).min(self.scales[j - 1] * t);
            }
        }
        total
    }
}

fn empty_report(mode: TimeMode, k: usize, ell: usize, scales: Vec<f64>, policy: &TruncationPolicy) -> CovarianceReport {
    CovarianceReport {
        mode,
        k,
        ell,
        d: vec![vec![0.0; ell]; ell],
        error_bounds: vec![vec![0.0; ell]; ell],
        scales,
        pairs: Vec::new(),
        policy: *policy,
        fingerprints: None,
    }
}

fn check_arity(decomposition: &Decomposition, schedule: &Schedule) -> Result<()> {
    if decomposition.ell() != schedule.ell() {
        return Err(Error::InvalidExperiment(format!(
            "observable has arity {}, schedule has {} functions",
            decomposition.ell(),
            schedule.ell()
        )));
    }
    Ok(())
}

/// Full discrete-time covariance matrix. Entries mixing a fast component
/// with any other component are exactly 0.
pub fn assemble_d(
    model: &DiscreteMarkovModel,
    decomposition: &Decomposition,
    schedule: &Schedule,
    policy: &TruncationPolicy,
) -> Result<CovarianceReport> {
    check_arity(decomposition, schedule)?;
    let (k, ell) = (schedule.k(), schedule.ell());
    let scales = (1..=k).map(|i| i as f64).collect();
    let mut report = empty_report(TimeMode::Discrete, k, ell, scales, policy);
    for i in 1..=k {
        for j in 1..=i {
            let e = d_linear(model, decomposition, i, j, policy)?;
            report.d[i - 1][j - 1] = e.value;
            report.d[j - 1][i - 1] = e.value;
            report.error_bounds[i - 1][j - 1] = e.error_bound;
            report.error_bounds[j - 1][i - 1] = e.error_bound;
            report.pairs.push(PairInfo { i, j, upsilon: e.upsilon, extent: e.extent });
        }
    }
    for i in k + 1..=ell {
        report.d[i - 1][i - 1] = d_fast_diagonal(decomposition, i);
    }
    Ok(report)
}

/// Settings for the continuous-time integral over the lag variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub max_depth: u32,
    /// Largest admissible half-width of the integration window.
    pub max_window: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_depth: 40, max_window: 1e4 }
    }
}

/// Coordinate pairs `(a, b)`, `a <= i`, `b <= j`, with
/// `alpha_a / alpha_i = alpha_b / alpha_j`, and that common ratio.
pub fn resonant_pairs(alpha: &[f64], i: usize, j: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for a in 1..=i {
        let rho = alpha[a - 1] / alpha[i - 1];
        for b in 1..=j {
            let other = alpha[b - 1] / alpha[j - 1];
            if (rho - other).abs() <= 1e-12 * rho.max(other) {
                out.push((a, b, rho));
            }
        }
    }
    out
}

fn psi_continuous(model: &ContinuousMarkovModel, t: f64) -> f64 {
    psi_coefficient(&model.kernel(t), model.stationary())
}

fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailed(format!("no convergence on [{a:.6}, {b:.6}]")));
    }
    Ok(simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Adaptive Simpson integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    // split once up front so a symmetric integrand cannot fool the first test
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let (fl, fr) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
    let left_whole = (m - a) / 6.0 * (fa + 4.0 * fl + fm);
    let right_whole = (b - m) / 6.0 * (fm + 4.0 * fr + fb);
    Ok(simpson(&f, a, m, fa, fl, fm, left_whole, 0.5 * tol, max_depth)?
        + simpson(&f, m, b, fm, fr, fb, right_whole, 0.5 * tol, max_depth)?)
}

/// `D_{i,j} = (1/(alpha_i alpha_j)) int a(rho_1 z, ..., z) dz` for a
/// continuous-time chain with rates `alpha` (default `1, ..., k`).
pub fn d_linear_continuous(
    model: &ContinuousMarkovModel,
    decomposition: &Decomposition,
    i: usize,
    j: usize,
    alpha: &[f64],
    quadrature: &Quadrature,
) -> Result<DEntry> {
    check_linear(decomposition, i, j)?;
    check_marginal(decomposition.mu(), model.stationary())?;
    if i > alpha.len() || j > alpha.len() {
        return Err(Error::InvalidExperiment("rates missing for a linear component".into()));
    }
    let resonant = resonant_pairs(alpha, i, j);
    let keep_i: Vec<usize> = resonant.iter().map(|r| r.0).collect();
    let keep_j: Vec<usize> = resonant.iter().map(|r| r.1).collect();
    let rhos: Vec<f64> = resonant.iter().map(|r| r.2).collect();
    let upsilon = resonant.len();
    let pair = ResonantPair::new(decomposition, i, j, &keep_i, &keep_j);
    let factor = 1.0 / (alpha[i - 1] * alpha[j - 1]);
    if pair.is_zero() || model.num_states() == 1 {
        return Ok(DEntry { value: 0.0, error_bound: 0.0, extent: 0.0, upsilon });
    }

    let integrand = |z: f64| -> f64 {
        let joints: Vec<DMatrix<f64>> = rhos.iter().map(|&r| model.pair_distribution(-r * z).joint).collect();
        contract(&pair.left, &pair.right, &joints)
    };

    // geometric tail: psi(t + h) <= psi(t) psi(h), psi nonincreasing
    let gap = model.spectral_gap();
    let mut h = 1.0 / gap;
    let mut psi_h = psi_continuous(model, h);
    while psi_h > 0.5 {
        h *= 2.0;
        if h > quadrature.max_window {
            return Err(Error::QuadratureFailed("psi does not contract within the window".into()));
        }
        psi_h = psi_continuous(model, h);
    }
    let rho_min = rhos.iter().copied().fold(1.0, f64::min);
    let tail = |w: f64| -> f64 {
        let lead = (1.0 + psi_continuous(model, rho_min * w)).powi(upsilon as i32 - 1);
        2.0 * factor * pair.l1 * lead * h * psi_continuous(model, w) / (1.0 - psi_h)
    };
    let budget = quadrature.abs_tol;
    let mut w = h;
    let mut tail_bound = tail(w);
    while tail_bound > 0.1 * budget {
        w *= 1.5;
        if w > quadrature.max_window {
            return Err(Error::QuadratureFailed(format!(
                "tail bound {tail_bound:.3e} above {:.3e} at window {w:.1}",
                0.1 * budget
            )));
        }
        tail_bound = tail(w);
    }
    let tol = 0.45 * budget / factor;
    let left = adaptive_simpson(integrand, -w, 0.0, tol, quadrature.max_depth)?;
    let right = adaptive_simpson(integrand, 0.0, w, tol, quadrature.max_depth)?;
    Ok(DEntry { value: factor * (left + right), error_bound: tail_bound + 0.9 * budget, extent: w, upsilon })
}

/// Continuous-time covariance matrix. The fast components have vanishing
/// limits, so only the linear block is filled.
pub fn assemble_d_continuous(
    model: &ContinuousMarkovModel,
    decomposition: &Decomposition,
    schedule: &Schedule,
    quadrature: &Quadrature,
) -> Result<CovarianceReport> {
    check_arity(decomposition, schedule)?;
    let (k, ell) = (schedule.k(), schedule.ell());
    let scales: Vec<f64> = (1..=k).map(|i| schedule.scale(i)).collect();
    let policy = TruncationPolicy {
        abs_tol: quadrature.abs_tol,
        max_lag: quadrature.max_window as u64,
        tail_bound_mode: TailBoundMode::Geometric,
    };
    let mut report = empty_report(TimeMode::Continuous, k, ell, scales.clone(), &policy);
    for i in 1..=k {
        for j in 1..=i {
            let e = d_linear_continuous(model, decomposition, i, j, &scales, quadrature)?;
            report.d[i - 1][j - 1] = e.value;
            report.d[j - 1][i - 1] = e.value;
            report.error_bounds[i - 1][j - 1] = e.error_bound;
            report.error_bounds[j - 1][i - 1] = e.error_bound;
            report.pairs.push(PairInfo { i, j, upsilon: e.upsilon, extent: e.extent });
        }
    }
    Ok(report)
}
