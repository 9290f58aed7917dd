//! Finite-state process models with exactly computable marginal, pair and
//! conditional laws.
//!
//! A model is a Markov chain `Y(n)` (or `Y(t)`) on states `0..S` together
//! with an observable map `state -> R^d`; the observed process is
//! `X(n) = observable(Y(n))`. All downstream computations work on state
//! indices, with the stationary law `pi` playing the role of the marginal.
//!
//! Pair-measure convention: for `lag >= 0`,
//! `pair_distribution(lag).joint[(a, b)] = P(Y(m) = a, Y(m + lag) = b)`,
//! and negative lags transpose, `joint(-lag) = joint(lag)^T`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{self, PowerLadder};
use crate::rng::replica_rng;

/// A point of the observed process in `R^d`.
pub type Point = Vec<f64>;

const PROB_TOL: f64 = 1e-12;

/// Default cap on the largest simulated index (discrete steps or time units).
pub const DEFAULT_HORIZON_CAP: u64 = 1 << 40;

/// Exact alpha-mixing enumerates `2^S` events; above this size the
/// phi-based bound is reported instead.
pub const EXACT_ALPHA_MAX_STATES: usize = 12;

fn check_probability_vector(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidModel(format!("{what} has negative or non-finite entries")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

fn check_observable(observable: &[Point], states: usize) -> Result<usize> {
    if observable.len() != states {
        return Err(Error::InvalidModel(format!(
            "observable has {} entries for {states} states",
            observable.len()
        )));
    }
    let dim = observable[0].len();
    if dim == 0 {
        return Err(Error::InvalidModel("observable values must have dimension >= 1".into()));
    }
    if observable.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidModel("observable values must share one finite dimension".into()));
    }
    Ok(dim)
}

fn square_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidModel(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel(format!("{what} must be square")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n, n, |a, b| rows[a][b]))
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|s| s.to_string()).collect()
}

/// Joint law of a pair of observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasure {
    pub lag: f64,
    pub joint: DMatrix<f64>,
}

impl PairMeasure {
    /// Checks total mass and both marginals against `pi` to `tol`.
    pub fn check_marginals(&self, pi: &[f64], tol: f64) -> bool {
        let n = pi.len();
        let total: f64 = self.joint.iter().sum();
        if (total - 1.0).abs() > tol {
            return false;
        }
        (0..n).all(|a| {
            let row: f64 = self.joint.row(a).iter().sum();
            let col: f64 = self.joint.column(a).iter().sum();
            (row - pi[a]).abs() <= tol && (col - pi[a]).abs() <= tol
        })
    }

    pub fn transpose(&self) -> Self {
        Self { lag: -self.lag, joint: self.joint.transpose() }
    }
}

fn joint_from_kernel(pi: &[f64], kernel: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(pi.len(), pi.len(), |a, b| pi[a] * kernel[(a, b)])
}

/// Discrete-time finite-state Markov chain with a state observable.
#[derive(Debug, Clone)]
pub struct DiscreteMarkovModel {
    labels: Vec<String>,
    transition: DMatrix<f64>,
    initial: Vec<f64>,
    observable: Vec<Point>,
    stationary: Vec<f64>,
    memoryless: bool,
    ladder: OnceLock<PowerLadder>,
}

impl DiscreteMarkovModel {
    pub fn new(
        labels: Option<Vec<String>>,
        transition: &[Vec<f64>],
        observable: Vec<Point>,
        initial: Option<Vec<f64>>,
    ) -> Result<Self> {
        let p = square_matrix(transition, "transition matrix")?;
        let n = p.nrows();
        for a in 0..n {
            if p.row(a).iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidModel(format!("row {a} has negative entries")));
            }
            let total: f64 = p.row(a).iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidModel(format!("row {a} sums to {total}, not 1")));
            }
        }
        check_observable(&observable, n)?;
        linalg::check_ergodic_transition(&p)?;
        let memoryless = (1..n).all(|a| p.row(a) == p.row(0));
        let stationary = if memoryless {
            p.row(0).iter().copied().collect()
        } else {
            linalg::stationary_of_transition(&p)?
        };
        let initial = match initial {
            Some(v) => {
                if v.len() != n {
                    return Err(Error::InvalidModel("initial distribution has wrong length".into()));
                }
                check_probability_vector(&v, "initial distribution")?;
                v
            }
            None => stationary.clone(),
        };
        let labels = labels.unwrap_or_else(|| default_labels(n));
        if labels.len() != n {
            return Err(Error::InvalidModel("label count differs from state count".into()));
        }
        Ok(Self {
            labels,
            transition: p,
            initial,
            observable,
            stationary,
            memoryless,
            ladder: OnceLock::new(),
        })
    }

    pub fn num_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn observable(&self) -> &[Point] {
        &self.observable
    }

    pub fn dim(&self) -> usize {
        self.observable[0].len()
    }

    /// Stationary distribution, computed once at construction.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// True when all rows of `P` coincide, i.e. the observed process is i.i.d.
    pub fn is_memoryless(&self) -> bool {
        self.memoryless
    }

    pub fn starts_stationary(&self) -> bool {
        self.initial.iter().zip(&self.stationary).all(|(a, b)| (a - b).abs() <= PROB_TOL)
    }

    /// Same chain with a different observable map.
    pub fn with_observable(&self, observable: Vec<Point>) -> Result<Self> {
        check_observable(&observable, self.num_states())?;
        Ok(Self { observable, ..self.clone() })
    }

    /// Same chain started from a different initial law.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.num_states() {
            return Err(Error::InvalidModel("initial distribution has wrong length".into()));
        }
        check_probability_vector(&initial, "initial distribution")?;
        Ok(Self { initial, ..self.clone() })
    }

    pub fn ladder(&self) -> &PowerLadder {
        self.ladder.get_or_init(|| PowerLadder::new(&self.transition))
    }

    /// `P^n`; exactly `1 pi` for `n >= 1` when the chain is memoryless.
    pub fn transition_power(&self, n: u64) -> DMatrix<f64> {
        let s = self.num_states();
        if n == 0 {
            return DMatrix::identity(s, s);
        }
        if self.memoryless {
            return DMatrix::from_fn(s, s, |_, b| self.stationary[b]);
        }
        self.ladder().pow(n)
    }

    pub fn spectral_gap(&self) -> f64 {
        if self.memoryless {
            return 1.0;
        }
        linalg::spectral_gap_transition(&self.transition)
    }

    pub fn pair_distribution(&self, lag: i64) -> PairMeasure {
        let kernel = self.transition_power(lag.unsigned_abs());
        let joint = joint_from_kernel(&self.stationary, &kernel);
        let forward = PairMeasure { lag: lag.unsigned_abs() as f64, joint };
        if lag < 0 {
            forward.transpose()
        } else {
            forward
        }
    }
}

/// Finite i.i.d. law of `X(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IidModel {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl IidModel {
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidModel("atoms and weights must be non-empty and equally long".into()));
        }
        check_observable(&atoms, atoms.len())?;
        check_probability_vector(&weights, "weights")?;
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidModel("atom weights must be positive".into()));
        }
        for a in 0..atoms.len() {
            for b in 0..a {
                if atoms[a] == atoms[b] {
                    return Err(Error::InvalidModel(format!("atoms {b} and {a} coincide")));
                }
            }
        }
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The chain whose rows all equal the weight vector.
    pub fn to_chain(&self) -> DiscreteMarkovModel {
        let rows: Vec<Vec<f64>> = vec![self.weights.clone(); self.weights.len()];
        DiscreteMarkovModel::new(None, &rows, self.atoms.clone(), None)
            .expect("validated i.i.d. law is an ergodic chain")
    }
}

/// Continuous-time finite-state Markov chain with a state observable.
#[derive(Debug, Clone)]
pub struct ContinuousMarkovModel {
    labels: Vec<String>,
    generator: DMatrix<f64>,
    initial: Vec<f64>,
    observable: Vec<Point>,
    stationary: Vec<f64>,
    jump_cdf: Vec<Vec<f64>>,
}

impl ContinuousMarkovModel {
    pub fn new(
        labels: Option<Vec<String>>,
        generator: &[Vec<f64>],
        observable: Vec<Point>,
        initial: Option<Vec<f64>>,
    ) -> Result<Self> {
        let q = square_matrix(generator, "generator")?;
        let n = q.nrows();
        for a in 0..n {
            for b in 0..n {
                if a != b && q[(a, b)] < 0.0 {
                    return Err(Error::InvalidModel(format!("negative rate q[{a}][{b}]")));
                }
            }
            let total: f64 = q.row(a).iter().sum();
            if total.abs() > PROB_TOL {
                return Err(Error::InvalidModel(format!("generator row {a} sums to {total}, not 0")));
            }
        }
        check_observable(&observable, n)?;
        linalg::check_irreducible_generator(&q)?;
        let stationary = if n == 1 { vec![1.0] } else { linalg::stationary_of_generator(&q)? };
        let initial = match initial {
            Some(v) => {
                if v.len() != n {
                    return Err(Error::InvalidModel("initial distribution has wrong length".into()));
                }
                check_probability_vector(&v, "initial distribution")?;
                v
            }
            None => stationary.clone(),
        };
        let labels = labels.unwrap_or_else(|| default_labels(n));
        if labels.len() != n {
            return Err(Error::InvalidModel("label count differs from state count".into()));
        }
        let jump_cdf = (0..n)
            .map(|a| {
                let rate = -q[(a, a)];
                let mut acc = 0.0;
                let mut cdf: Vec<f64> = (0..n)
                    .map(|b| {
                        if b != a && rate > 0.0 {
                            acc += q[(a, b)] / rate;
                        }
                        acc
                    })
                    .collect();
                if let Some(last) = (0..n).rev().find(|&b| b != a && q[(a, b)] > 0.0) {
                    for c in cdf.iter_mut().skip(last) {
                        *c = 1.0;
                    }
                }
                cdf
            })
            .collect();
        Ok(Self { labels, generator: q, initial, observable, stationary, jump_cdf })
    }

    pub fn num_states(&self) -> usize {
        self.generator.nrows()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn observable(&self) -> &[Point] {
        &self.observable
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn with_observable(&self, observable: Vec<Point>) -> Result<Self> {
        check_observable(&observable, self.num_states())?;
        Ok(Self { observable, ..self.clone() })
    }

    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.num_states() {
            return Err(Error::InvalidModel("initial distribution has wrong length".into()));
        }
        check_probability_vector(&initial, "initial distribution")?;
        Ok(Self { initial, ..self.clone() })
    }

    pub fn spectral_gap(&self) -> f64 {
        linalg::spectral_gap_generator(&self.generator)
    }

    /// `e^{Q t}` for `t >= 0`.
    pub fn kernel(&self, t: f64) -> DMatrix<f64> {
        if t == 0.0 || self.num_states() == 1 {
            return DMatrix::identity(self.num_states(), self.num_states());
        }
        linalg::expm(&(&self.generator * t))
    }

    pub fn pair_distribution(&self, lag: f64) -> PairMeasure {
        let kernel = self.kernel(lag.abs());
        let forward = PairMeasure { lag: lag.abs(), joint: joint_from_kernel(&self.stationary, &kernel) };
        if lag < 0.0 {
            forward.transpose()
        } else {
            forward
        }
    }

    /// Unit-time skeleton chain `e^Q` (used for mixing tables).
    pub fn skeleton(&self) -> Result<DiscreteMarkovModel> {
        let k = self.kernel(1.0);
        let rows: Vec<Vec<f64>> = (0..k.nrows())
            .map(|a| {
                let row: Vec<f64> = k.row(a).iter().map(|&x| x.max(0.0)).collect();
                let total: f64 = row.iter().sum();
                row.into_iter().map(|x| x / total).collect()
            })
            .collect();
        DiscreteMarkovModel::new(Some(self.labels.clone()), &rows, self.observable.clone(), None)
    }

    /// Simulates the jump chain with exponential holding times on `[0, horizon]`.
    pub fn simulate_path<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<CtmcPath> {
        if horizon > DEFAULT_HORIZON_CAP as f64 {
            return Err(Error::HorizonOverflow { index: horizon as u64, cap: DEFAULT_HORIZON_CAP });
        }
        let start = sample_from(&cumulative(&self.initial), rng);
        Ok(self.simulate_from(start, horizon, rng))
    }

    pub(crate) fn simulate_from<R: Rng + ?Sized>(&self, start: usize, horizon: f64, rng: &mut R) -> CtmcPath {
        let mut times = vec![0.0];
        let mut states = vec![start];
        let mut state = start;
        let mut now = 0.0;
        loop {
            let rate = -self.generator[(state, state)];
            if rate <= 0.0 {
                break;
            }
            let hold: f64 = Exp1.sample(rng);
            now += hold / rate;
            if now > horizon {
                break;
            }
            state = sample_from(&self.jump_cdf[state], rng);
            times.push(now);
            states.push(state);
        }
        CtmcPath { times, states, horizon }
    }
}

/// Piecewise-constant path: `states[k]` holds on `[times[k], times[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcPath {
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl CtmcPath {
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        self.states[k.saturating_sub(1)]
    }

    /// Jump times in `(0, horizon]`.
    pub fn jump_times(&self) -> &[f64] {
        &self.times[1..]
    }
}

/// Either kind of Markov model.
#[derive(Debug, Clone)]
pub enum ProcessModel {
    Discrete(DiscreteMarkovModel),
    Continuous(ContinuousMarkovModel),
}

impl ProcessModel {
    pub fn stationary(&self) -> &[f64] {
        match self {
            Self::Discrete(m) => m.stationary(),
            Self::Continuous(m) => m.stationary(),
        }
    }

    pub fn observable(&self) -> &[Point] {
        match self {
            Self::Discrete(m) => m.observable(),
            Self::Continuous(m) => m.observable(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.stationary().len()
    }

    pub fn with_observable(&self, observable: Vec<Point>) -> Result<Self> {
        Ok(match self {
            Self::Discrete(m) => Self::Discrete(m.with_observable(observable)?),
            Self::Continuous(m) => Self::Continuous(m.with_observable(observable)?),
        })
    }
}

/// Stationary law of either model kind (discrete: `pi P = pi`,
/// continuous: `pi Q = 0`).
pub fn stationary_distribution(model: &ProcessModel) -> Vec<f64> {
    model.stationary().to_vec()
}

pub(crate) fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = p
        .iter()
        .map(|&x| {
            acc += x.max(0.0);
            acc
        })
        .collect();
    let total = acc;
    for c in &mut cdf {
        *c /= total;
    }
    if let Some(last) = p.iter().rposition(|&x| x > 0.0) {
        for c in cdf.iter_mut().skip(last) {
            *c = 1.0;
        }
    }
    cdf
}

#[inline]
pub(crate) fn sample_from<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if cdf.len() <= 8 {
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    } else {
        cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
    }
}

/// Convergence threshold for cached powers `P^g`: beyond it rows of `P^g`
/// are replaced by `pi`, a change below the resolution of a 53-bit uniform.
const JUMP_CONVERGED: f64 = 1e-15;
const MAX_CACHED_GAP: usize = 4096;

/// Samples `Y(m + g)` given `Y(m)` from cached rows of `P^g`.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    /// `cdfs[g - 1][a]` is the CDF of row `a` of `P^g`.
    cdfs: Vec<Vec<Vec<f64>>>,
    stationary_cdf: Vec<f64>,
    initial_cdf: Vec<f64>,
    converged: bool,
}

impl JumpSampler {
    pub fn new(model: &DiscreteMarkovModel) -> Self {
        let s = model.num_states();
        let pi = model.stationary();
        let mut cdfs = Vec::new();
        let mut converged = false;
        let mut power = DMatrix::<f64>::identity(s, s);
        let limit = if model.is_memoryless() { 1 } else { MAX_CACHED_GAP };
        for _ in 0..limit {
            power = if model.is_memoryless() { model.transition_power(1) } else { &power * model.transition() };
            cdfs.push((0..s).map(|a| cumulative(&power.row(a).iter().copied().collect::<Vec<_>>())).collect());
            let dist = (0..s)
                .flat_map(|a| (0..s).map(move |b| (a, b)))
                .map(|(a, b)| (power[(a, b)] - pi[b]).abs())
                .fold(0.0, f64::max);
            if dist <= JUMP_CONVERGED || model.is_memoryless() {
                converged = true;
                break;
            }
        }
        Self {
            cdfs,
            stationary_cdf: cumulative(pi),
            initial_cdf: cumulative(model.initial()),
            converged,
        }
    }

    pub fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_from(&self.initial_cdf, rng)
    }

    pub fn stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_from(&self.stationary_cdf, rng)
    }

    /// Draws `Y(m + gap)` given `Y(m) = state`.
    pub fn advance<R: Rng + ?Sized>(&self, state: usize, gap: u64, rng: &mut R) -> usize {
        if gap == 0 {
            return state;
        }
        let cached = self.cdfs.len() as u64;
        if gap <= cached {
            return sample_from(&self.cdfs[gap as usize - 1][state], rng);
        }
        if self.converged {
            return sample_from(&self.stationary_cdf, rng);
        }
        let mut state = state;
        let mut left = gap;
        while left > cached {
            state = sample_from(&self.cdfs[cached as usize - 1][state], rng);
            left -= cached;
        }
        self.advance(state, left, rng)
    }

    /// States at the sorted times `indices`, with `Y(0)` drawn from the
    /// initial law.
    pub fn sample_states<R: Rng + ?Sized>(&self, indices: &[u64], rng: &mut R) -> Vec<usize> {
        let mut state = self.initial(rng);
        let mut now = 0u64;
        indices
            .iter()
            .map(|&m| {
                state = self.advance(state, m - now, rng);
                now = m;
                state
            })
            .collect()
    }
}

/// Draws the observable at sorted discrete times `indices`, reproducibly
/// from `seed`.
pub fn sample_at(model: &DiscreteMarkovModel, indices: &[u64], seed: u64) -> Result<Vec<Point>> {
    sample_at_capped(model, indices, seed, DEFAULT_HORIZON_CAP)
}

pub fn sample_at_capped(model: &DiscreteMarkovModel, indices: &[u64], seed: u64, cap: u64) -> Result<Vec<Point>> {
    if indices.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidExperiment("indices must be sorted ascending".into()));
    }
    if let Some(&last) = indices.last() {
        if last > cap {
            return Err(Error::HorizonOverflow { index: last, cap });
        }
    }
    let sampler = JumpSampler::new(model);
    let mut rng = replica_rng(seed, 0);
    Ok(sampler
        .sample_states(indices, &mut rng)
        .into_iter()
        .map(|s| model.observable()[s].clone())
        .collect())
}

/// Continuous-time counterpart: reads one simulated path at sorted query
/// times and also returns the path itself (jump times up to the last query).
pub fn sample_at_continuous(model: &ContinuousMarkovModel, times: &[f64], seed: u64) -> Result<(Vec<Point>, CtmcPath)> {
    if times.windows(2).any(|w| w[0] > w[1]) || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidExperiment("query times must be sorted and nonnegative".into()));
    }
    let horizon = times.last().copied().unwrap_or(0.0);
    let mut rng = replica_rng(seed, 0);
    let path = model.simulate_path(horizon, &mut rng)?;
    let values = times.iter().map(|&t| model.observable()[path.state_at(t)].clone()).collect();
    Ok((values, path))
}

/// Exact per-lag mixing coefficients of a stationary finite chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub horizon: usize,
    /// Index `n` holds the coefficient at lag `n`, for `n = 0..=horizon`.
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    /// False when `alpha` holds the bound `phi / 2` instead of exact values.
    pub alpha_exact: bool,
}

pub fn psi_coefficient(pn: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let s = pi.len();
    let mut best: f64 = 0.0;
    for a in 0..s {
        for b in 0..s {
            best = best.max((pn[(a, b)] - pi[b]).abs() / pi[b]);
        }
    }
    best
}

pub fn phi_coefficient(pn: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let s = pi.len();
    (0..s)
        .map(|a| 0.5 * (0..s).map(|b| (pn[(a, b)] - pi[b]).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value of `D^{1/2} (P^n - 1 pi) D^{-1/2}`, the norm of
/// `g -> E[g(Y_n) | Y_0] - E g` on `L^2(pi)`.
pub fn rho_coefficient(pn: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let s = pi.len();
    let m = DMatrix::from_fn(s, s, |a, b| pi[a].sqrt() * (pn[(a, b)] - pi[b]) / pi[b].sqrt());
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `sup_{A,B} |P(Y_0 in A, Y_n in B) - pi(A) pi(B)|`. For fixed `A` the best
/// `B` collects the positive (or negative) parts of the signed measure, so
/// the supremum is `max_A (1/2) sum_b |sum_{a in A} pi_a (P^n_ab - pi_b)|`.
pub fn alpha_coefficient_exact(pn: &DMatrix<f64>, pi: &[f64]) -> Result<f64> {
    let s = pi.len();
    if s > EXACT_ALPHA_MAX_STATES {
        return Err(Error::StateSpaceTooLarge { states: s, max: EXACT_ALPHA_MAX_STATES });
    }
    let signed = DMatrix::from_fn(s, s, |a, b| pi[a] * (pn[(a, b)] - pi[b]));
    let mut best: f64 = 0.0;
    let mut column_sums = vec![0.0; s];
    for mask in 1u32..(1 << s) {
        column_sums.iter_mut().for_each(|c| *c = 0.0);
        for a in (0..s).filter(|a| mask & (1 << a) != 0) {
            for (b, c) in column_sums.iter_mut().enumerate() {
                *c += signed[(a, b)];
            }
        }
        let pos: f64 = column_sums.iter().filter(|&&c| c > 0.0).sum();
        let neg: f64 = -column_sums.iter().filter(|&&c| c < 0.0).sum::<f64>();
        best = best.max(pos.max(neg));
    }
    Ok(best)
}

pub fn mixing_profile(model: &DiscreteMarkovModel, horizon: usize) -> MixingProfile {
    let pi = model.stationary();
    let s = model.num_states();
    let alpha_exact = s <= EXACT_ALPHA_MAX_STATES;
    let mut profile = MixingProfile {
        horizon,
        psi: Vec::with_capacity(horizon + 1),
        phi: Vec::with_capacity(horizon + 1),
        alpha: Vec::with_capacity(horizon + 1),
        rho: Vec::with_capacity(horizon + 1),
        alpha_exact,
    };
    let mut pn = DMatrix::<f64>::identity(s, s);
    for n in 0..=horizon {
        if n > 0 {
            pn = if model.is_memoryless() { model.transition_power(1) } else { &pn * model.transition() };
        }
        let phi = phi_coefficient(&pn, pi);
        profile.psi.push(psi_coefficient(&pn, pi));
        profile.phi.push(phi);
        profile.rho.push(rho_coefficient(&pn, pi));
        profile.alpha.push(alpha_coefficient_exact(&pn, pi).unwrap_or(0.5 * phi));
    }
    profile
}

/// `psi(n)` for `n = 0..=max_lag` with a geometric majorant for its tail
/// sums, based on `psi(m + n) <= psi(m) psi(n)`.
#[derive(Debug, Clone)]
pub struct PsiTail {
    psi: Vec<f64>,
    block: Option<usize>,
}

impl PsiTail {
    pub fn from_values(psi: Vec<f64>) -> Self {
        let block = (1..psi.len()).find(|&m| psi[m] <= 0.5);
        Self { psi, block }
    }

    pub fn discrete(model: &DiscreteMarkovModel, max_lag: usize) -> Self {
        let pi = model.stationary();
        let s = model.num_states();
        let mut values = Vec::with_capacity(max_lag + 2);
        let mut pn = DMatrix::<f64>::identity(s, s);
        values.push(psi_coefficient(&pn, pi));
        for _ in 1..=max_lag + 1 {
            if model.is_memoryless() {
                values.push(0.0);
                continue;
            }
            pn = &pn * model.transition();
            values.push(psi_coefficient(&pn, pi));
        }
        Self::from_values(values)
    }

    pub fn max_lag(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn psi(&self, n: usize) -> Option<f64> {
        self.psi.get(n).copied()
    }

    /// Upper bound on `sum_{n > after} psi(n)`; `None` when the cached
    /// range cannot certify it.
    pub fn tail_sum(&self, after: usize) -> Option<f64> {
        let last = self.psi.len() - 1;
        if self.psi.get(after + 1).copied() == Some(0.0) {
            return Some(0.0);
        }
        let m0 = self.block?;
        if after + m0 > last {
            return None;
        }
        let head: f64 = (1..=m0).map(|r| self.psi[after + r]).sum();
        Some(head / (1.0 - self.psi[m0]))
    }
}
