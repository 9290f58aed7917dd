//! Exact martingale-difference approximation of the component sums.
//!
//! `U_n = F_i(X(q_1(n)), ..., X(q_i(n)))` is corrected to
//! `W_n = U_n + sum_{m > n} E[U_m | G_n] - sum_{m >= n} E[U_m | G_{n-1}]`
//! with `G_n = sigma(X(1), ..., X(q_i(n)))` and `G_0` trivial (`X(0)` is not
//! observed). Everything here is an exact expectation; nothing is sampled.
//!
//! Two cases are computed in closed form:
//! * `i = 1` on a chain: `E[U_m | G_n] = (P^{m-n} F_1)(X(n))`, so with
//!   `R = sum_{d >= 1} P^d F_1` and `g = F_1 + R`,
//!   `W_n = g(X(n)) - R(X(n-1))` and `W_1 = g(X(1)) - c_0`.
//! * memoryless models, any `i`: past and future decouple and `W_n = U_n`
//!   once `q_i(n)` is separated from the other coordinates.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::covariance::{assemble_d, TruncationPolicy};
use crate::error::{Error, Result};
use crate::markov::{DiscreteMarkovModel, PsiTail};
use crate::observables::Decomposition;
use crate::schedule::Schedule;

pub struct ConditionalEngine<'a> {
    model: &'a DiscreteMarkovModel,
    decomposition: &'a Decomposition,
    schedule: &'a Schedule,
    policy: TruncationPolicy,
}

/// State function with the bound on its truncated tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrector {
    pub values: Vec<f64>,
    pub bound: f64,
    pub terms: u64,
}

fn weighted_abs(v: &[f64], mu: &[f64]) -> f64 {
    v.iter().zip(mu).map(|(a, m)| a.abs() * m).sum()
}

impl<'a> ConditionalEngine<'a> {
    pub fn new(
        model: &'a DiscreteMarkovModel,
        decomposition: &'a Decomposition,
        schedule: &'a Schedule,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        if decomposition.ell() != schedule.ell() {
            return Err(Error::InvalidExperiment("observable arity differs from the schedule".into()));
        }
        let pi = model.stationary();
        if decomposition.mu().iter().zip(pi).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::InvalidObservable("decomposition was not built against the stationary law".into()));
        }
        Ok(Self { model, decomposition, schedule, policy })
    }

    fn times(&self, i: usize, n: u64) -> Result<Vec<u64>> {
        (1..=i).map(|j| self.schedule.evaluate(j, n)).collect()
    }

    /// Folds an `i`-dimensional table along the chain visiting the
    /// coordinates at `times` (any order, ties allowed), returning the
    /// conditional expectation as a function of the earliest coordinate.
    fn fold(&self, table: &[f64], times: &[u64]) -> DVector<f64> {
        let s = self.decomposition.states();
        let dims = times.len();
        let mut order: Vec<usize> = (0..dims).collect();
        order.sort_by_key(|&c| (times[c], c));
        let mut h = table.to_vec();
        let stride = |c: usize| s.pow((dims - 1 - c) as u32);
        for w in (1..dims).rev() {
            let (p, q) = (order[w], order[w - 1]);
            let kernel = self.model.transition_power(times[p] - times[q]);
            let (sp, sq) = (stride(p), stride(q));
            let mut next = vec![0.0; h.len()];
            for (idx, out) in next.iter_mut().enumerate() {
                let xq = (idx / sq) % s;
                let base = idx - ((idx / sp) % s) * sp;
                *out = (0..s).map(|y| kernel[(xq, y)] * h[base + y * sp]).sum();
            }
            h = next;
        }
        let first = stride(order[0]);
        DVector::from_fn(s, |a, _| h[a * first])
    }

    /// `E[F_i(X(q_1(n)), ..., X(q_i(n))) | X(l) = a]` for every state `a`,
    /// `l <= min_j q_j(n)`.
    pub fn conditional_y(&self, i: usize, n: u64, l: u64) -> Result<Vec<f64>> {
        let times = self.times(i, n)?;
        let first = *times.iter().min().unwrap();
        if l > first {
            return Err(Error::InvalidExperiment(format!("conditioning time {l} after the first coordinate {first}")));
        }
        let h = self.fold(self.decomposition.component(i), &times);
        Ok(self.model.ladder().apply(first - l, &h).iter().copied().collect())
    }

    /// Bound `|pi h| + psi(d) ||h||_{L^1(pi)}` on [`Self::conditional_y`],
    /// where `h` is the folded component and `d = min_j q_j(n) - l`.
    pub fn b3_majorant(&self, i: usize, n: u64, l: u64, psi: &PsiTail) -> Result<f64> {
        let times = self.times(i, n)?;
        let first = *times.iter().min().unwrap();
        let h = self.fold(self.decomposition.component(i), &times);
        let pi = self.model.stationary();
        let mean: f64 = h.iter().zip(pi).map(|(a, b)| a * b).sum();
        let d = (first - l) as usize;
        let psi_d = psi.psi(d).ok_or_else(|| Error::InvalidExperiment(format!("psi table stops before lag {d}")))?;
        Ok(mean.abs() + psi_d * weighted_abs(h.as_slice(), pi))
    }

    /// `R = sum_{d >= 1} P^d F_1`, truncated once the psi tail bound
    /// `||F_1||_1 sum_{d > U} psi(d)` drops below the policy tolerance.
    pub fn corrector_r(&self) -> Result<Corrector> {
        let s = self.decomposition.states();
        let f1 = DVector::from_column_slice(self.decomposition.component(1));
        let norm = weighted_abs(f1.as_slice(), self.model.stationary());
        if self.model.is_memoryless() || norm == 0.0 {
            return Ok(Corrector { values: vec![0.0; s], bound: 0.0, terms: 0 });
        }
        let tail = PsiTail::discrete(self.model, self.policy.max_lag as usize * 2 + 2);
        let p = self.model.transition();
        let mut term = f1.clone();
        let mut r = DVector::<f64>::zeros(s);
        for d in 1..=self.policy.max_lag {
            term = p * term;
            r += &term;
            if let Some(sum) = tail.tail_sum(d as usize) {
                let bound = norm * sum;
                if bound <= self.policy.abs_tol {
                    return Ok(Corrector { values: r.iter().copied().collect(), bound, terms: d });
                }
            }
        }
        Err(Error::TruncationFailed {
            bound: tail.tail_sum(self.policy.max_lag as usize).map_or(f64::INFINITY, |t| norm * t),
            tol: self.policy.abs_tol,
            max_lag: self.policy.max_lag,
        })
    }

    fn component_terms(&self, i: usize, big_n: u64, t: f64) -> u64 {
        self.schedule.terms(i, big_n, t)
    }

    /// `k_N(i) = max{n : q_i(n) <= q_{i-1}(N t)}` for a fast component.
    pub fn initial_segment(&self, i: usize, big_n: u64, t: f64) -> Result<u64> {
        let limit = self.schedule.evaluate(i - 1, self.schedule.terms(self.schedule.ell(), big_n, t))?;
        let mut n = 0;
        while self.schedule.evaluate(i, n + 1)? <= limit {
            n += 1;
        }
        Ok(n)
    }

    pub fn martingale_check(&self, i: usize, big_n: u64, t: f64) -> Result<CheckReport> {
        if i == 0 || i > self.schedule.ell() {
            return Err(Error::InvalidExperiment(format!("component {i} outside 1..={}", self.schedule.ell())));
        }
        if big_n == 0 || !(t > 0.0) {
            return Err(Error::InvalidExperiment("need N >= 1 and t > 0".into()));
        }
        let report = if self.model.is_memoryless() {
            self.check_memoryless(i, big_n, t)?
        } else if i == 1 {
            self.check_chain(big_n, t)?
        } else {
            return Err(Error::Unsupported(
                "exact martingale corrections beyond the first component need a memoryless model".into(),
            ));
        };
        Ok(report)
    }

    fn target(&self, i: usize, t: f64) -> Result<f64> {
        let d = assemble_d(self.model, self.decomposition, self.schedule, &self.policy)?;
        Ok(t * d.entry(i, i))
    }

    fn check_chain(&self, big_n: u64, t: f64) -> Result<CheckReport> {
        let s = self.decomposition.states();
        let p = self.model.transition();
        let f1 = self.decomposition.component(1);
        let corrector = self.corrector_r()?;
        let r = &corrector.values;
        let g: Vec<f64> = (0..s).map(|a| f1[a] + r[a]).collect();

        // E[W_n | X(n-1) = a] = (P g - R)(a)
        let pg = p * DVector::from_column_slice(&g);
        let residual = (0..s).map(|a| (pg[a] - r[a]).abs()).fold(0.0, f64::max);

        // c_0 = E[sum_{m >= 1} U_m] from the initial law, truncated like R
        let init = DVector::from_column_slice(self.model.initial()).transpose();
        let law1 = &init * p;
        let c0: f64 = (0..s).map(|b| law1[b] * g[b]).sum();
        let first_mean = ((0..s).map(|b| law1[b] * (g[b] - c0)).sum::<f64>()).abs();

        let m = self.component_terms(1, big_n, t);
        let mut law = init.clone();
        let mut sum = 0.0;
        let mut per_n = Vec::with_capacity(m as usize);
        let mut path = Vec::new();
        let checkpoints = checkpoints(m);
        for n in 1..=m {
            let e_w2 = if n == 1 {
                (0..s).map(|b| law1[b] * (g[b] - c0).powi(2)).sum::<f64>()
            } else {
                (0..s)
                    .map(|a| law[a] * (0..s).map(|b| p[(a, b)] * (g[b] - r[a]).powi(2)).sum::<f64>())
                    .sum()
            };
            sum += e_w2;
            per_n.push(if n == 1 { first_mean } else { residual });
            if checkpoints.contains(&n) {
                path.push(VariancePoint { n, value: sum / big_n as f64 });
            }
            if n > 1 {
                law = &law * p;
            } else {
                law = law1.clone();
            }
        }
        let a_estimate = sum / big_n as f64;
        let target = self.target(1, t)?;
        Ok(CheckReport::finish(1, big_n, t, m, 1, corrector.bound, corrector.terms, per_n, path, a_estimate, target, None))
    }

    fn check_memoryless(&self, i: usize, big_n: u64, t: f64) -> Result<CheckReport> {
        let m = self.component_terms(i, big_n, t);
        // first n from which q_i(n) is strictly later than every other
        // coordinate and than q_i(n - 1); before it the last coordinate is
        // not fresh and the sum is treated as an initial segment
        let mut start = 1;
        for n in 1..=m {
            let times = self.times(i, n)?;
            let last = times[i - 1];
            let fresh = times[..i - 1].iter().all(|&x| x < last) && (n == 1 || self.schedule.evaluate(i, n - 1)? < last);
            if !fresh {
                start = n + 1;
            }
        }
        let squared: Vec<f64> = self.decomposition.component(i).iter().map(|v| v * v).collect();
        let pi = self.model.stationary();
        let mut sum = 0.0;
        let mut per_n = Vec::with_capacity(m as usize);
        let mut path = Vec::new();
        let cps = checkpoints(m);
        let mut tail_sum = 0.0;
        let segment = if i > self.schedule.k() { Some(self.initial_segment(i, big_n, t)?) } else { None };
        for n in start..=m {
            let times = self.times(i, n)?;
            let past = if n == 1 { 0 } else { self.schedule.evaluate(i, n - 1)? };
            per_n.push(self.memoryless_conditional_mean(i, &times, past));
            let e_w2: f64 = self.fold(&squared, &times).iter().zip(pi).map(|(a, b)| a * b).sum();
            sum += e_w2;
            if segment.is_some_and(|kn| n > kn) {
                tail_sum += e_w2;
            }
            if cps.contains(&n) {
                path.push(VariancePoint { n, value: sum / big_n as f64 });
            }
        }
        let a_estimate = sum / big_n as f64;
        let target = self.target(i, t)?;
        let initial = segment.map(|kn| {
            let without = tail_sum / big_n as f64;
            InitialSegment { k_n: kn, a_without_segment: without, difference: a_estimate - without }
        });
        Ok(CheckReport::finish(i, big_n, t, m, start, 0.0, 0, per_n, path, a_estimate, target, initial))
    }

    /// `max |E[U_n | G_{n-1}]|` over past configurations for a memoryless
    /// model: coordinates later than `past` are fresh draws from `pi`, tied
    /// times share one draw.
    fn memoryless_conditional_mean(&self, i: usize, times: &[u64], past: u64) -> f64 {
        let s = self.decomposition.states();
        let pi = self.model.stationary();
        let table = self.decomposition.component(i);
        let mut acc = std::collections::BTreeMap::<Vec<usize>, f64>::new();
        let mut coords = vec![0usize; i];
        for &value in table {
            let consistent = (0..i).all(|a| (0..a).all(|b| times[a] != times[b] || coords[a] == coords[b]));
            if consistent {
                let mut weight = 1.0;
                let mut key = Vec::new();
                for c in 0..i {
                    let first_of_time = (0..c).all(|b| times[b] != times[c]);
                    if times[c] > past {
                        if first_of_time {
                            weight *= pi[coords[c]];
                        }
                    } else {
                        key.push(coords[c]);
                    }
                }
                *acc.entry(key).or_default() += weight * value;
            }
            for c in (0..i).rev() {
                coords[c] += 1;
                if coords[c] < s {
                    break;
                }
                coords[c] = 0;
            }
        }
        acc.values().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn checkpoints(m: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=64).map(|c| (m * c).div_ceil(64)).filter(|&n| n >= 1).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub n: u64,
    /// `(1/N) sum_{m <= n} E[W_m^2]`.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSegment {
    pub k_n: u64,
    pub a_without_segment: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub component: usize,
    pub big_n: u64,
    pub t: f64,
    pub terms: u64,
    /// First summand index covered by the construction.
    pub first_index: u64,
    pub truncation_bound: f64,
    pub corrector_terms: u64,
    /// `max_a |E[W_n | past]|` for `n = first_index..=terms`.
    pub conditional_means: Vec<f64>,
    pub max_conditional_mean: f64,
    pub variance_path: Vec<VariancePoint>,
    /// `(1/N) sum_n E[W_n^2]`.
    pub a_estimate: f64,
    /// `t D_ii`.
    pub target: f64,
    pub gap: f64,
    pub initial_segment: Option<InitialSegment>,
    /// Conditional means within ten times the truncation bound.
    pub pass: bool,
}

impl CheckReport {
    #[allow(clippy::too_many_arguments)]
    fn finish(
        component: usize,
        big_n: u64,
        t: f64,
        terms: u64,
        first_index: u64,
        truncation_bound: f64,
        corrector_terms: u64,
        conditional_means: Vec<f64>,
        variance_path: Vec<VariancePoint>,
        a_estimate: f64,
        target: f64,
        initial_segment: Option<InitialSegment>,
    ) -> Self {
        let max_conditional_mean = conditional_means.iter().copied().fold(0.0, f64::max);
        // rounding floor for exact zero bounds
        let allowed = 10.0 * truncation_bound.max(1e-14);
        Self {
            component,
            big_n,
            t,
            terms,
            first_index,
            truncation_bound,
            corrector_terms,
            conditional_means,
            max_conditional_mean,
            variance_path,
            a_estimate,
            target,
            gap: (a_estimate - target).abs(),
            initial_segment,
            pass: max_conditional_mean <= allowed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::IidModel;
    use crate::observables::{decompose, Observable};

    fn two_state() -> (DiscreteMarkovModel, Decomposition) {
        let m = DiscreteMarkovModel::new(None, &[vec![0.7, 0.3], vec![0.1, 0.9]], vec![vec![0.0], vec![1.0]], None)
            .unwrap();
        let f = Observable::from_fn(1, |x| x[0][0]).unwrap();
        let d = decompose(&f, m.observable(), m.stationary()).unwrap();
        (m, d)
    }

    #[test]
    fn corrector_matches_fundamental_matrix() {
        let (m, d) = two_state();
        let s = Schedule::linear(1).unwrap();
        let e = ConditionalEngine::new(&m, &d, &s, TruncationPolicy::default()).unwrap();
        let r = e.corrector_r().unwrap();
        // sum_{d >= 1} P^d f = (Z - I) f with Z = (I - P + 1 pi)^{-1}, pi f = 0
        let p = m.transition();
        let one_pi = nalgebra::DMatrix::from_fn(2, 2, |_, b| m.stationary()[b]);
        let z = (nalgebra::DMatrix::identity(2, 2) - p + one_pi).try_inverse().unwrap();
        let f = DVector::from_column_slice(d.component(1));
        let expected = (z - nalgebra::DMatrix::identity(2, 2)) * f;
        for a in 0..2 {
            assert!((r.values[a] - expected[a]).abs() <= r.bound + 1e-14);
        }
    }

    #[test]
    fn first_coordinate_conditioning_is_identity() {
        let (m, d) = two_state();
        let s = Schedule::linear(1).unwrap();
        let e = ConditionalEngine::new(&m, &d, &s, TruncationPolicy::default()).unwrap();
        let v = e.conditional_y(1, 5, 5).unwrap();
        assert!((v[0] - d.component(1)[0]).abs() < 1e-15);
        assert!((v[1] - d.component(1)[1]).abs() < 1e-15);
    }

    #[test]
    fn iid_conditionals_vanish() {
        let iid = IidModel::new(vec![vec![-1.0], vec![0.5], vec![2.0]], vec![0.3, 0.5, 0.2]).unwrap().to_chain();
        let d = decompose(&Observable::square_product_minus_one(2).unwrap(), iid.observable(), iid.stationary())
            .unwrap();
        let s = Schedule::linear(2).unwrap();
        let e = ConditionalEngine::new(&iid, &d, &s, TruncationPolicy::default()).unwrap();
        for n in 1..5 {
            assert!(e.conditional_y(2, n, n - 1).unwrap().iter().all(|v| v.abs() < 1e-15));
        }
        assert!(e.corrector_r().unwrap().values.iter().all(|&v| v == 0.0));
        let report = e.martingale_check(2, 64, 1.0).unwrap();
        assert!(report.pass);
        assert!(report.max_conditional_mean < 1e-14);
    }

    #[test]
    fn chain_beyond_first_component_is_unsupported() {
        let m = DiscreteMarkovModel::new(None, &[vec![0.7, 0.3], vec![0.1, 0.9]], vec![vec![0.0], vec![1.0]], None)
            .unwrap();
        let d = decompose(&Observable::product(2).unwrap(), m.observable(), m.stationary()).unwrap();
        let s = Schedule::linear(2).unwrap();
        let e = ConditionalEngine::new(&m, &d, &s, TruncationPolicy::default()).unwrap();
        assert!(matches!(e.martingale_check(2, 16, 1.0), Err(Error::Unsupported(_))));
    }
}
