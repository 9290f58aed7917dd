//! Index schedules `q_1 < ... < q_ell`: a linear head `q_i(n) = i n` for
//! `i <= k` and faster-growing tail functions for `i > k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible schedule value.
pub const VALUE_CAP: u64 = 1 << 62;

/// Tail function `q_i`, `i > k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFunction {
    /// Integer coefficients, lowest degree first.
    Polynomial(Vec<i64>),
    /// Explicit values `q_i(0), q_i(1), ...`.
    Table(Vec<u64>),
}

impl TailFunction {
    fn eval(&self, n: u64) -> Option<i128> {
        match self {
            Self::Polynomial(coeffs) => {
                let x = n as i128;
                let mut acc: i128 = 0;
                for &c in coeffs.iter().rev() {
                    acc = acc.checked_mul(x)?.checked_add(c as i128)?;
                    // Horner intermediates stay below 2^126 while the
                    // final value is checked against the cap.
                    if acc.unsigned_abs() > (1u128 << 100) {
                        return None;
                    }
                }
                Some(acc)
            }
            Self::Table(values) => values.get(n as usize).map(|&v| v as i128),
        }
    }

    fn eval_real(&self, t: f64) -> Option<f64> {
        match self {
            Self::Polynomial(coeffs) => Some(coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c as f64)),
            Self::Table(_) => None,
        }
    }

    fn derivative_real(&self, t: f64) -> Option<f64> {
        match self {
            Self::Polynomial(coeffs) => Some(
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (d, &c)| acc * t + d as f64 * c as f64),
            ),
            Self::Table(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    k: usize,
    tail: Vec<TailFunction>,
    /// Continuous-time rates replacing `1, ..., k` in the linear head.
    alpha: Option<Vec<f64>>,
}

impl Schedule {
    pub fn new(k: usize, tail: Vec<TailFunction>, alpha: Option<Vec<f64>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSchedule("k must be at least 1".into()));
        }
        for (offset, f) in tail.iter().enumerate() {
            match f {
                TailFunction::Polynomial(c) if c.is_empty() => {
                    return Err(Error::InvalidSchedule(format!("q_{} has no coefficients", k + 1 + offset)))
                }
                TailFunction::Table(v) if v.is_empty() => {
                    return Err(Error::InvalidSchedule(format!("q_{} table is empty", k + 1 + offset)))
                }
                _ => {}
            }
        }
        if let Some(a) = &alpha {
            if a.len() != k {
                return Err(Error::InvalidSchedule(format!("alpha needs {k} entries, got {}", a.len())));
            }
            if a.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || a.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSchedule("alpha must be positive and strictly increasing".into()));
            }
        }
        Ok(Self { k, tail, alpha })
    }

    /// Purely linear schedule `q_i(n) = i n`, `i = 1..=k`.
    pub fn linear(k: usize) -> Result<Self> {
        Self::new(k, Vec::new(), None)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> usize {
        self.k + self.tail.len()
    }

    pub fn tail(&self) -> &[TailFunction] {
        &self.tail
    }

    pub fn alpha(&self) -> Option<&[f64]> {
        self.alpha.as_deref()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.ell() {
            return Err(Error::InvalidSchedule(format!("component {i} outside 1..={}", self.ell())));
        }
        Ok(())
    }

    /// Exact `q_i(n)` in discrete time.
    pub fn evaluate(&self, i: usize, n: u64) -> Result<u64> {
        self.check_index(i)?;
        let value: i128 = if i <= self.k {
            (i as i128) * (n as i128)
        } else {
            self.tail[i - self.k - 1].eval(n).ok_or(match &self.tail[i - self.k - 1] {
                TailFunction::Table(v) => Error::InvalidSchedule(format!(
                    "q_{i} table has {} entries, n = {n} requested",
                    v.len()
                )),
                TailFunction::Polynomial(_) => Error::Overflow { i, n },
            })?
        };
        if value < 0 {
            return Err(Error::InvalidSchedule(format!("q_{i}({n}) = {value} is negative")));
        }
        if value as u128 > VALUE_CAP as u128 {
            return Err(Error::Overflow { i, n });
        }
        Ok(value as u64)
    }

    /// Realignment factor of component `i`: `alpha_i` (default `i`) for the
    /// linear head, 1 for the tail.
    pub fn scale(&self, i: usize) -> f64 {
        if i <= self.k {
            self.alpha.as_ref().map_or(i as f64, |a| a[i - 1])
        } else {
            1.0
        }
    }

    /// `q_i(t)` for real `t` (continuous mode).
    pub fn evaluate_real(&self, i: usize, t: f64) -> Result<f64> {
        self.check_index(i)?;
        if i <= self.k {
            return Ok(self.scale(i) * t);
        }
        self.tail[i - self.k - 1]
            .eval_real(t)
            .ok_or_else(|| Error::Unsupported("table schedules have no continuous-time extension".into()))
    }

    /// Checks that every tail function is a polynomial with nonnegative
    /// coefficients, hence nondecreasing on `[0, inf)` and invertible by
    /// a monotone root search.
    pub fn validate_continuous(&self) -> Result<()> {
        for (offset, f) in self.tail.iter().enumerate() {
            match f {
                TailFunction::Polynomial(c) if c.iter().all(|&x| x >= 0) && c.iter().skip(1).any(|&x| x > 0) => {}
                _ => {
                    return Err(Error::InvalidSchedule(format!(
                        "continuous mode needs q_{} to be a polynomial with nonnegative coefficients",
                        self.k + 1 + offset
                    )))
                }
            }
        }
        Ok(())
    }

    /// Smallest `s >= lo` with `q_i(s) = y`, assuming `q_i` nondecreasing
    /// and `q_i(lo) <= y`. Newton steps from `lo`, safeguarded by bisection.
    pub fn preimage_real(&self, i: usize, y: f64, lo: f64) -> f64 {
        if i <= self.k {
            return y / self.scale(i);
        }
        let f = &self.tail[i - self.k - 1];
        let q = |s: f64| f.eval_real(s).unwrap_or(f64::NAN);
        let mut hi = lo.max(1.0);
        while q(hi) < y {
            hi *= 2.0;
        }
        let mut lo = lo;
        let mut s = lo;
        for _ in 0..200 {
            let value = q(s) - y;
            if value == 0.0 {
                return s;
            }
            if value < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let slope = f.derivative_real(s).unwrap_or(0.0);
            let mut next = if slope > 0.0 { s - value / slope } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-15 * s.abs().max(1.0) || hi - lo <= 1e-15 * hi.abs().max(1.0) {
                return next;
            }
            s = next;
        }
        s
    }

    /// Number of summands of component `i` up to time `t`: `floor(N t / i)`
    /// for the linear head and `floor(N t)` for the tail.
    pub fn terms(&self, i: usize, big_n: u64, t: f64) -> u64 {
        let x = big_n as f64 * t / self.scale(i);
        (x + 1e-9).floor().max(0.0) as u64
    }

    /// Upper integration limit `S_i(N t)` in continuous time.
    pub fn integration_limit(&self, i: usize, big_n: u64, t: f64) -> f64 {
        big_n as f64 * t / self.scale(i)
    }

    /// Runs the finite-horizon growth checks. Failures are reported, never
    /// thrown.
    pub fn validate_growth(&self, horizon: u64, epsilons: &[f64]) -> ValidationReport {
        let mut checks = Vec::new();
        let half = horizon / 2;
        if horizon < 100 {
            checks.push(CheckOutcome::fail("horizon", None, None, None, format!("horizon {horizon} < 100")));
            return ValidationReport::from_checks(horizon, checks);
        }
        let table: Vec<Vec<Result<u64>>> = (1..=self.ell())
            .map(|i| (0..=horizon + 1).map(|n| self.evaluate(i, n)).collect())
            .collect();

        for i in 1..=self.ell() {
            let values = &table[i - 1];
            if let Some((n, e)) = values.iter().enumerate().find_map(|(n, v)| v.as_ref().err().map(|e| (n, e))) {
                checks.push(CheckOutcome::fail("monotone", Some(i), None, Some(n as u64), e.to_string()));
                continue;
            }
            let values: Vec<u64> = values.iter().map(|v| *v.as_ref().unwrap()).collect();
            // onset: first n with q_i strictly increasing on [n, horizon]
            let last_bad = (0..horizon as usize).rev().find(|&n| values[n + 1] <= values[n]);
            let onset = last_bad.map_or(0, |n| n as u64 + 1);
            let pass = onset <= half;
            checks.push(CheckOutcome {
                name: "monotone".into(),
                component: Some(i),
                epsilon: None,
                pass,
                onset: Some(onset),
                witness: last_bad.map(|n| n as u64),
                detail: format!("q_{i} strictly increasing from n = {onset}"),
            });

            if i > self.k {
                let diffs: Vec<u64> = (0..horizon as usize).map(|n| values[n + 1].saturating_sub(values[n])).collect();
                let last_drop = (1..diffs.len()).rev().find(|&n| diffs[n] < diffs[n - 1]);
                let diff_onset = last_drop.map_or(0, |n| n as u64);
                let last = *diffs.last().unwrap();
                let (argmax, earlier_max) = diffs[..=half as usize]
                    .iter()
                    .enumerate()
                    .fold((0, 0), |best, (n, &d)| if d > best.1 { (n, d) } else { best });
                let pass = diff_onset <= half && last > earlier_max;
                let witness = if diff_onset > half { last_drop.map(|n| n as u64) } else { Some(argmax as u64) };
                checks.push(CheckOutcome {
                    name: "growing_differences".into(),
                    component: Some(i),
                    epsilon: None,
                    pass,
                    onset: Some(diff_onset),
                    witness: if pass { None } else { witness },
                    detail: format!(
                        "q_{i}(n+1)-q_{i}(n) nondecreasing from n = {diff_onset}; final difference {last} vs earlier maximum {earlier_max}"
                    ),
                });
            }
        }

        if checks.iter().all(|c| c.pass) {
            let ordered = |n: usize| (1..self.ell()).all(|i| *table[i - 1][n].as_ref().unwrap() < *table[i][n].as_ref().unwrap());
            let last_bad = (0..=horizon as usize).rev().find(|&n| !ordered(n));
            let onset = last_bad.map_or(0, |n| n as u64 + 1);
            checks.push(CheckOutcome {
                name: "ordering".into(),
                component: None,
                epsilon: None,
                pass: onset <= half,
                onset: Some(onset),
                witness: last_bad.map(|n| n as u64),
                detail: format!("q_1(n) < ... < q_ell(n) from n = {onset}"),
            });

            for &eps in epsilons {
                for i in self.k..self.ell() {
                    let mut n_eps = None;
                    let mut witness = None;
                    for n in (1..=horizon).rev() {
                        let m = (eps * n as f64).ceil() as u64;
                        let ok = match (self.evaluate(i + 1, m), self.evaluate(i, n)) {
                            (Ok(a), Ok(b)) => a > b,
                            _ => false,
                        };
                        if !ok {
                            witness = Some(n);
                            break;
                        }
                        n_eps = Some(n);
                    }
                    let pass = !(eps > 0.0) || n_eps.is_some_and(|n| n <= half);
                    checks.push(CheckOutcome {
                        name: "separation".into(),
                        component: Some(i),
                        epsilon: Some(eps),
                        pass,
                        onset: n_eps,
                        witness,
                        detail: format!("q_{}(ceil(eps n)) > q_{i}(n) for n in [onset, {horizon}]", i + 1),
                    });
                }
            }
        }
        ValidationReport::from_checks(horizon, checks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub component: Option<usize>,
    pub epsilon: Option<f64>,
    pub pass: bool,
    pub onset: Option<u64>,
    /// Last `n` violating the property, when there is one.
    pub witness: Option<u64>,
    pub detail: String,
}

impl CheckOutcome {
    fn fail(name: &str, component: Option<usize>, epsilon: Option<f64>, witness: Option<u64>, detail: String) -> Self {
        Self { name: name.into(), component, epsilon, pass: false, onset: None, witness, detail }
    }
}

/// Outcome of the finite-horizon growth checks. Every onset must lie in the
/// first half of the horizon; these are necessary, not sufficient,
/// surrogates of the asymptotic growth conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub horizon: u64,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    fn from_checks(horizon: u64, checks: Vec<CheckOutcome>) -> Self {
        Self { pass: checks.iter().all(|c| c.pass), horizon, checks }
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.pass)
    }
}
