//! Seeded Monte Carlo ensembles of the realigned component sums
//! `xi_{i,N}(t)` and of the total `xi_N(t)`, plus the statistical checks
//! run on them.
//!
//! Discrete time: `xi_{i,N}(t) = N^{-1/2} sum_{n <= M_i(N t)} F_i(X(q_1(n)), ..., X(q_i(n)))`
//! with `M_i(u) = floor(u / i)` for `i <= k` and `floor(u)` otherwise.
//! Continuous time replaces the sum by an integral up to `S_i(N t)`,
//! computed exactly over the piecewise-constant integrand.

mod checks;

pub use checks::*;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::TimeMode;
use crate::error::{Error, Result};
use crate::markov::{ContinuousMarkovModel, DiscreteMarkovModel, JumpSampler, ProcessModel};
use crate::observables::Decomposition;
use crate::report::Fingerprints;
use crate::rng::{derive_seed, replica_rng};
use crate::schedule::Schedule;
use crate::stats;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "NONCON_THREADS";

/// Tests need at least this many replicas.
pub const MIN_REPLICAS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartLaw {
    /// `X(0)` drawn from the stationary law.
    #[default]
    Stationary,
    /// `X(0)` drawn from the model's initial law.
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestToggles {
    pub covariance: bool,
    pub gaussianity: bool,
    pub increments: bool,
    pub tightness: bool,
    pub ct_vanishing: bool,
}

impl Default for TestToggles {
    fn default() -> Self {
        Self { covariance: true, gaussianity: true, increments: true, tightness: true, ct_vanishing: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub mode: TimeMode,
    pub n_values: Vec<u64>,
    /// Sorted, in `(0, T]`.
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub start: StartLaw,
    /// Components to simulate; `None` means all of them plus the total.
    pub components: Option<Vec<usize>>,
    pub tests: TestToggles,
}

impl ExperimentSpec {
    pub fn new(mode: TimeMode, n_values: Vec<u64>, t_grid: Vec<f64>, replicas: usize, seed: u64) -> Self {
        Self { mode, n_values, t_grid, replicas, seed, start: StartLaw::Stationary, components: None, tests: TestToggles::default() }
    }

    pub fn horizon(&self) -> f64 {
        *self.t_grid.last().unwrap_or(&0.0)
    }

    pub fn validate(&self, ell: usize) -> Result<()> {
        if self.replicas < MIN_REPLICAS {
            return Err(Error::InvalidExperiment(format!("need at least {MIN_REPLICAS} replicas, got {}", self.replicas)));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::InvalidExperiment("N values must be positive".into()));
        }
        if self.t_grid.is_empty()
            || self.t_grid[0] <= 0.0
            || self.t_grid.windows(2).any(|w| w[0] >= w[1])
            || self.t_grid.iter().any(|t| !t.is_finite())
        {
            return Err(Error::InvalidExperiment("t grid must be strictly increasing in (0, T]".into()));
        }
        if let Some(c) = &self.components {
            if c.is_empty() || c.iter().any(|&i| i == 0 || i > ell) || c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidExperiment(format!("components must be increasing indices in 1..={ell}")));
            }
        }
        Ok(())
    }

    fn simulated(&self, ell: usize) -> (Vec<usize>, bool) {
        match &self.components {
            Some(c) => (c.clone(), false),
            None => ((1..=ell).collect(), true),
        }
    }
}

/// Which sum a statistic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Component(usize),
    Total,
}

impl std::fmt::Display for Series {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Series::Component(i) => write!(f, "xi_{i}"),
            Series::Total => write!(f, "xi"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub series: Series,
    /// Indexed like the t grid.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Raw moments `E xi^p`, `p = 1..=4`, per grid point.
    pub raw_moments: Vec<[f64; 4]>,
    pub skewness: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub a: Series,
    pub b: Series,
    pub t_index: usize,
    pub value: f64,
    /// Delta-method standard error `sd((x - mean x)(y - mean y)) / sqrt(M)`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub series: Vec<SeriesSummary>,
    pub covariances: Vec<CovarianceEstimate>,
}

/// Per-replica values on the t grid and their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub mode: TimeMode,
    pub big_n: u64,
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub k: usize,
    pub ell: usize,
    pub components: Vec<usize>,
    pub has_total: bool,
    /// Largest per-path `|xi_N(t) - sum_i xi_{i,N}(scale_i t)|`.
    pub realignment_error: f64,
    pub fingerprints: Option<Fingerprints>,
    /// `values[r][s][a]` flattened; `s` runs over `components` then the total.
    #[serde(skip)]
    values: Vec<f64>,
    pub summary: EnsembleSummary,
}

impl Ensemble {
    fn width(&self) -> usize {
        self.components.len() + usize::from(self.has_total)
    }

    fn slot(&self, series: Series) -> Option<usize> {
        match series {
            Series::Component(i) => self.components.iter().position(|&c| c == i),
            Series::Total => self.has_total.then_some(self.components.len()),
        }
    }

    pub fn series_list(&self) -> Vec<Series> {
        let mut out: Vec<Series> = self.components.iter().map(|&i| Series::Component(i)).collect();
        if self.has_total {
            out.push(Series::Total);
        }
        out
    }

    /// Replica values of `series` at grid index `a`.
    pub fn values(&self, series: Series, a: usize) -> Result<Vec<f64>> {
        let slot = self
            .slot(series)
            .ok_or_else(|| Error::InvalidExperiment(format!("{series} was not simulated")))?;
        let (w, nt) = (self.width(), self.t_grid.len());
        Ok((0..self.replicas).map(|r| self.values[(r * w + slot) * nt + a]).collect())
    }

    pub fn t_index(&self, t: f64) -> Result<usize> {
        self.t_grid
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::InvalidExperiment(format!("t = {t} is not on the grid")))
    }

    /// Recomputes the summary from the stored replica values.
    pub fn summarize(&self) -> EnsembleSummary {
        let list = self.series_list();
        let series = list
            .iter()
            .map(|&s| {
                let per_t: Vec<Vec<f64>> = (0..self.t_grid.len()).map(|a| self.values(s, a).unwrap()).collect();
                let raw = |x: &[f64], p: i32| x.iter().map(|v| v.powi(p)).sum::<f64>() / x.len() as f64;
                let degenerate = |x: &[f64]| stats::central_moment(x, 2) <= 0.0;
                SeriesSummary {
                    series: s,
                    mean: per_t.iter().map(|x| stats::mean(x)).collect(),
                    variance: per_t.iter().map(|x| stats::variance(x)).collect(),
                    raw_moments: per_t.iter().map(|x| [raw(x, 1), raw(x, 2), raw(x, 3), raw(x, 4)]).collect(),
                    skewness: per_t.iter().map(|x| if degenerate(x) { 0.0 } else { stats::skewness(x) }).collect(),
                    excess_kurtosis: per_t
                        .iter()
                        .map(|x| if degenerate(x) { 0.0 } else { stats::excess_kurtosis(x) })
                        .collect(),
                }
            })
            .collect();
        let mut covariances = Vec::new();
        for a in 0..self.t_grid.len() {
            for (p, &sa) in list.iter().enumerate() {
                for &sb in &list[..=p] {
                    let (x, y) = (self.values(sa, a).unwrap(), self.values(sb, a).unwrap());
                    let (mx, my) = (stats::mean(&x), stats::mean(&y));
                    let products: Vec<f64> = x.iter().zip(&y).map(|(u, v)| (u - mx) * (v - my)).collect();
                    covariances.push(CovarianceEstimate {
                        a: sa,
                        b: sb,
                        t_index: a,
                        value: stats::covariance(&x, &y),
                        std_error: stats::mean_se(&products),
                    });
                }
            }
        }
        EnsembleSummary { series, covariances }
    }

    /// Writes one row per replica and grid point:
    /// `replica, t, xi_1, ..., xi_ell, xi_total` (empty cells for sums not
    /// simulated).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header = vec!["replica".to_string(), "t".to_string()];
        header.extend((1..=self.ell).map(|i| format!("xi_{i}")));
        header.push("xi_total".into());
        w.write_record(&header).map_err(csv_error)?;
        let columns: Vec<Option<Vec<Vec<f64>>>> = (1..=self.ell)
            .map(Series::Component)
            .chain(std::iter::once(Series::Total))
            .map(|s| {
                self.slot(s).map(|_| (0..self.t_grid.len()).map(|a| self.values(s, a).unwrap()).collect())
            })
            .collect();
        for r in 0..self.replicas {
            for (a, t) in self.t_grid.iter().enumerate() {
                let mut row = vec![r.to_string(), format!("{t}")];
                row.extend(columns.iter().map(|c| c.as_ref().map_or(String::new(), |v| format!("{:e}", v[a][r]))));
                w.write_record(&row).map_err(csv_error)?;
            }
        }
        w.flush()?;
        w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Runs `f` on a pool sized by [`THREADS_ENV`] when it is set.
pub fn with_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Checkpoint: after summand `n` (discrete) or at integration time `s`
/// (continuous), the running sum of `slot` is recorded at grid index `a`.
#[derive(Debug, Clone, Copy)]
struct Checkpoint<P> {
    at: P,
    slot: usize,
    a: usize,
}

/// What one replica produces.
struct ReplicaOutput {
    values: Vec<f64>,
    realignment_error: f64,
}

fn table_refs(decomposition: &Decomposition, upto: usize) -> Vec<&[f64]> {
    (1..=upto).map(|i| decomposition.component(i)).collect()
}

/// Simulates one ensemble at a single `N`.
pub fn run_ensemble(
    model: &ProcessModel,
    decomposition: &Decomposition,
    schedule: &Schedule,
    spec: &ExperimentSpec,
    big_n: u64,
) -> Result<Ensemble> {
    spec.validate(schedule.ell())?;
    if decomposition.ell() != schedule.ell() {
        return Err(Error::InvalidExperiment("observable arity differs from the schedule".into()));
    }
    if decomposition.mu().iter().zip(model.stationary()).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidObservable("decomposition was not built against the stationary law".into()));
    }
    let (components, has_total) = spec.simulated(schedule.ell());
    let seed = derive_seed(spec.seed, big_n);
    let (values, realignment_error) = match (spec.mode, model) {
        (TimeMode::Discrete, ProcessModel::Discrete(m)) => {
            simulate_discrete(m, decomposition, schedule, spec, big_n, &components, has_total, seed)?
        }
        (TimeMode::Continuous, ProcessModel::Continuous(m)) => {
            simulate_continuous(m, decomposition, schedule, spec, big_n, &components, has_total, seed)?
        }
        _ => return Err(Error::InvalidExperiment("time mode does not match the model kind".into())),
    };
    let mut ensemble = Ensemble {
        mode: spec.mode,
        big_n,
        t_grid: spec.t_grid.clone(),
        replicas: spec.replicas,
        seed: spec.seed,
        k: schedule.k(),
        ell: schedule.ell(),
        components,
        has_total,
        realignment_error,
        fingerprints: Some(Fingerprints::of(model, schedule, decomposition)),
        values,
        summary: EnsembleSummary { series: Vec::new(), covariances: Vec::new() },
    };
    ensemble.summary = ensemble.summarize();
    Ok(ensemble)
}

/// One ensemble per `N` in the spec.
pub fn run_ensembles(
    model: &ProcessModel,
    decomposition: &Decomposition,
    schedule: &Schedule,
    spec: &ExperimentSpec,
) -> Result<Vec<Ensemble>> {
    spec.n_values.iter().map(|&n| run_ensemble(model, decomposition, schedule, spec, n)).collect()
}

fn collect_replicas(
    replicas: usize,
    run: impl Fn(usize) -> Result<ReplicaOutput> + Sync,
) -> Result<(Vec<f64>, f64)> {
    let outputs: Vec<Result<ReplicaOutput>> = with_thread_pool(|| (0..replicas).into_par_iter().map(&run).collect());
    let mut values = Vec::new();
    let mut worst: f64 = 0.0;
    for out in outputs {
        let out = out?;
        values.extend(out.values);
        worst = worst.max(out.realignment_error);
    }
    Ok((values, worst))
}

#[allow(clippy::too_many_arguments)]
fn simulate_discrete(
    model: &DiscreteMarkovModel,
    decomposition: &Decomposition,
    schedule: &Schedule,
    spec: &ExperimentSpec,
    big_n: u64,
    components: &[usize],
    has_total: bool,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let s = decomposition.states();
    let nt = spec.t_grid.len();
    let width = components.len() + usize::from(has_total);
    let top = if has_total { schedule.ell() } else { *components.last().unwrap() };
    let total_index = schedule.ell().max(schedule.k() + 1);
    let mut n_max = components.iter().map(|&i| schedule.terms(i, big_n, spec.horizon())).max().unwrap_or(0);
    if has_total {
        n_max = n_max.max(schedule.terms(total_index, big_n, spec.horizon()));
    }

    // index plan: the union of all q_j(n), j <= top, n <= n_max
    let mut times = Vec::with_capacity(top * n_max as usize);
    for j in 1..=top {
        for n in 1..=n_max {
            times.push(schedule.evaluate(j, n)?);
        }
    }
    times.sort_unstable();
    times.dedup();
    if let Some(&last) = times.last() {
        if last > crate::markov::DEFAULT_HORIZON_CAP {
            return Err(Error::HorizonOverflow { index: last, cap: crate::markov::DEFAULT_HORIZON_CAP });
        }
    }
    let mut position = vec![0u32; top * n_max as usize];
    for j in 1..=top {
        for n in 1..=n_max {
            let q = schedule.evaluate(j, n)?;
            position[(j - 1) * n_max as usize + (n - 1) as usize] = times.partition_point(|&x| x < q) as u32;
        }
    }

    let mut checkpoints: Vec<Checkpoint<u64>> = Vec::new();
    for (slot, &i) in components.iter().enumerate() {
        for (a, &t) in spec.t_grid.iter().enumerate() {
            checkpoints.push(Checkpoint { at: schedule.terms(i, big_n, t), slot, a });
        }
    }
    // realignment checkpoints use slot `width` (total) and compare at floor(N t)
    if has_total {
        for (a, &t) in spec.t_grid.iter().enumerate() {
            checkpoints.push(Checkpoint { at: schedule.terms(total_index, big_n, t), slot: components.len(), a });
        }
    }
    checkpoints.sort_by_key(|c| (c.at, c.slot, c.a));

    let sampler_model = match spec.start {
        StartLaw::Stationary => model.with_initial(model.stationary().to_vec())?,
        StartLaw::Initial => model.clone(),
    };
    let sampler = JumpSampler::new(&sampler_model);
    let tables = table_refs(decomposition, top);
    let full = decomposition.full();
    let fbar = decomposition.fbar();
    let scale = 1.0 / (big_n as f64).sqrt();
    let comp_index: Vec<usize> = components.iter().map(|&i| i - 1).collect();

    collect_replicas(spec.replicas, |r| {
        let mut rng = replica_rng(seed, r as u64);
        let states = sampler.sample_states(&times, &mut rng);
        let mut partial = vec![0.0; top];
        let mut total = 0.0;
        let mut values = vec![0.0; width * nt];
        let mut worst: f64 = 0.0;
        let mut next = 0;
        let mut record = |n: u64, partial: &[f64], total: f64, values: &mut [f64], worst: &mut f64| {
            while next < checkpoints.len() && checkpoints[next].at == n {
                let c = checkpoints[next];
                if c.slot < components.len() {
                    values[c.slot * nt + c.a] = partial[comp_index[c.slot]] * scale;
                } else {
                    values[c.slot * nt + c.a] = total * scale;
                    let sum: f64 = partial.iter().sum();
                    *worst = worst.max((total - sum).abs() * scale);
                }
                next += 1;
            }
        };
        record(0, &partial, total, &mut values, &mut worst);
        for n in 1..=n_max {
            let mut idx = 0usize;
            for j in 0..top {
                let x = states[position[j * n_max as usize + (n - 1) as usize] as usize];
                idx = idx * s + x;
                partial[j] += tables[j][idx];
            }
            if has_total {
                total += full[idx] - fbar;
            }
            record(n, &partial, total, &mut values, &mut worst);
        }
        Ok(ReplicaOutput { values, realignment_error: worst })
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_continuous(
    model: &ContinuousMarkovModel,
    decomposition: &Decomposition,
    schedule: &Schedule,
    spec: &ExperimentSpec,
    big_n: u64,
    components: &[usize],
    has_total: bool,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    schedule.validate_continuous()?;
    let s = decomposition.states();
    let nt = spec.t_grid.len();
    let width = components.len() + usize::from(has_total);
    let top = if has_total { schedule.ell() } else { *components.last().unwrap() };
    let big_t = spec.horizon();
    let n_f = big_n as f64;

    // integration limit per component, and per coordinate the furthest s it
    // is needed at
    let limit = |i: usize| -> f64 {
        let own = schedule.integration_limit(i, big_n, big_t);
        if has_total {
            own.max(n_f * big_t)
        } else {
            own
        }
    };
    let mut coordinate_limit = vec![0.0f64; top];
    for i in 1..=top {
        if has_total || components.contains(&i) {
            for c in coordinate_limit.iter_mut().take(i) {
                *c = c.max(limit(i));
            }
        }
    }
    let mut horizon: f64 = 0.0;
    for j in 1..=top {
        horizon = horizon.max(schedule.evaluate_real(j, coordinate_limit[j - 1])?);
    }
    if horizon > crate::markov::DEFAULT_HORIZON_CAP as f64 {
        return Err(Error::HorizonOverflow { index: horizon as u64, cap: crate::markov::DEFAULT_HORIZON_CAP });
    }

    let mut checkpoints: Vec<Checkpoint<f64>> = Vec::new();
    for (slot, &i) in components.iter().enumerate() {
        for (a, &t) in spec.t_grid.iter().enumerate() {
            checkpoints.push(Checkpoint { at: schedule.integration_limit(i, big_n, t), slot, a });
        }
    }
    if has_total {
        for (a, &t) in spec.t_grid.iter().enumerate() {
            checkpoints.push(Checkpoint { at: n_f * t, slot: components.len(), a });
        }
    }
    checkpoints.sort_by(|x, y| x.at.total_cmp(&y.at).then(x.slot.cmp(&y.slot)).then(x.a.cmp(&y.a)));
    let s_end = checkpoints.last().map_or(0.0, |c| c.at);

    let initial = match spec.start {
        StartLaw::Stationary => model.stationary().to_vec(),
        StartLaw::Initial => model.initial().to_vec(),
    };
    let initial_cdf = crate::markov::cumulative(&initial);
    let tables = table_refs(decomposition, top);
    let full = decomposition.full();
    let fbar = decomposition.fbar();
    let scale = 1.0 / n_f.sqrt();
    let comp_index: Vec<usize> = components.iter().map(|&i| i - 1).collect();
    let start_offsets: Vec<f64> = (1..=top).map(|j| schedule.evaluate_real(j, 0.0)).collect::<Result<_>>()?;

    collect_replicas(spec.replicas, |r| {
        let mut rng = replica_rng(seed, r as u64);
        let start = crate::markov::sample_from(&initial_cdf, &mut rng);
        let path = model.simulate_from(start, horizon, &mut rng);
        let jumps = &path.times;

        // per coordinate: current state and index of its next jump
        let mut state: Vec<usize> = start_offsets.iter().map(|&q0| path.state_at(q0)).collect();
        let mut next_jump: Vec<usize> = start_offsets.iter().map(|&q0| jumps.partition_point(|&x| x <= q0)).collect();
        let mut next_s: Vec<f64> = vec![f64::INFINITY; top];
        let preimage = |j: usize, k: usize, lo: f64| -> f64 {
            if k < jumps.len() {
                schedule.preimage_real(j + 1, jumps[k], lo)
            } else {
                f64::INFINITY
            }
        };
        for j in 0..top {
            next_s[j] = preimage(j, next_jump[j], 0.0);
        }

        let mut partial = vec![0.0; top];
        let mut total = 0.0;
        let mut values = vec![0.0; width * nt];
        let mut worst: f64 = 0.0;
        let mut now = 0.0;
        let mut cp = 0;
        while cp < checkpoints.len() {
            let (j_min, s_jump) = next_s
                .iter()
                .enumerate()
                .fold((usize::MAX, f64::INFINITY), |best, (j, &v)| if v < best.1 { (j, v) } else { best });
            let until = s_jump.min(checkpoints[cp].at).min(s_end);
            let dt = until - now;
            if dt > 0.0 {
                let mut idx = 0usize;
                for j in 0..top {
                    idx = idx * s + state[j];
                    partial[j] += dt * tables[j][idx];
                }
                if has_total {
                    total += dt * (full[idx] - fbar);
                }
                now = until;
            }
            while cp < checkpoints.len() && checkpoints[cp].at <= now {
                let c = checkpoints[cp];
                if c.slot < components.len() {
                    values[c.slot * nt + c.a] = partial[comp_index[c.slot]] * scale;
                } else {
                    values[c.slot * nt + c.a] = total * scale;
                    let sum: f64 = partial.iter().sum();
                    worst = worst.max((total - sum).abs() * scale);
                }
                cp += 1;
            }
            if j_min != usize::MAX && s_jump <= now {
                state[j_min] = path.states[next_jump[j_min]];
                next_jump[j_min] += 1;
                next_s[j_min] = preimage(j_min, next_jump[j_min], now);
            }
        }
        Ok(ReplicaOutput { values, realignment_error: worst })
    })
}

/// Writes a summary JSON per ensemble plus a CSV of replica values.
pub fn write_ensemble(ensemble: &Ensemble, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join(format!("{stem}.json"));
    crate::report::write_json(&json, ensemble)?;
    let csv = dir.join(format!("{stem}.csv"));
    ensemble.write_csv(&csv)?;
    Ok(vec![json, csv])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{assemble_d, TruncationPolicy};
    use crate::observables::{decompose, Observable};

    fn two_state() -> (ProcessModel, Decomposition) {
        let m = DiscreteMarkovModel::new(None, &[vec![0.9, 0.1], vec![0.3, 0.7]], vec![vec![1.0], vec![0.0]], None).unwrap();
        let d = decompose(&Observable::product(1).unwrap(), m.observable(), m.stationary()).unwrap();
        (ProcessModel::Discrete(m), d)
    }

    fn chain3(ell: usize) -> (ProcessModel, Decomposition) {
        let m = DiscreteMarkovModel::new(
            None,
            &[vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]],
            vec![vec![-1.0], vec![0.5], vec![2.0]],
            None,
        )
        .unwrap();
        let d = decompose(&Observable::product(ell).unwrap(), m.observable(), m.stationary()).unwrap();
        (ProcessModel::Discrete(m), d)
    }

    #[test]
    fn replicas_below_minimum_rejected() {
        let (m, d) = two_state();
        let spec = ExperimentSpec::new(TimeMode::Discrete, vec![16], vec![1.0], 99, 1);
        assert!(matches!(run_ensemble(&m, &d, &Schedule::linear(1).unwrap(), &spec, 16), Err(Error::InvalidExperiment(_))));
    }

    #[test]
    fn zero_observable_gives_zero_paths() {
        let m = DiscreteMarkovModel::new(None, &[vec![0.5, 0.5], vec![0.5, 0.5]], vec![vec![1.0], vec![1.0]], None).unwrap();
        let d = decompose(&Observable::product(2).unwrap(), m.observable(), m.stationary()).unwrap();
        let spec = ExperimentSpec::new(TimeMode::Discrete, vec![32], vec![0.5, 1.0], 100, 3);
        let e = run_ensemble(&ProcessModel::Discrete(m), &d, &Schedule::linear(2).unwrap(), &spec, 32).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn realignment_and_determinism() {
        let (m, d) = chain3(2);
        let mut spec = ExperimentSpec::new(TimeMode::Discrete, vec![64], vec![0.25, 0.5, 1.0], 120, 11);
        spec.start = StartLaw::Initial;
        let s = Schedule::linear(2).unwrap();
        let a = run_ensemble(&m, &d, &s, &spec, 64).unwrap();
        let b = run_ensemble(&m, &d, &s, &spec, 64).unwrap();
        assert!(a.realignment_error < 1e-10);
        assert_eq!(a.values, b.values);
        assert_eq!(a.summarize(), a.summary);
    }

    #[test]
    fn component_subset_matches_full_run() {
        let (m, d) = chain3(2);
        let s = Schedule::linear(2).unwrap();
        let full_spec = ExperimentSpec::new(TimeMode::Discrete, vec![40], vec![1.0], 100, 5);
        let mut sub_spec = full_spec.clone();
        sub_spec.components = Some(vec![1]);
        let full = run_ensemble(&m, &d, &s, &full_spec, 40).unwrap();
        let sub = run_ensemble(&m, &d, &s, &sub_spec, 40).unwrap();
        assert_eq!(full.values(Series::Component(1), 0).unwrap(), sub.values(Series::Component(1), 0).unwrap());
        assert!(sub.values(Series::Total, 0).is_err());
    }

    #[test]
    fn classical_variance_matches_d() {
        let (m, d) = two_state();
        let s = Schedule::linear(1).unwrap();
        let ProcessModel::Discrete(chain) = &m else { unreachable!() };
        let report = assemble_d(chain, &d, &s, &TruncationPolicy::default()).unwrap();
        let spec = ExperimentSpec::new(TimeMode::Discrete, vec![1024], vec![0.5, 1.0], 1000, 2);
        let e = run_ensemble(&m, &d, &s, &spec, 1024).unwrap();
        let x = e.values(Series::Component(1), 1).unwrap();
        let var = stats::variance(&x);
        let se = var * (2.0 / 999.0f64).sqrt();
        assert!((var - report.entry(1, 1)).abs() < 4.0 * se, "{var} vs {}", report.entry(1, 1));
    }

    #[test]
    fn csv_has_one_row_per_replica_and_time() {
        let (m, d) = two_state();
        let spec = ExperimentSpec::new(TimeMode::Discrete, vec![8], vec![0.5, 1.0], 100, 2);
        let e = run_ensemble(&m, &d, &Schedule::linear(1).unwrap(), &spec, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_ensemble(&e, dir.path(), "n8").unwrap();
        let text = std::fs::read_to_string(&files[1]).unwrap();
        assert_eq!(text.lines().count(), 1 + 200);
        assert!(text.starts_with("replica,t,xi_1,xi_total"));
    }

    fn ctmc3() -> ContinuousMarkovModel {
        ContinuousMarkovModel::new(
            None,
            &[vec![-1.0, 0.6, 0.4], vec![0.5, -1.0, 0.5], vec![0.3, 0.7, -1.0]],
            vec![vec![-1.0], vec![0.5], vec![2.0]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn continuous_variance_matches_d() {
        use crate::covariance::{assemble_d_continuous, Quadrature};
        let m = ctmc3();
        let d = decompose(&Observable::product(1).unwrap(), m.observable(), m.stationary()).unwrap();
        let s = Schedule::linear(1).unwrap();
        let report = assemble_d_continuous(&m, &d, &s, &Quadrature::default()).unwrap();
        let spec = ExperimentSpec::new(TimeMode::Continuous, vec![256], vec![1.0], 1000, 4);
        let e = run_ensemble(&ProcessModel::Continuous(m), &d, &s, &spec, 256).unwrap();
        let var = stats::variance(&e.values(Series::Component(1), 0).unwrap());
        let se = var * (2.0 / 999.0f64).sqrt();
        assert!((var - report.entry(1, 1)).abs() < 4.0 * se, "{var} vs {}", report.entry(1, 1));
    }

    #[test]
    fn continuous_realignment_with_polynomial_tail() {
        use crate::schedule::TailFunction;
        let m = ctmc3();
        let d = decompose(&Observable::product(3).unwrap(), m.observable(), m.stationary()).unwrap();
        let s = Schedule::new(2, vec![TailFunction::Polynomial(vec![0, 0, 1])], None).unwrap();
        let spec = ExperimentSpec::new(TimeMode::Continuous, vec![16], vec![0.5, 1.0], 100, 4);
        let e = run_ensemble(&ProcessModel::Continuous(m), &d, &s, &spec, 16).unwrap();
        assert!(e.realignment_error < 1e-10, "{}", e.realignment_error);
        assert!(e.values(Series::Component(3), 1).unwrap().iter().any(|&v| v != 0.0));
    }
}
