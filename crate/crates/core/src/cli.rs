//! `noncon` command line: model-check, covariance, simulate, martingale.
//!
//! Exit codes: 0 pass, 1 other errors, 2 invalid model/schedule/observable,
//! 3 parse error, 4 truncation or quadrature failure, 5 test failure,
//! 6 overflow.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{self, Setup};
use crate::covariance::{assemble_d, assemble_d_continuous, CovarianceReport, Quadrature, TimeMode, TruncationPolicy};
use crate::error::{Error, Result};
use crate::harness::{
    ct_vanishing_test, run_ensemble, run_tests, write_ensemble, ExperimentSpec, Series, TestSuiteResult,
};
use crate::markov::{mixing_profile, ProcessModel};
use crate::martingale::ConditionalEngine;
use crate::observables::Decomposition;
use crate::report::{sha256_hex, write_json, Fingerprints, RunManifest, TOOL_VERSION};
use crate::schedule::{Schedule, TailFunction};
use crate::stats;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_TRUNCATION: i32 = 4;
pub const EXIT_TEST_FAILURE: i32 = 5;
pub const EXIT_OVERFLOW: i32 = 6;

/// Lags shown by model-check.
const PROFILE_LAGS: usize = 20;
/// Horizon and separation constants of the schedule growth checks.
const GROWTH_HORIZON: u64 = 1000;
const GROWTH_EPSILONS: [f64; 2] = [0.5, 0.1];

#[derive(Debug, Parser)]
#[command(name = "noncon", version, about = "Nonconventional limit theorems for finite-state Markov models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the model and schedule; print pi, the spectral gap and mixing coefficients.
    ModelCheck {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the limiting covariance matrix D.
    Covariance {
        config: PathBuf,
        #[command(flatten)]
        truncation: TruncationArgs,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TimeMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte Carlo ensemble and its tests.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<u32>,
        #[arg(long = "N", value_delimiter = ',')]
        n: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TimeMode>,
        #[command(flatten)]
        truncation: TruncationArgs,
        #[arg(long, default_value = "noncon-out")]
        out_dir: PathBuf,
    },
    /// Check the martingale-difference approximation exactly.
    Martingale {
        config: PathBuf,
        #[arg(long = "N", value_delimiter = ',')]
        n: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        component: usize,
        #[command(flatten)]
        truncation: TruncationArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct TruncationArgs {
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_lag: Option<u32>,
}

impl TruncationArgs {
    fn apply(&self, base: &TruncationPolicy) -> Result<TruncationPolicy> {
        TruncationPolicy::new(
            self.tol.unwrap_or(base.abs_tol),
            self.max_lag.map_or(base.max_lag, u64::from),
            base.tail_bound_mode,
        )
    }
}

fn parse_mode(s: &str) -> std::result::Result<TimeMode, String> {
    match s {
        "discrete" => Ok(TimeMode::Discrete),
        "continuous" => Ok(TimeMode::Continuous),
        _ => Err(format!("expected discrete or continuous, got {s}")),
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidModel(_)
        | Error::NotErgodic(_)
        | Error::InvalidSchedule(_)
        | Error::InvalidObservable(_)
        | Error::InvalidExperiment(_)
        | Error::StateSpaceTooLarge { .. } => EXIT_INVALID,
        Error::Parse { .. } => EXIT_PARSE,
        Error::TruncationFailed { .. } | Error::QuadratureFailed(_) => EXIT_TRUNCATION,
        Error::Overflow { .. } | Error::HorizonOverflow { .. } | Error::GridTooLarge { .. } => EXIT_OVERFLOW,
        _ => EXIT_OTHER,
    }
}

/// Provenance wrapped around every JSON report.
#[derive(Debug, Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: String,
    tool_version: &'static str,
    seed: Option<u64>,
    #[serde(flatten)]
    body: &'a T,
}

fn write_stamped<T: Serialize>(path: &Path, setup: &Setup, seed: Option<u64>, body: &T) -> Result<()> {
    let stamped = Stamped { config_hash: sha256_hex(setup.text.as_bytes()), tool_version: TOOL_VERSION, seed, body };
    write_json(path, &stamped)
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_PASS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main_from_env() -> i32 {
    run(std::env::args_os())
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::ModelCheck { config, out } => model_check(&config, out.as_deref()),
        Command::Covariance { config, truncation, mode, out } => {
            let setup = config::load(&config)?;
            let policy = truncation.apply(&setup.policy)?;
            let decomposition = setup.decomposition()?;
            check_growth(&setup.schedule)?;
            let report = covariance_report(&setup, &decomposition, &policy, mode)?;
            print_matrix(&report);
            if let Some(out) = out {
                write_stamped(&out, &setup, None, &report)?;
                println!("wrote {}", out.display());
            }
            Ok(EXIT_PASS)
        }
        Command::Simulate { config, seed, replicas, n, t, mode, truncation, out_dir } => {
            let setup = config::load(&config)?;
            let mut spec = setup
                .experiment
                .clone()
                .ok_or_else(|| Error::InvalidExperiment("config has no [experiment] section".into()))?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(r) = replicas {
                spec.replicas = r as usize;
            }
            if let Some(n) = n {
                spec.n_values = n.into_iter().map(u64::from).collect();
            }
            if let Some(t) = t {
                spec.t_grid = t;
            }
            if let Some(mode) = mode {
                spec.mode = mode;
            }
            spec.validate(setup.schedule.ell())?;
            let policy = truncation.apply(&setup.policy)?;
            simulate(&setup, &spec, &policy, &out_dir)
        }
        Command::Martingale { config, n, t, component, truncation, out } => {
            let setup = config::load(&config)?;
            let policy = truncation.apply(&setup.policy)?;
            let n_values: Vec<u64> = match (n, &setup.experiment) {
                (Some(n), _) => n.into_iter().map(u64::from).collect(),
                (None, Some(e)) => e.n_values.clone(),
                (None, None) => vec![512],
            };
            let t_values = match (t, &setup.experiment) {
                (Some(t), _) => t,
                (None, Some(e)) => vec![*e.t_grid.last().unwrap()],
                (None, None) => vec![1.0],
            };
            martingale(&setup, &policy, component, &n_values, &t_values, out.as_deref())
        }
    }
}

fn model_check(path: &Path, out: Option<&Path>) -> Result<i32> {
    let setup = config::load(path)?;
    let decomposition = setup.decomposition()?;
    let pi = setup.model.stationary();
    println!("states: {}", pi.len());
    println!("pi: {}", format_row(pi));
    let (gap, chain) = match &setup.model {
        ProcessModel::Discrete(m) => (m.spectral_gap(), m.clone()),
        ProcessModel::Continuous(m) => (m.spectral_gap(), m.skeleton()?),
    };
    println!("spectral gap: {gap:.6e}");
    if matches!(setup.model, ProcessModel::Continuous(_)) {
        println!("mixing coefficients of the unit-time skeleton:");
    }
    let profile = mixing_profile(&chain, PROFILE_LAGS);
    println!("{:>4} {:>12} {:>12} {:>12} {:>12}", "lag", "psi", "phi", "alpha", "rho");
    for n in 0..=PROFILE_LAGS {
        println!(
            "{n:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            profile.psi[n], profile.phi[n], profile.alpha[n], profile.rho[n]
        );
    }
    let growth = growth_report(&setup.schedule);
    if let Some(g) = &growth {
        for c in &g.checks {
            println!("schedule check {} {}: {}", c.name, if c.pass { "ok" } else { "FAILED" }, c.detail);
        }
    }
    println!("observable: F-bar = {:.6e}, reconstruction defect {:.1e}", decomposition.fbar(), decomposition.reconstruction_defect());
    #[derive(Serialize)]
    struct ModelCheck<'a> {
        stationary: &'a [f64],
        spectral_gap: f64,
        mixing: &'a crate::markov::MixingProfile,
        schedule: Option<&'a crate::schedule::ValidationReport>,
        fbar: f64,
    }
    if let Some(out) = out {
        let body = ModelCheck { stationary: pi, spectral_gap: gap, mixing: &profile, schedule: growth.as_ref(), fbar: decomposition.fbar() };
        write_stamped(out, &setup, None, &body)?;
    }
    match growth.as_ref().and_then(|g| g.first_failure()) {
        Some(c) => {
            eprintln!("error: schedule fails the {} check: {}", c.name, c.detail);
            Ok(EXIT_INVALID)
        }
        None => Ok(EXIT_PASS),
    }
}

/// Growth checks of the tail, over the longest horizon every tail function
/// covers; `None` when there is no tail.
fn growth_report(schedule: &Schedule) -> Option<crate::schedule::ValidationReport> {
    if schedule.ell() == schedule.k() {
        return None;
    }
    let horizon = schedule
        .tail()
        .iter()
        .filter_map(|f| match f {
            TailFunction::Table(v) => Some((v.len() as u64).saturating_sub(2)),
            TailFunction::Polynomial(_) => None,
        })
        .fold(GROWTH_HORIZON, u64::min);
    Some(schedule.validate_growth(horizon, &GROWTH_EPSILONS))
}

fn check_growth(schedule: &Schedule) -> Result<()> {
    match growth_report(schedule).as_ref().and_then(|g| g.first_failure()) {
        Some(c) => Err(Error::InvalidSchedule(format!("{} check failed: {}", c.name, c.detail))),
        None => Ok(()),
    }
}

fn covariance_report(
    setup: &Setup,
    decomposition: &Decomposition,
    policy: &TruncationPolicy,
    mode: Option<TimeMode>,
) -> Result<CovarianceReport> {
    let mut report = match (&setup.model, mode) {
        (ProcessModel::Discrete(m), None | Some(TimeMode::Discrete)) => assemble_d(m, decomposition, &setup.schedule, policy)?,
        (ProcessModel::Continuous(m), None | Some(TimeMode::Continuous)) => {
            setup.schedule.validate_continuous()?;
            let quadrature = Quadrature { abs_tol: policy.abs_tol, ..Quadrature::default() };
            assemble_d_continuous(m, decomposition, &setup.schedule, &quadrature)?
        }
        (ProcessModel::Continuous(m), Some(TimeMode::Discrete)) => {
            assemble_d(&m.skeleton()?, decomposition, &setup.schedule, policy)?
        }
        (ProcessModel::Discrete(_), Some(TimeMode::Continuous)) => {
            return Err(Error::InvalidExperiment("continuous mode needs a ctmc model".into()))
        }
    };
    report.fingerprints = Some(Fingerprints::of(&setup.model, &setup.schedule, decomposition));
    Ok(report)
}

fn format_row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ")
}

fn print_matrix(report: &CovarianceReport) {
    println!("D ({} x {}, k = {}):", report.ell, report.ell, report.k);
    for i in 1..=report.ell {
        let row: Vec<String> =
            (1..=report.ell).map(|j| format!("{:>13.6e} ±{:.1e}", report.entry(i, j), report.error_bound(i, j))).collect();
        println!("  {}", row.join("  "));
    }
}

fn simulate(setup: &Setup, spec: &ExperimentSpec, policy: &TruncationPolicy, out_dir: &Path) -> Result<i32> {
    let decomposition = setup.decomposition()?;
    check_growth(&setup.schedule)?;
    let report = covariance_report(setup, &decomposition, policy, Some(spec.mode))?;
    // a ctmc simulated in discrete mode uses its unit-time skeleton
    let model = match (&setup.model, spec.mode) {
        (ProcessModel::Continuous(m), TimeMode::Discrete) => ProcessModel::Discrete(m.skeleton()?),
        (m, _) => m.clone(),
    };
    let mut manifest = RunManifest::new("simulate", &setup.text, Some(spec.seed));
    std::fs::create_dir_all(out_dir)?;
    let covariance_path = out_dir.join("covariance.json");
    write_stamped(&covariance_path, setup, Some(spec.seed), &report)?;
    manifest.record(&covariance_path)?;

    let mut suite = TestSuiteResult::default();
    let mut ensembles = Vec::new();
    for &n in &spec.n_values {
        let ensemble = run_ensemble(&model, &decomposition, &setup.schedule, spec, n)?;
        for path in write_ensemble(&ensemble, out_dir, &format!("ensemble_N{n}"))? {
            manifest.record(&path)?;
        }
        suite.extend(run_tests(&ensemble, &report, &spec.tests)?);
        println!("N = {n}: realignment error {:.1e}", ensemble.realignment_error);
        ensembles.push(ensemble);
    }

    if spec.tests.ct_vanishing && spec.mode == TimeMode::Continuous {
        let ProcessModel::Continuous(ct) = &setup.model else { unreachable!() };
        let skeleton = ProcessModel::Discrete(ct.skeleton()?);
        let smallest = *spec.n_values.iter().min().unwrap();
        for i in setup.schedule.k() + 1..=setup.schedule.ell() {
            if !ensembles[0].components.contains(&i) {
                continue;
            }
            let mut discrete = spec.clone();
            discrete.mode = TimeMode::Discrete;
            let reference = run_ensemble(&skeleton, &decomposition, &setup.schedule, &discrete, smallest)?;
            let t_last = reference.t_grid.len() - 1;
            let variance = stats::variance(&reference.values(Series::Component(i), t_last)?);
            suite.extend(ct_vanishing_test(&ensembles, i, variance, setup.vanishing_fraction)?);
        }
    }

    let tests_path = out_dir.join("tests.json");
    write_stamped(&tests_path, setup, Some(spec.seed), &suite)?;
    manifest.record(&tests_path)?;
    manifest.finish(&out_dir.join("manifest.json"))?;

    for t in &suite.tests {
        println!("{:?} {} statistic {:.4e} threshold {:.4e}", t.status, t.name, t.statistic, t.threshold);
    }
    let failures = suite.failures().count();
    println!("{} tests, {failures} failed", suite.tests.len());
    Ok(if failures == 0 { EXIT_PASS } else { EXIT_TEST_FAILURE })
}

fn martingale(
    setup: &Setup,
    policy: &TruncationPolicy,
    component: usize,
    n_values: &[u64],
    t_values: &[f64],
    out: Option<&Path>,
) -> Result<i32> {
    let ProcessModel::Discrete(chain) = &setup.model else {
        return Err(Error::InvalidExperiment("the martingale check needs a discrete model".into()));
    };
    let decomposition = setup.decomposition()?;
    let engine = ConditionalEngine::new(chain, &decomposition, &setup.schedule, *policy)?;
    let mut reports = Vec::new();
    for &n in n_values {
        for &t in t_values {
            let r = engine.martingale_check(component, n, t)?;
            println!(
                "N = {n}, t = {t}: max |E[W | past]| = {:.3e} (bound {:.3e}), (1/N) sum E W^2 = {:.6e}, target {:.6e} {}",
                r.max_conditional_mean,
                r.truncation_bound,
                r.a_estimate,
                r.target,
                if r.pass { "ok" } else { "FAILED" }
            );
            reports.push(r);
        }
    }
    if let Some(out) = out {
        #[derive(Serialize)]
        struct Checks<'a> {
            checks: &'a [crate::martingale::CheckReport],
        }
        write_stamped(out, setup, None, &Checks { checks: &reports })?;
    }
    Ok(if reports.iter().all(|r| r.pass) { EXIT_PASS } else { EXIT_TEST_FAILURE })
}
