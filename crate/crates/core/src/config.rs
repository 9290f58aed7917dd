//! TOML run configuration shared by every subcommand.
//!
//! ```toml
//! [model]
//! kind = "dtmc"                 # dtmc | ctmc | iid
//! matrix = [[0.9, 0.1], [0.3, 0.7]]
//! observable = [[1.0], [0.0]]   # one point per state; default: the state index
//!
//! [schedule]
//! k = 1
//!
//! [observable]
//! builtin = "product"
//!
//! [experiment]
//! N = [4096]
//! t = [0.5, 1.0]
//! replicas = 2000
//! seed = 1
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::covariance::{TailBoundMode, TimeMode, TruncationPolicy};
use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, StartLaw, TestToggles};
use crate::markov::{ContinuousMarkovModel, DiscreteMarkovModel, IidModel, Point, ProcessModel};
use crate::observables::{ap_indicator_observable, decompose, Decomposition, Observable};
use crate::schedule::{Schedule, TailFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dtmc,
    Ctmc,
    Iid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub states: Option<Vec<String>>,
    /// Transition matrix (dtmc) or generator (ctmc).
    pub matrix: Option<Vec<Vec<f64>>>,
    pub observable: Option<Vec<Point>>,
    pub initial: Option<Vec<f64>>,
    pub atoms: Option<Vec<Point>>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub k: usize,
    /// Polynomial tail functions, coefficients lowest degree first.
    #[serde(default)]
    pub tail: Vec<Vec<i64>>,
    /// Tabulated tail functions, placed after the polynomials.
    #[serde(default)]
    pub tables: Vec<Vec<u64>>,
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Product,
    SquareProductMinusOne,
    ApIndicator,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSection {
    pub builtin: Option<Builtin>,
    /// Sets `A_1, ..., A_ell` of state indices for `ap-indicator`.
    pub sets: Option<Vec<Vec<usize>>>,
    /// Full table of `F` over the state grid, row-major in `(x_1, ..., x_ell)`.
    pub table: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: Option<TimeMode>,
    #[serde(rename = "N")]
    pub n: Vec<u64>,
    pub t: Vec<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start: StartLaw,
    pub components: Option<Vec<usize>>,
    #[serde(default)]
    pub tests: TestToggles,
    /// Smallness threshold of the continuous vanishing test, as a fraction
    /// of the discrete variance.
    pub vanishing_fraction: Option<f64>,
}

fn default_replicas() -> usize {
    2000
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSection {
    pub tol: Option<f64>,
    pub max_lag: Option<u64>,
    /// Run length of the plateau tail bound; geometric when absent.
    pub plateau_run: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub schedule: ScheduleSection,
    pub observable: ObservableSection,
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub covariance: CovarianceSection,
}

/// Everything a subcommand needs, validated.
#[derive(Debug, Clone)]
pub struct Setup {
    pub text: String,
    pub model: ProcessModel,
    pub schedule: Schedule,
    pub observable: Observable,
    pub experiment: Option<ExperimentSpec>,
    pub policy: TruncationPolicy,
    pub vanishing_fraction: f64,
}

impl Setup {
    pub fn decomposition(&self) -> Result<Decomposition> {
        decompose(&self.observable, self.model.observable(), self.model.stationary())
    }
}

fn parse_error(location: &str, text: &str, e: &toml::de::Error) -> Error {
    let location = match e.span() {
        Some(span) => format!("{location}:{}", text[..span.start.min(text.len())].matches('\n').count() + 1),
        None => location.to_string(),
    };
    Error::Parse { location, message: e.message().to_string() }
}

pub fn load(path: &Path) -> Result<Setup> {
    let text = std::fs::read_to_string(path)?;
    parse(&text, &path.display().to_string())
}

/// Parses and validates a configuration; `location` names the source in
/// error messages.
pub fn parse(text: &str, location: &str) -> Result<Setup> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| parse_error(location, text, &e))?;
    build(file, text)
}

fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidModel(format!("missing {what}")))
}

fn build(file: ConfigFile, text: &str) -> Result<Setup> {
    let ConfigFile { model: m, schedule: s, observable: o, experiment, covariance } = file;

    let tail: Vec<TailFunction> = s
        .tail
        .into_iter()
        .map(TailFunction::Polynomial)
        .chain(s.tables.into_iter().map(TailFunction::Table))
        .collect();
    let schedule = Schedule::new(s.k, tail, s.alpha)?;
    let ell = schedule.ell();

    let default_points = |n: usize| -> Vec<Point> { (0..n).map(|a| vec![a as f64]).collect() };
    let mut model = match m.kind {
        ModelKind::Dtmc => {
            let matrix = require(m.matrix, "model.matrix")?;
            let points = m.observable.unwrap_or_else(|| default_points(matrix.len()));
            ProcessModel::Discrete(DiscreteMarkovModel::new(m.states, &matrix, points, m.initial)?)
        }
        ModelKind::Ctmc => {
            let matrix = require(m.matrix, "model.matrix")?;
            let points = m.observable.unwrap_or_else(|| default_points(matrix.len()));
            ProcessModel::Continuous(ContinuousMarkovModel::new(m.states, &matrix, points, m.initial)?)
        }
        ModelKind::Iid => {
            let iid = IidModel::new(require(m.atoms, "model.atoms")?, require(m.weights, "model.weights")?)?;
            ProcessModel::Discrete(iid.to_chain())
        }
    };

    if o.sets.is_some() && o.builtin != Some(Builtin::ApIndicator) {
        return Err(Error::InvalidObservable("observable.sets only applies to ap-indicator".into()));
    }
    let observable = match (o.builtin, o.table) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidObservable("give either observable.builtin or observable.table".into()))
        }
        (None, Some(table)) => Observable::table(ell, table)?,
        (Some(Builtin::Product), None) => Observable::product(ell)?,
        (Some(Builtin::SquareProductMinusOne), None) => Observable::square_product_minus_one(ell)?,
        (Some(Builtin::ApIndicator), None) => {
            let sets = o.sets.ok_or_else(|| Error::InvalidObservable("ap-indicator needs observable.sets".into()))?;
            if sets.len() != ell {
                return Err(Error::InvalidObservable(format!("{} sets for {ell} schedule functions", sets.len())));
            }
            let ap = ap_indicator_observable(model.num_states(), &sets)?;
            model = model.with_observable(ap.state_map)?;
            ap.observable
        }
        (None, None) => return Err(Error::InvalidObservable("observable section is empty".into())),
    };

    let tail_bound_mode = match covariance.plateau_run {
        Some(run) => TailBoundMode::Plateau { run },
        None => TailBoundMode::Geometric,
    };
    let defaults = TruncationPolicy::default();
    let policy = TruncationPolicy::new(
        covariance.tol.unwrap_or(defaults.abs_tol),
        covariance.max_lag.unwrap_or(defaults.max_lag),
        tail_bound_mode,
    )?;

    let mut vanishing_fraction = 0.05;
    let experiment = match experiment {
        Some(e) => {
            let mode = e.mode.unwrap_or(match model {
                ProcessModel::Discrete(_) => TimeMode::Discrete,
                ProcessModel::Continuous(_) => TimeMode::Continuous,
            });
            if let Some(f) = e.vanishing_fraction {
                vanishing_fraction = f;
            }
            let mut spec = ExperimentSpec::new(mode, e.n, e.t, e.replicas, e.seed);
            spec.start = e.start;
            spec.components = e.components;
            spec.tests = e.tests;
            spec.validate(ell)?;
            Some(spec)
        }
        None => None,
    };

    Ok(Setup { text: text.to_string(), model, schedule, observable, experiment, policy, vanishing_fraction })
}
