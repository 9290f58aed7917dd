//! The functional `F(x_1, ..., x_ell)` and its decomposition
//! `F = Fbar + F_1 + ... + F_ell`, where each `F_i` depends on the first `i`
//! coordinates and integrates to zero in its last one.
//!
//! Everything is tabulated over state indices: an `i`-dimensional table is a
//! flat row-major vector of length `S^i` whose last coordinate varies fastest.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::Point;

/// Default cap on the number of grid entries `S^ell`.
pub const GRID_CAP: u128 = 100_000_000;

/// For state observables of a Markov chain the approximation coefficient
/// `beta(p, r)` vanishes identically.
pub const APPROXIMATION_BETA: f64 = 0.0;

type EvalFn = dyn Fn(&[&Point]) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableKind {
    Generic,
    Product,
    SquareProductMinusOne,
    ProductOfIndicators,
    Table,
}

#[derive(Clone)]
enum Evaluator {
    Function(Arc<EvalFn>),
    /// Values over the state grid, `S^ell` entries.
    Table(Arc<Vec<f64>>),
}

/// A real function of `ell` points. Growth conditions on `F` are vacuous on
/// a finite grid, so none are checked.
#[derive(Clone)]
pub struct Observable {
    ell: usize,
    kind: ObservableKind,
    eval: Evaluator,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable").field("ell", &self.ell).field("kind", &self.kind).finish()
    }
}

fn check_ell(ell: usize) -> Result<()> {
    if ell == 0 {
        return Err(Error::InvalidObservable("arity must be at least 1".into()));
    }
    Ok(())
}

/// Coordinate of point `j` used by the product builtins: coordinate `j` for
/// `ell`-dimensional points, the only coordinate for scalar points.
fn product_coordinate(p: &Point, j: usize) -> f64 {
    if p.len() == 1 {
        p[0]
    } else {
        p[j]
    }
}

impl Observable {
    pub fn from_fn(ell: usize, f: impl Fn(&[&Point]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_ell(ell)?;
        Ok(Self { ell, kind: ObservableKind::Generic, eval: Evaluator::Function(Arc::new(f)) })
    }

    /// `F = prod_j x_j`, taking coordinate `j` of the `j`-th point when points
    /// have dimension `ell`, and the scalar otherwise.
    pub fn product(ell: usize) -> Result<Self> {
        check_ell(ell)?;
        Ok(Self {
            ell,
            kind: ObservableKind::Product,
            eval: Evaluator::Function(Arc::new(|xs: &[&Point]| {
                xs.iter().enumerate().map(|(j, p)| product_coordinate(p, j)).product()
            })),
        })
    }

    /// `F = prod_j x_j^2 - 1` on the first coordinate.
    pub fn square_product_minus_one(ell: usize) -> Result<Self> {
        check_ell(ell)?;
        Ok(Self {
            ell,
            kind: ObservableKind::SquareProductMinusOne,
            eval: Evaluator::Function(Arc::new(|xs: &[&Point]| xs.iter().map(|p| p[0] * p[0]).product::<f64>() - 1.0)),
        })
    }

    /// Explicit values on the state grid, row-major with the last
    /// coordinate fastest.
    pub fn table(ell: usize, values: Vec<f64>) -> Result<Self> {
        check_ell(ell)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservable("table contains non-finite values".into()));
        }
        Ok(Self { ell, kind: ObservableKind::Table, eval: Evaluator::Table(Arc::new(values)) })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    /// `F` at a tuple of points. Tables have no meaning off the grid.
    pub fn eval(&self, points: &[&Point]) -> Result<f64> {
        if points.len() != self.ell {
            return Err(Error::InvalidObservable(format!("expected {} points, got {}", self.ell, points.len())));
        }
        match &self.eval {
            Evaluator::Function(f) => Ok(f(points)),
            Evaluator::Table(_) => Err(Error::Unsupported("table observables are defined on the state grid only".into())),
        }
    }

    /// `F(x(s_1), ..., x(s_ell))` for every state tuple, where `points[s]` is
    /// the observable value of state `s`.
    pub fn tabulate(&self, points: &[Point]) -> Result<Vec<f64>> {
        let s = points.len();
        let entries = grid_size(s, self.ell)?;
        let values = match &self.eval {
            Evaluator::Table(t) => {
                if t.len() as u128 != entries {
                    return Err(Error::InvalidObservable(format!(
                        "table has {} entries, the grid has {entries}",
                        t.len()
                    )));
                }
                t.as_ref().clone()
            }
            Evaluator::Function(f) => {
                if matches!(self.kind, ObservableKind::Product) {
                    let dim = points.first().map_or(1, |p| p.len());
                    if dim != 1 && dim < self.ell {
                        return Err(Error::InvalidObservable(format!(
                            "product needs scalar or {}-dimensional points, got dimension {dim}",
                            self.ell
                        )));
                    }
                }
                let mut out = Vec::with_capacity(entries as usize);
                let mut idx = vec![0usize; self.ell];
                for _ in 0..entries {
                    let tuple: Vec<&Point> = idx.iter().map(|&a| &points[a]).collect();
                    out.push(f(&tuple));
                    for c in (0..self.ell).rev() {
                        idx[c] += 1;
                        if idx[c] < s {
                            break;
                        }
                        idx[c] = 0;
                    }
                }
                out
            }
        };
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidObservable(format!("F is not finite at grid entry {pos}")));
        }
        Ok(values)
    }
}

/// `S^ell`, checked against [`GRID_CAP`].
pub fn grid_size(states: usize, ell: usize) -> Result<u128> {
    let mut entries: u128 = 1;
    for _ in 0..ell {
        entries = entries.saturating_mul(states as u128);
        if entries > GRID_CAP {
            return Err(Error::GridTooLarge { entries, cap: GRID_CAP });
        }
    }
    Ok(entries)
}

/// Counting observable for arithmetic progressions: state `s` is mapped to
/// the indicator vector `(1_{A_1}(s), ..., 1_{A_ell}(s))` and
/// `F = prod_j x_j^{(j)}`.
#[derive(Debug, Clone)]
pub struct ApIndicator {
    pub state_map: Vec<Point>,
    pub observable: Observable,
    /// Indices `j` (0-based) with `A_j` empty, making `F` identically 0.
    pub empty_sets: Vec<usize>,
}

pub fn ap_indicator_observable(states: usize, sets: &[Vec<usize>]) -> Result<ApIndicator> {
    let ell = sets.len();
    check_ell(ell)?;
    for (j, set) in sets.iter().enumerate() {
        if let Some(&bad) = set.iter().find(|&&s| s >= states) {
            return Err(Error::InvalidObservable(format!("set {} names state {bad}, model has {states}", j + 1)));
        }
    }
    let state_map = (0..states)
        .map(|s| sets.iter().map(|set| if set.contains(&s) { 1.0 } else { 0.0 }).collect())
        .collect();
    let observable = Observable {
        ell,
        kind: ObservableKind::ProductOfIndicators,
        eval: Evaluator::Function(Arc::new(|xs: &[&Point]| xs.iter().enumerate().map(|(j, p)| p[j]).product())),
    };
    let empty_sets = sets.iter().enumerate().filter(|(_, s)| s.is_empty()).map(|(j, _)| j).collect();
    Ok(ApIndicator { state_map, observable, empty_sets })
}

/// `E|X|^theta = sum_a |atom_a|^theta w_a` with the Euclidean norm; NaN
/// unless `theta > 0`.
pub fn moment(atoms: &[Point], weights: &[f64], theta: f64) -> f64 {
    if !(theta > 0.0) {
        return f64::NAN;
    }
    atoms
        .iter()
        .zip(weights)
        .map(|(a, w)| a.iter().map(|x| x * x).sum::<f64>().sqrt().powf(theta) * w)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    mu: Vec<f64>,
    fbar: f64,
    /// `F` itself, `S^ell` entries.
    full: Vec<f64>,
    /// `components[i - 1]` is `F_i`, `S^i` entries.
    components: Vec<Vec<f64>>,
}

/// Decomposes the tabulated `F` against the marginal `mu` by backward
/// marginalisation: `G_ell = F`, `G_{i-1} = sum_x G_i mu(x)`,
/// `Fbar = G_0`, `F_i = G_i - G_{i-1}`.
pub fn decompose(observable: &Observable, points: &[Point], mu: &[f64]) -> Result<Decomposition> {
    if points.len() != mu.len() {
        return Err(Error::InvalidObservable("marginal and state map differ in length".into()));
    }
    let full = observable.tabulate(points)?;
    Ok(decompose_table(full, mu, observable.ell()))
}

/// Same as [`decompose`] for an already tabulated `F`.
pub fn decompose_table(full: Vec<f64>, mu: &[f64], ell: usize) -> Decomposition {
    let s = mu.len();
    let mut g = Vec::with_capacity(ell + 1);
    g.push(full.clone());
    for _ in 0..ell {
        let last = g.last().unwrap();
        let marginal: Vec<f64> = last
            .chunks_exact(s)
            .map(|row| row.iter().zip(mu).map(|(v, m)| v * m).sum())
            .collect();
        g.push(marginal);
    }
    g.reverse(); // g[i] = G_i, length S^i
    let fbar = g[0][0];
    let components = (1..=ell)
        .map(|i| {
            let parent = &g[i - 1];
            g[i].iter().enumerate().map(|(idx, v)| v - parent[idx / s]).collect()
        })
        .collect();
    Decomposition { mu: mu.to_vec(), fbar, full, components }
}

impl Decomposition {
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn states(&self) -> usize {
        self.mu.len()
    }

    pub fn ell(&self) -> usize {
        self.components.len()
    }

    pub fn fbar(&self) -> f64 {
        self.fbar
    }

    pub fn full(&self) -> &[f64] {
        &self.full
    }

    /// Table of `F_i`, `1 <= i <= ell`.
    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i - 1]
    }

    /// Flat index of a state tuple.
    pub fn index(&self, states: &[usize]) -> usize {
        states.iter().fold(0, |acc, &a| acc * self.states() + a)
    }

    /// Largest violation of `sum_{x_i} F_i(prefix, x_i) mu(x_i) = 0`.
    pub fn mean_zero_defect(&self) -> f64 {
        let s = self.states();
        self.components
            .iter()
            .flat_map(|c| c.chunks_exact(s).map(|row| row.iter().zip(&self.mu).map(|(v, m)| v * m).sum::<f64>().abs()))
            .fold(0.0, f64::max)
    }

    /// Largest violation of `sum_i F_i(x_1..x_i) = F - Fbar` on the grid.
    pub fn reconstruction_defect(&self) -> f64 {
        let s = self.states();
        let ell = self.ell();
        self.full
            .iter()
            .enumerate()
            .map(|(idx, f)| {
                let total: f64 = (1..=ell).map(|i| self.components[i - 1][idx / s.pow((ell - i) as u32)]).sum();
                (total - (f - self.fbar)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `int F_i^2 d mu^i`.
    pub fn second_moment(&self, i: usize) -> f64 {
        let s = self.states();
        self.component(i)
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let weight: f64 = (0..i).map(|c| self.mu[(idx / s.pow(c as u32)) % s]).product();
                v * v * weight
            })
            .sum()
    }
}
