//! Small dense linear-algebra helpers for finite state spaces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Residual tolerance for stationary solves.
pub const STATIONARY_RESIDUAL: f64 = 1e-10;

/// Binary powers `P^(2^j)` of a square matrix, so that any `P^n` costs at
/// most 63 products and no mutation.
#[derive(Debug, Clone)]
pub struct PowerLadder {
    squares: Vec<DMatrix<f64>>,
}

impl PowerLadder {
    pub fn new(p: &DMatrix<f64>) -> Self {
        let mut squares = Vec::with_capacity(64);
        squares.push(p.clone());
        for _ in 1..63 {
            let last = squares.last().unwrap();
            let next = last * last;
            squares.push(next);
        }
        Self { squares }
    }

    pub fn dim(&self) -> usize {
        self.squares[0].nrows()
    }

    pub fn pow(&self, n: u64) -> DMatrix<f64> {
        let mut acc = DMatrix::<f64>::identity(self.dim(), self.dim());
        let mut bits = n;
        let mut j = 0;
        while bits != 0 {
            if bits & 1 == 1 {
                acc = &acc * &self.squares[j];
            }
            bits >>= 1;
            j += 1;
        }
        acc
    }

    /// `P^n v` for a column vector, applying the ladder right to left.
    pub fn apply(&self, n: u64, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        let mut bits = n;
        let mut j = 0;
        while bits != 0 {
            if bits & 1 == 1 {
                out = &self.squares[j] * out;
            }
            bits >>= 1;
            j += 1;
        }
        out
    }
}

pub fn mat_pow(p: &DMatrix<f64>, n: u64) -> DMatrix<f64> {
    PowerLadder::new(p).pow(n)
}

/// Matrix exponential (scaling and squaring with a degree-13 Padé approximant).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().exp()
}

fn adjacency(m: &DMatrix<f64>, off_diagonal_only: bool) -> Vec<Vec<usize>> {
    let n = m.nrows();
    (0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| m[(a, b)] > 0.0 && !(off_diagonal_only && a == b))
                .collect()
        })
        .collect()
}

fn reachable_from(adj: &[Vec<usize>], start: usize, reverse: bool) -> Vec<bool> {
    let n = adj.len();
    let mut rev = vec![Vec::new(); n];
    if reverse {
        for (a, row) in adj.iter().enumerate() {
            for &b in row {
                rev[b].push(a);
            }
        }
    }
    let graph = if reverse { &rev[..] } else { adj };
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(a) = stack.pop() {
        for &b in &graph[a] {
            if !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen
}

fn strongly_connected(adj: &[Vec<usize>]) -> bool {
    if adj.is_empty() {
        return false;
    }
    reachable_from(adj, 0, false).iter().all(|&s| s) && reachable_from(adj, 0, true).iter().all(|&s| s)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain: gcd over edges `a -> b` of
/// `level(a) + 1 - level(b)` for BFS levels from state 0.
fn period(adj: &[Vec<usize>]) -> u64 {
    let n = adj.len();
    let mut level = vec![u64::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(a) = queue.pop_front() {
        for &b in &adj[a] {
            if level[b] == u64::MAX {
                level[b] = level[a] + 1;
                queue.push_back(b);
            }
        }
    }
    let mut g = 0;
    for (a, row) in adj.iter().enumerate() {
        for &b in row {
            let diff = (level[a] + 1).abs_diff(level[b]);
            g = gcd(g, diff);
        }
    }
    g
}

/// Checks irreducibility and aperiodicity of a row-stochastic matrix.
pub fn check_ergodic_transition(p: &DMatrix<f64>) -> Result<()> {
    let adj = adjacency(p, false);
    if !strongly_connected(&adj) {
        return Err(Error::NotErgodic("transition graph is reducible".into()));
    }
    let d = period(&adj);
    if d != 1 {
        return Err(Error::NotErgodic(format!("chain has period {d}")));
    }
    Ok(())
}

/// Irreducibility of the embedded jump chain of a rate matrix.
pub fn check_irreducible_generator(q: &DMatrix<f64>) -> Result<()> {
    if q.nrows() == 1 {
        return Ok(());
    }
    let adj = adjacency(q, true);
    if !strongly_connected(&adj) {
        return Err(Error::NotErgodic("embedded jump chain is reducible".into()));
    }
    Ok(())
}

/// Solves `x A = 0`, `sum x = 1` by replacing one equation of `A^T x = 0`
/// with the normalisation row.
fn left_null_probability(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut sys = a.transpose();
    for c in 0..n {
        sys[(n - 1, c)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let x = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotErgodic("singular stationary system".into()))?;
    let mut pi: Vec<f64> = x.iter().map(|&v| if v < 0.0 && v > -1e-13 { 0.0 } else { v }).collect();
    if pi.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::NotErgodic("stationary solve produced negative mass".into()));
    }
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    Ok(pi)
}

pub fn stationary_of_transition(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let a = p - DMatrix::<f64>::identity(n, n);
    let pi = left_null_probability(&a)?;
    let row = DVector::from_column_slice(&pi).transpose();
    let residual = (&row * p - &row).abs().max();
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::NotErgodic(format!("stationary residual {residual:.3e}")));
    }
    Ok(pi)
}

pub fn stationary_of_generator(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let pi = left_null_probability(q)?;
    let row = DVector::from_column_slice(&pi).transpose();
    let scale = q.abs().max().max(1.0);
    let residual = (&row * q).abs().max() / scale;
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::NotErgodic(format!("stationary residual {residual:.3e}")));
    }
    Ok(pi)
}

/// Absolute spectral gap `1 - max |lambda|` over the non-unit eigenvalues.
pub fn spectral_gap_transition(p: &DMatrix<f64>) -> f64 {
    if p.nrows() == 1 {
        return 1.0;
    }
    let mut mods: Vec<(f64, f64)> = p
        .complex_eigenvalues()
        .iter()
        .map(|z| ((z.re - 1.0).hypot(z.im), z.norm()))
        .collect();
    // drop the Perron eigenvalue (the one closest to 1)
    mods.sort_by(|a, b| a.0.total_cmp(&b.0));
    let second = mods[1..].iter().map(|m| m.1).fold(0.0, f64::max);
    (1.0 - second).max(0.0)
}

/// Spectral gap `-max Re(lambda)` over the non-zero eigenvalues of a generator.
pub fn spectral_gap_generator(q: &DMatrix<f64>) -> f64 {
    if q.nrows() == 1 {
        return f64::INFINITY;
    }
    let mut eig: Vec<(f64, f64)> = q
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.norm(), z.re))
        .collect();
    eig.sort_by(|a, b| a.0.total_cmp(&b.0));
    -eig[1..].iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_matches_repeated_products() {
        let p = DMatrix::from_row_slice(3, 3, &[0.5, 0.25, 0.25, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4]);
        let mut direct = DMatrix::identity(3, 3);
        for _ in 0..13 {
            direct = &direct * &p;
        }
        let ladder = PowerLadder::new(&p);
        assert!((ladder.pow(13) - &direct).abs().max() < 1e-14);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert!((ladder.apply(13, &v) - &direct * &v).abs().max() < 1e-14);
        assert_eq!(ladder.pow(0), DMatrix::identity(3, 3));
    }

    #[test]
    fn period_detection() {
        let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(check_ergodic_transition(&flip), Err(Error::NotErgodic(_))));
        let cycle3 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(check_ergodic_transition(&cycle3).is_err());
        // cycles of length 2 and 3 give period 1
        let mixed = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(check_ergodic_transition(&mixed).is_ok());
        let reducible = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5]);
        assert!(check_ergodic_transition(&reducible).is_err());
    }

    #[test]
    fn expm_of_two_state_generator() {
        // closed form: e^{Qt} = 1 pi + e^{-(a+b)t} (I - 1 pi)
        let (a, b, t) = (0.7, 0.3, 1.3);
        let q = DMatrix::from_row_slice(2, 2, &[-a, a, b, -b]);
        let e = expm(&(&q * t));
        let pi0 = b / (a + b);
        let decay = (-(a + b) * t).exp();
        let expected00 = pi0 + decay * (1.0 - pi0);
        assert!((e[(0, 0)] - expected00).abs() < 1e-13);
        assert!((spectral_gap_generator(&q) - 1.0).abs() < 1e-12);
    }
}
