//! Independent reference computations: dense elimination, power iteration,
//! Taylor exponentials and exhaustive path enumeration. None of these call
//! into the library.
#![allow(dead_code)]

use rand::Rng;

pub type Matrix = Vec<Vec<f64>>;

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Matrix, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// `pi P = pi` by repeated multiplication.
pub fn stationary_by_power(p: &Matrix) -> Vec<f64> {
    let n = p.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| v[i] * p[i][j]).sum()).collect();
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if delta < 1e-15 {
            break;
        }
    }
    v
}

/// `pi Q = 0`, `sum pi = 1`, by replacing one equation with the norming.
pub fn stationary_of_generator(q: &Matrix) -> Vec<f64> {
    let n = q.len();
    let mut a: Matrix = (0..n).map(|j| (0..n).map(|i| q[i][j]).collect()).collect();
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve(a, b)
}

fn center(f: &[f64], pi: &[f64]) -> Vec<f64> {
    let mean: f64 = f.iter().zip(pi).map(|(a, b)| a * b).sum();
    f.iter().map(|x| x - mean).collect()
}

/// Asymptotic variance of `sum f(X_n)` from the fundamental matrix
/// `Z = (I - P + 1 pi)^{-1}`: `2 <f, Z f>_pi - <f, f>_pi`, `f` centred.
pub fn fundamental_variance(p: &Matrix, f: &[f64]) -> f64 {
    let n = p.len();
    let pi = stationary_by_power(p);
    let g = center(f, &pi);
    let a: Matrix = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } - p[i][j] + pi[j]).collect()).collect();
    let z = solve(a, g.clone());
    let inner = |u: &[f64], v: &[f64]| -> f64 { (0..n).map(|i| pi[i] * u[i] * v[i]).sum() };
    2.0 * inner(&g, &z) - inner(&g, &g)
}

/// Asymptotic variance of `int f(X_s) ds`: `2 <f, g>_pi` with `-Q g = f`,
/// `pi g = 0`.
pub fn generator_variance(q: &Matrix, f: &[f64]) -> f64 {
    let n = q.len();
    let pi = stationary_of_generator(q);
    let fc = center(f, &pi);
    // -Q g = f with the last equation replaced by pi g = 0
    let mut a: Matrix = q.iter().map(|row| row.iter().map(|x| -x).collect()).collect();
    let mut b = fc.clone();
    a[n - 1] = pi.clone();
    b[n - 1] = 0.0;
    let g = solve(a, b);
    2.0 * (0..n).map(|i| pi[i] * fc[i] * g[i]).sum::<f64>()
}

/// `e^{Q t}` by scaling and squaring of a long Taylor series.
pub fn expm_taylor(q: &Matrix, t: f64) -> Matrix {
    let n = q.len();
    let norm = q.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * t.abs();
    let squarings = (norm.max(1.0).log2().ceil() as u32) + 4;
    let h = t / 2f64.powi(squarings as i32);
    let a: Matrix = q.iter().map(|r| r.iter().map(|x| x * h).collect()).collect();
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..30 {
        term = mat_mul(&term, &a).into_iter().map(|r| r.into_iter().map(|x| x / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

/// Random transition matrix with strictly positive entries.
pub fn random_chain<R: Rng>(rng: &mut R, s: usize) -> Matrix {
    (0..s)
        .map(|_| {
            let row: Vec<f64> = (0..s).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|x| x / total).collect()
        })
        .collect()
}

/// Exact `E[xi_N(t)^2]` for a stationary chain with
/// `xi_N(t) = N^{-1/2} sum_{n <= floor(N t)} (F(X(q_1 n), ..., X(q_l n)) - fbar)`,
/// by summing over every path `X(1), ..., X(q_l(floor(N t)))`.
pub fn enumerate_second_moment(
    p: &Matrix,
    f: &dyn Fn(&[usize]) -> f64,
    fbar: f64,
    q: &dyn Fn(usize, usize) -> usize,
    ell: usize,
    big_n: usize,
    t: f64,
) -> f64 {
    let s = p.len();
    let pi = stationary_by_power(p);
    let terms = (big_n as f64 * t + 1e-9).floor() as usize;
    let len = q(ell, terms);
    let mut path = vec![0usize; len + 1];
    let mut total = 0.0;
    let count = s.pow(len as u32);
    for code in 0..count {
        let mut c = code;
        for k in 1..=len {
            path[k] = c % s;
            c /= s;
        }
        let mut prob = pi[path[1]];
        for k in 2..=len {
            prob *= p[path[k - 1]][path[k]];
        }
        if prob == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        let mut x = vec![0usize; ell];
        for n in 1..=terms {
            for (i, slot) in x.iter_mut().enumerate() {
                *slot = path[q(i + 1, n)];
            }
            sum += f(&x) - fbar;
        }
        total += prob * sum * sum;
    }
    total / big_n as f64
}
