mod common;

use common::*;
use noncon::covariance::{assemble_d, assemble_d_continuous, d_linear, Quadrature, TimeMode, TruncationPolicy};
use noncon::harness::{run_ensemble, ExperimentSpec, Series};
use noncon::markov::{ContinuousMarkovModel, DiscreteMarkovModel, IidModel, ProcessModel};
use noncon::observables::{decompose, Observable};
use noncon::schedule::Schedule;
use noncon::stats;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn indicator_chain(p: &Matrix) -> DiscreteMarkovModel {
    let points = (0..p.len()).map(|a| vec![if a == 0 { 1.0 } else { 0.0 }]).collect();
    DiscreteMarkovModel::new(None, p, points, None).unwrap()
}

#[test]
fn stationary_law_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in 2..=6 {
        let p = random_chain(&mut rng, s);
        let m = indicator_chain(&p);
        let oracle = stationary_by_power(&p);
        for (a, b) in m.stationary().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn generator_stationary_law_matches_elimination() {
    let q = vec![vec![-1.0, 0.6, 0.4], vec![0.5, -1.0, 0.5], vec![0.3, 0.7, -1.0]];
    let m = ContinuousMarkovModel::new(None, &q, vec![vec![0.0], vec![1.0], vec![2.0]], None).unwrap();
    for (a, b) in m.stationary().iter().zip(stationary_of_generator(&q)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn kernel_matches_taylor_exponential() {
    let q = vec![vec![-2.0, 1.5, 0.5], vec![0.2, -0.3, 0.1], vec![1.0, 1.0, -2.0]];
    let m = ContinuousMarkovModel::new(None, &q, vec![vec![0.0], vec![1.0], vec![2.0]], None).unwrap();
    for t in [0.01, 0.7, 3.0, 25.0] {
        let k = m.kernel(t);
        let oracle = expm_taylor(&q, t);
        for a in 0..3 {
            for b in 0..3 {
                assert!((k[(a, b)] - oracle[a][b]).abs() < 1e-10, "t = {t}");
            }
        }
    }
}

#[test]
fn classical_d_matches_fundamental_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for s in 2..=5 {
        let p = random_chain(&mut rng, s);
        let m = indicator_chain(&p);
        let d = decompose(&Observable::product(1).unwrap(), m.observable(), m.stationary()).unwrap();
        let e = d_linear(&m, &d, 1, 1, &TruncationPolicy::default()).unwrap();
        let f: Vec<f64> = (0..s).map(|a| if a == 0 { 1.0 } else { 0.0 }).collect();
        let oracle = fundamental_variance(&p, &f);
        assert!((e.value - oracle).abs() <= e.error_bound + 1e-12, "{} vs {oracle}", e.value);
        assert!(e.error_bound <= 1e-8);
    }
}

#[test]
fn continuous_d_matches_generator_solve() {
    let q = vec![vec![-1.0, 0.6, 0.4], vec![0.5, -1.0, 0.5], vec![0.3, 0.7, -1.0]];
    let f = [-1.0, 0.5, 2.0];
    let m = ContinuousMarkovModel::new(None, &q, f.iter().map(|&x| vec![x]).collect(), None).unwrap();
    let d = decompose(&Observable::product(1).unwrap(), m.observable(), m.stationary()).unwrap();
    let r = assemble_d_continuous(&m, &d, &Schedule::linear(1).unwrap(), &Quadrature::default()).unwrap();
    let oracle = generator_variance(&q, &f);
    assert!((r.entry(1, 1) - oracle).abs() <= r.error_bound(1, 1) + 1e-9, "{} vs {oracle}", r.entry(1, 1));
}

#[test]
fn iid_product_closed_form() {
    // F = x y with EX = m, EX^2 = v: F_1 = m (x - m), F_2 = x (y - m).
    // xi_2 has N t / 2 terms, so D_22 = E F_2^2 / 2 = v (v - m^2) / 2; the
    // only correlated pairs across components are (n, 2n), giving
    // D_21 = m^2 (v - m^2) / 2.
    let iid = IidModel::new(vec![vec![-1.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
    let chain = iid.to_chain();
    let (m, v) = (0.5, 2.5);
    let d = decompose(&Observable::product(2).unwrap(), chain.observable(), chain.stationary()).unwrap();
    let r = assemble_d(&chain, &d, &Schedule::linear(2).unwrap(), &TruncationPolicy::default()).unwrap();
    assert!((r.entry(1, 1) - m * m * (v - m * m)).abs() < 1e-12);
    assert!((r.entry(2, 2) - v * (v - m * m) / 2.0).abs() < 1e-12);
    assert!((r.entry(2, 1) - m * m * (v - m * m) / 2.0).abs() < 1e-12);
}

#[test]
fn small_n_second_moment_matches_enumeration() {
    let p = vec![vec![0.8, 0.2], vec![0.4, 0.6]];
    let m = DiscreteMarkovModel::new(None, &p, vec![vec![1.0], vec![-0.5]], None).unwrap();
    let d = decompose(&Observable::product(2).unwrap(), m.observable(), m.stationary()).unwrap();
    let values = [1.0, -0.5];
    let f = |x: &[usize]| values[x[0]] * values[x[1]];
    let q = |i: usize, n: usize| i * n;
    let schedule = Schedule::linear(2).unwrap();
    let model = ProcessModel::Discrete(m);
    for big_n in [3usize, 5] {
        let exact = enumerate_second_moment(&p, &f, d.fbar(), &q, 2, big_n, 1.0);
        let spec = ExperimentSpec::new(TimeMode::Discrete, vec![big_n as u64], vec![1.0], 20_000, 17);
        let e = run_ensemble(&model, &d, &schedule, &spec, big_n as u64).unwrap();
        let x: Vec<f64> = e.values(Series::Total, 0).unwrap().iter().map(|v| v * v).collect();
        let (mean, se) = (stats::mean(&x), stats::mean_se(&x));
        assert!((mean - exact).abs() < 4.0 * se, "N = {big_n}: {mean} ± {se} vs {exact}");
    }
}
