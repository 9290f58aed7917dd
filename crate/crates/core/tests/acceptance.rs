//! Acceptance run: one line per criterion, nonzero exit if any fails.
//! `cargo test --release --test acceptance`

mod common;

use std::time::Instant;

use noncon::covariance::{
    assemble_d, assemble_d_continuous, d_fast_diagonal, d_linear, CovarianceReport, Quadrature, TimeMode,
    TruncationPolicy,
};
use noncon::harness::{
    covariance_test, ct_vanishing_test, gaussianity_test, increment_tests, run_ensemble, CovarianceRequest, Ensemble,
    ExperimentSpec, Series, TestSuiteResult,
};
use noncon::markov::{
    alpha_coefficient_exact, mixing_profile, phi_coefficient, ContinuousMarkovModel, DiscreteMarkovModel, IidModel,
    ProcessModel,
};
use noncon::martingale::ConditionalEngine;
use noncon::observables::{decompose, decompose_table, Decomposition, Observable};
use noncon::schedule::{Schedule, TailFunction};
use noncon::stats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn verdict(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sticky_chain() -> (Vec<Vec<f64>>, DiscreteMarkovModel, Decomposition) {
    let p = vec![vec![0.9, 0.1], vec![0.3, 0.7]];
    let m = DiscreteMarkovModel::new(None, &p, vec![vec![1.0], vec![0.0]], None).unwrap();
    let d = decompose(&Observable::product(1).unwrap(), m.observable(), m.stationary()).unwrap();
    (p, m, d)
}

fn three_state(ell: usize) -> (DiscreteMarkovModel, Decomposition) {
    let m = DiscreteMarkovModel::new(
        None,
        &[vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]],
        vec![vec![-1.0], vec![0.5], vec![2.0]],
        None,
    )
    .unwrap();
    let d = decompose(&Observable::product(ell).unwrap(), m.observable(), m.stationary()).unwrap();
    (m, d)
}

fn variance_se(x: &[f64]) -> f64 {
    let m2 = stats::central_moment(x, 2);
    ((stats::central_moment(x, 4) - m2 * m2) / x.len() as f64).sqrt()
}

fn summarize(suite: &TestSuiteResult) -> String {
    suite
        .tests
        .iter()
        .map(|t| match (t.estimate, t.target, t.std_error) {
            (Some(e), Some(g), Some(se)) => format!("{}: {e:.4} vs {g:.4} (SE {se:.4})", t.name),
            _ => format!("{}: {:.4} / {:.4}", t.name, t.statistic, t.threshold),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mu: Vec<f64> = raw.iter().map(|x| x / total).collect();
        for ell in 1..=3 {
            let table: Vec<f64> = (0..3usize.pow(ell)).map(|_| rng.random_range(-10.0..10.0)).collect();
            let d = decompose_table(table, &mu, ell as usize);
            worst = worst.max(d.reconstruction_defect()).max(d.mean_zero_defect());
        }
    }
    verdict(worst <= 1e-10, format!("largest defect {worst:.1e}"))
}

fn criterion_2(ensemble: &Ensemble) -> Outcome {
    let (p, m, d) = sticky_chain();
    let e = d_linear(&m, &d, 1, 1, &TruncationPolicy::default()).map_err(|e| e.to_string())?;
    let closed = common::fundamental_variance(&p, &[1.0, 0.0]);
    let x = ensemble.values(Series::Component(1), 1).unwrap();
    let (var, se) = (stats::variance(&x), variance_se(&x));
    let pass = (e.value - closed).abs() <= e.error_bound.max(1e-14) && e.error_bound <= 1e-8 && (var - e.value).abs() <= 3.0 * se;
    verdict(
        pass,
        format!("D11 = {:.10} (closed form {closed:.10}, bound {:.1e}); Var = {var:.4} ± {se:.4}", e.value, e.error_bound),
    )
}

fn criterion_3(ensemble: &Ensemble, report: &CovarianceReport) -> Outcome {
    let mut requests = Vec::new();
    for (i, j) in [(1, 1), (2, 2), (2, 1)] {
        for (s, t) in [(0.5, 1.0), (1.0, 1.0)] {
            requests.push(CovarianceRequest { i, j, s, t });
        }
    }
    let suite = covariance_test(ensemble, report, &requests, 200).map_err(|e| e.to_string())?;
    verdict(suite.pass(), summarize(&suite))
}

fn criterion_4(ensemble: &Ensemble, report: &CovarianceReport, d: &Decomposition) -> Outcome {
    let requests: Vec<CovarianceRequest> =
        [(3, 3), (3, 1), (3, 2)].iter().map(|&(i, j)| CovarianceRequest { i, j, s: 1.0, t: 1.0 }).collect();
    let suite = covariance_test(ensemble, report, &requests, 200).map_err(|e| e.to_string())?;
    let same = (report.entry(3, 3) - d_fast_diagonal(d, 3)).abs() < 1e-15;
    verdict(suite.pass() && same, summarize(&suite))
}

fn criterion_5() -> Outcome {
    let run = |atoms: Vec<Vec<f64>>, weights: Vec<f64>| -> Result<(TestSuiteResult, CovarianceReport), String> {
        let chain = IidModel::new(atoms, weights).map_err(|e| e.to_string())?.to_chain();
        let schedule = Schedule::linear(2).unwrap();
        let d = decompose(&Observable::square_product_minus_one(2).unwrap(), chain.observable(), chain.stationary()).unwrap();
        let report = assemble_d(&chain, &d, &schedule, &TruncationPolicy::default()).map_err(|e| e.to_string())?;
        let spec = ExperimentSpec::new(TimeMode::Discrete, vec![8192], vec![0.5, 1.0], 10_000, 505);
        let e = run_ensemble(&ProcessModel::Discrete(chain), &d, &schedule, &spec, 8192).map_err(|e| e.to_string())?;
        Ok((increment_tests(&e, Series::Total, Some(&report)).map_err(|e| e.to_string())?, report))
    };
    let r = 2f64.sqrt();
    let (suite, report) = run(vec![vec![-r], vec![0.0], vec![r]], vec![0.25, 0.5, 0.25])?;
    let cross = suite.tests.iter().find(|t| t.name.contains("cross_moment")).unwrap();
    let (est, se, target) = (cross.estimate.unwrap(), cross.std_error.unwrap(), cross.target.unwrap());
    let doubled = 2.0 * target;
    let nonzero = est.abs() >= 5.0 * se;
    let matches = (est - report.entry(2, 1) / 2.0).abs() <= 3.0 * se;
    let (control, _) = run(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5])?;
    let c = control.tests.iter().find(|t| t.name.contains("cross_moment")).unwrap();
    let control_zero = c.estimate.unwrap().abs() <= 3.0 * c.std_error.unwrap();
    verdict(
        nonzero && matches && control_zero,
        format!(
            "E[xi(1/2)(xi(1)-xi(1/2))] = {est:.4} ± {se:.4} ({:.1} SE from 0), D21/2 = {:.4}; doubled-entry value {doubled:.4} is {:.1} SE away; control {:.2e}",
            est.abs() / se,
            report.entry(2, 1) / 2.0,
            (est - doubled).abs() / se,
            c.estimate.unwrap()
        ),
    )
}

fn criterion_6(c2: &Ensemble, c3: &Ensemble, c4: &Ensemble) -> Outcome {
    let mut suite = TestSuiteResult::default();
    let cases = [(c2, Series::Component(1)), (c3, Series::Component(1)), (c3, Series::Component(2)), (c4, Series::Component(3))];
    for (e, s) in cases {
        suite.extend(gaussianity_test(e, s, 1.0).map_err(|e| e.to_string())?);
    }
    let failed: Vec<String> = suite.failures().map(|t| format!("{} = {:.4} > {:.4}", t.name, t.statistic, t.threshold)).collect();
    let detail = if failed.is_empty() { format!("{} checks", suite.tests.len()) } else { failed.join("; ") };
    verdict(suite.pass(), detail)
}

fn criterion_7() -> Outcome {
    let (_, m, d) = sticky_chain();
    let schedule = Schedule::linear(1).unwrap();
    let engine = ConditionalEngine::new(&m, &d, &schedule, TruncationPolicy::default()).map_err(|e| e.to_string())?;
    let mut gaps = Vec::new();
    let mut last = None;
    for n in [128, 256, 512] {
        let r = engine.martingale_check(1, n, 1.0).map_err(|e| e.to_string())?;
        gaps.push(r.gap);
        last = Some(r);
    }
    let r = last.unwrap();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    verdict(
        r.max_conditional_mean <= 10.0 * r.truncation_bound && r.truncation_bound <= 1e-8 && decreasing,
        format!("max |E[W|past]| = {:.1e}, bound {:.1e}, gaps {gaps:?}", r.max_conditional_mean, r.truncation_bound),
    )
}

fn criterion_8() -> Outcome {
    let model = ContinuousMarkovModel::new(
        None,
        &[vec![-1.0, 0.6, 0.4], vec![0.5, -1.0, 0.5], vec![0.3, 0.7, -1.0]],
        vec![vec![-1.0], vec![0.5], vec![2.0]],
        None,
    )
    .unwrap();
    let gap = model.spectral_gap();
    let schedule = Schedule::new(2, vec![TailFunction::Polynomial(vec![0, 0, 1])], None).unwrap();
    let d = decompose(&Observable::product(3).unwrap(), model.observable(), model.stationary()).unwrap();
    let mut report = assemble_d_continuous(&model, &d, &schedule, &Quadrature::default()).map_err(|e| e.to_string())?;
    let skeleton = ProcessModel::Discrete(model.skeleton().unwrap());
    let process = ProcessModel::Continuous(model);
    report.fingerprints = None;

    // (a) linear block at N = 4096
    let mut spec = ExperimentSpec::new(TimeMode::Continuous, vec![4096], vec![0.5, 1.0], 2000, 808);
    spec.components = Some(vec![1, 2]);
    let e = run_ensemble(&process, &d, &schedule, &spec, 4096).map_err(|e| e.to_string())?;
    let requests: Vec<CovarianceRequest> = [(1, 1), (2, 2), (2, 1)]
        .iter()
        .flat_map(|&(i, j)| [(0.5, 1.0), (1.0, 1.0)].map(|(s, t)| CovarianceRequest { i, j, s, t }))
        .collect();
    let a = covariance_test(&e, &report, &requests, 200).map_err(|e| e.to_string())?;

    // (b) the fast component vanishes
    let mut spec = ExperimentSpec::new(TimeMode::Continuous, vec![64, 256, 1024], vec![1.0], 200, 809);
    spec.components = Some(vec![3]);
    let mut ensembles = Vec::new();
    for &n in &spec.n_values {
        ensembles.push(run_ensemble(&process, &d, &schedule, &spec, n).map_err(|e| e.to_string())?);
    }
    spec.mode = TimeMode::Discrete;
    let discrete = run_ensemble(&skeleton, &d, &schedule, &spec, 64).map_err(|e| e.to_string())?;
    let reference = stats::variance(&discrete.values(Series::Component(3), 0).unwrap());
    let b = ct_vanishing_test(&ensembles, 3, reference, 0.05).map_err(|e| e.to_string())?;
    verdict(
        gap >= 0.5 && a.pass() && b.pass(),
        format!("gap {gap:.3}; (a) {}; (b) {} / {}", summarize(&a), b.tests[0].detail, b.tests[1].detail),
    )
}

fn criterion_9() -> Outcome {
    let p = vec![vec![0.8, 0.2], vec![0.4, 0.6]];
    let values = [1.0, -0.5];
    let m = DiscreteMarkovModel::new(None, &p, values.iter().map(|&x| vec![x]).collect(), None).unwrap();
    let d = decompose(&Observable::product(2).unwrap(), m.observable(), m.stationary()).unwrap();
    let schedule = Schedule::linear(2).unwrap();
    let model = ProcessModel::Discrete(m);
    let f = |x: &[usize]| values[x[0]] * values[x[1]];
    let q = |i: usize, n: usize| i * n;
    let mut pass = true;
    let mut parts = Vec::new();
    for big_n in 2..=6usize {
        let exact = common::enumerate_second_moment(&p, &f, d.fbar(), &q, 2, big_n, 1.0);
        let spec = ExperimentSpec::new(TimeMode::Discrete, vec![big_n as u64], vec![1.0], 100_000, 909);
        let e = run_ensemble(&model, &d, &schedule, &spec, big_n as u64).map_err(|e| e.to_string())?;
        let sq: Vec<f64> = e.values(Series::Total, 0).unwrap().iter().map(|v| v * v).collect();
        let (mean, se) = (stats::mean(&sq), stats::mean_se(&sq));
        pass &= (mean - exact).abs() <= 3.0 * se;
        parts.push(format!("N={big_n}: {mean:.4}±{se:.4} vs {exact:.4}"));
    }
    verdict(pass, parts.join(", "))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut violations = Vec::new();
    for c in 0..20 {
        let s = 2 + c % 5;
        let p = common::random_chain(&mut rng, s);
        let m = DiscreteMarkovModel::new(None, &p, vec![vec![0.0]; s], None).unwrap();
        let prof = mixing_profile(&m, 50);
        for n in 0..=50 {
            let (psi, phi, alpha, rho) = (prof.psi[n], prof.phi[n], prof.alpha[n], prof.rho[n]);
            let tol = 1e-12;
            if alpha > 0.5 * phi + tol || rho > 2.0 * phi.sqrt() + tol || 2.0 * phi > psi + tol || psi.min(phi).min(alpha).min(rho) < 0.0 {
                violations.push(format!("chain {c} lag {n}"));
            }
            if n >= 1 {
                let up = |v: &[f64]| v[n] > v[n - 1] + 1e-12;
                if up(&prof.psi) || up(&prof.phi) || up(&prof.alpha) || up(&prof.rho) {
                    violations.push(format!("chain {c} increases at lag {n}"));
                }
            }
        }
        // exact alpha against its definition at lag 1
        let pn = m.transition_power(1);
        let exact = alpha_coefficient_exact(&pn, m.stationary()).unwrap();
        if exact > 0.5 * phi_coefficient(&pn, m.stationary()) + 1e-12 {
            violations.push(format!("chain {c} alpha"));
        }
    }
    verdict(violations.is_empty(), if violations.is_empty() { "20 chains, lags 0..=50".into() } else { violations.join(", ") })
}

fn main() {
    let mut failures = 0;
    let mut report = |label: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {label}: PASS ({secs:.1} s) {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {label}: FAIL ({secs:.1} s) {detail}");
            }
        }
    };

    let t = Instant::now();
    report("1", t, criterion_1());

    let t = Instant::now();
    let (_, m, d) = sticky_chain();
    let spec = ExperimentSpec::new(TimeMode::Discrete, vec![4096], vec![0.5, 1.0], 2000, 202);
    let c2 = run_ensemble(&ProcessModel::Discrete(m), &d, &Schedule::linear(1).unwrap(), &spec, 4096).unwrap();
    report("2", t, criterion_2(&c2));

    let t = Instant::now();
    let (m, d) = three_state(2);
    let schedule = Schedule::linear(2).unwrap();
    let r3 = assemble_d(&m, &d, &schedule, &TruncationPolicy::default()).unwrap();
    let spec = ExperimentSpec::new(TimeMode::Discrete, vec![8192], vec![0.5, 1.0], 2000, 303);
    let c3 = run_ensemble(&ProcessModel::Discrete(m), &d, &schedule, &spec, 8192).unwrap();
    report("3", t, criterion_3(&c3, &r3));

    let t = Instant::now();
    let (m, d4) = three_state(3);
    let schedule = Schedule::new(2, vec![TailFunction::Polynomial(vec![0, 0, 1])], None).unwrap();
    let r4 = assemble_d(&m, &d4, &schedule, &TruncationPolicy::default()).unwrap();
    let spec = ExperimentSpec::new(TimeMode::Discrete, vec![4096], vec![0.5, 1.0], 2000, 404);
    let c4 = run_ensemble(&ProcessModel::Discrete(m), &d4, &schedule, &spec, 4096).unwrap();
    report("4", t, criterion_4(&c4, &r4, &d4));

    let t = Instant::now();
    report("5", t, criterion_5());
    let t = Instant::now();
    report("6", t, criterion_6(&c2, &c3, &c4));
    let t = Instant::now();
    report("7", t, criterion_7());
    let t = Instant::now();
    report("8", t, criterion_8());
    let t = Instant::now();
    report("9", t, criterion_9());
    let t = Instant::now();
    report("10", t, criterion_10());

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
