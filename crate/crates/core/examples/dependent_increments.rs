//! i.i.d. coordinates with F = x^2 y^2 - 1 at n and 2n: the limit of the
//! total has correlated increments unless X^2 = 1 almost surely.

use noncon::covariance::{assemble_d, TimeMode, TruncationPolicy};
use noncon::harness::{increment_tests, run_ensemble, ExperimentSpec, Series};
use noncon::markov::{IidModel, ProcessModel};
use noncon::observables::{decompose, Observable};
use noncon::schedule::Schedule;

fn run(name: &str, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> noncon::Result<()> {
    let chain = IidModel::new(atoms, weights)?.to_chain();
    let schedule = Schedule::linear(2)?;
    let d = decompose(&Observable::square_product_minus_one(2)?, chain.observable(), chain.stationary())?;
    let report = assemble_d(&chain, &d, &schedule, &TruncationPolicy::default())?;
    let spec = ExperimentSpec::new(TimeMode::Discrete, vec![2048], vec![0.5, 1.0], 4000, 9);
    let e = run_ensemble(&ProcessModel::Discrete(chain), &d, &schedule, &spec, 2048)?;
    let suite = increment_tests(&e, Series::Total, Some(&report))?;
    let t = suite.tests.iter().find(|t| t.name.contains("cross_moment")).unwrap();
    println!(
        "{name}: E[xi(1/2)(xi(1) - xi(1/2))] = {:.4} ± {:.4}, predicted {:.4}",
        t.estimate.unwrap(),
        t.std_error.unwrap(),
        t.target.unwrap()
    );
    Ok(())
}

fn main() -> noncon::Result<()> {
    let r = 2f64.sqrt();
    run("three atoms", vec![vec![-r], vec![0.0], vec![r]], vec![0.25, 0.5, 0.25])?;
    run("rademacher ", vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5])
}
