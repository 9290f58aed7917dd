//! Seeded ensemble of the realigned sums and the standard test battery.
//! `NONCON_THREADS` caps the worker count without changing results.

use noncon::covariance::{assemble_d, TimeMode, TruncationPolicy};
use noncon::harness::{run_ensemble, run_tests, ExperimentSpec, TestToggles};
use noncon::markov::{DiscreteMarkovModel, ProcessModel};
use noncon::observables::{decompose, Observable};
use noncon::schedule::Schedule;

fn main() -> noncon::Result<()> {
    let chain = DiscreteMarkovModel::new(
        None,
        &[vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]],
        vec![vec![-1.0], vec![0.5], vec![2.0]],
        None,
    )?;
    let schedule = Schedule::linear(2)?;
    let d = decompose(&Observable::product(2)?, chain.observable(), chain.stationary())?;
    let report = assemble_d(&chain, &d, &schedule, &TruncationPolicy::default())?;

    let spec = ExperimentSpec::new(TimeMode::Discrete, vec![2048], vec![0.5, 1.0], 1000, 42);
    let ensemble = run_ensemble(&ProcessModel::Discrete(chain), &d, &schedule, &spec, 2048)?;
    println!("realignment error {:.1e}", ensemble.realignment_error);
    for c in ensemble.summary.covariances.iter().filter(|c| c.t_index == 1) {
        println!("Cov({}, {}) at t = 1: {:.4} ± {:.4}", c.a, c.b, c.value, c.std_error);
    }
    let suite = run_tests(&ensemble, &report, &TestToggles::default())?;
    for t in &suite.tests {
        println!("{:<14} {}", format!("{:?}", t.status), t.name);
    }
    println!("all judged tests pass: {}", suite.pass());
    Ok(())
}
