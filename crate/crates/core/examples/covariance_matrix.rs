//! Limiting covariance matrix D for a chain with a fast component, and the
//! covariance of the realigned total.

use noncon::covariance::{assemble_d, TruncationPolicy};
use noncon::markov::DiscreteMarkovModel;
use noncon::observables::{decompose, Observable};
use noncon::schedule::{Schedule, TailFunction};

fn main() -> noncon::Result<()> {
    let chain = DiscreteMarkovModel::new(
        None,
        &[vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]],
        vec![vec![-1.0], vec![0.5], vec![2.0]],
        None,
    )?;
    let schedule = Schedule::new(2, vec![TailFunction::Polynomial(vec![0, 0, 1])], None)?;
    let d = decompose(&Observable::product(3)?, chain.observable(), chain.stationary())?;
    let report = assemble_d(&chain, &d, &schedule, &TruncationPolicy::default())?;

    for i in 1..=report.ell {
        let row: Vec<String> = (1..=report.ell).map(|j| format!("{:>10.6}", report.entry(i, j))).collect();
        println!("{}", row.join(" "));
    }
    println!("largest truncation bound {:.1e}", report.error_bounds.iter().flatten().fold(0.0f64, |a, &b| a.max(b)));
    println!("Cov(xi(0.5), xi(1)) = {:.6}", report.xi_covariance(0.5, 1.0));
    Ok(())
}
