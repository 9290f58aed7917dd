//! Exact martingale-difference check of the first component on a chain.

use noncon::covariance::TruncationPolicy;
use noncon::markov::DiscreteMarkovModel;
use noncon::martingale::ConditionalEngine;
use noncon::observables::{decompose, Observable};
use noncon::schedule::Schedule;

fn main() -> noncon::Result<()> {
    let chain = DiscreteMarkovModel::new(None, &[vec![0.9, 0.1], vec![0.3, 0.7]], vec![vec![1.0], vec![0.0]], None)?;
    let schedule = Schedule::linear(1)?;
    let d = decompose(&Observable::product(1)?, chain.observable(), chain.stationary())?;
    let engine = ConditionalEngine::new(&chain, &d, &schedule, TruncationPolicy::default())?;
    for n in [128, 256, 512] {
        let r = engine.martingale_check(1, n, 1.0)?;
        println!(
            "N = {n:>3}: max |E[W | past]| = {:.1e} (bound {:.1e}), |(1/N) sum E W^2 - D| = {:.3e}",
            r.max_conditional_mean, r.truncation_bound, r.gap
        );
    }
    Ok(())
}
