//! Counts of n <= Nt with X(n) in A_1 and X(2n) in A_2, centred and scaled.

use noncon::harness::ap_count_test;
use noncon::markov::DiscreteMarkovModel;

fn main() -> noncon::Result<()> {
    let chain = DiscreteMarkovModel::new(None, &[vec![0.9, 0.1], vec![0.3, 0.7]], vec![vec![0.0], vec![1.0]], None)?;
    let (suite, ensembles) = ap_count_test(&chain, &[vec![0], vec![0]], &[2048], &[0.5, 1.0], 1000, 3)?;
    for s in &ensembles[0].summary.series {
        println!("{}: mean {:.4}, variance {:.4} at t = 1", s.series, s.mean[1], s.variance[1]);
    }
    for t in &suite.tests {
        println!("{:?} {} ({:.3e} vs {:.3e})", t.status, t.name, t.statistic, t.threshold);
    }
    Ok(())
}
