//! In continuous time the component observed at s^2 averages out: its
//! variance falls with N while the discrete analogue does not.

use noncon::covariance::TimeMode;
use noncon::harness::{run_ensemble, ExperimentSpec, Series};
use noncon::markov::{ContinuousMarkovModel, ProcessModel};
use noncon::observables::{decompose, Observable};
use noncon::schedule::{Schedule, TailFunction};
use noncon::stats::variance;

fn main() -> noncon::Result<()> {
    let model = ContinuousMarkovModel::new(
        None,
        &[vec![-1.0, 0.6, 0.4], vec![0.5, -1.0, 0.5], vec![0.3, 0.7, -1.0]],
        vec![vec![-1.0], vec![0.5], vec![2.0]],
        None,
    )?;
    let schedule = Schedule::new(2, vec![TailFunction::Polynomial(vec![0, 0, 1])], None)?;
    let d = decompose(&Observable::product(3)?, model.observable(), model.stationary())?;
    let skeleton = ProcessModel::Discrete(model.skeleton()?);
    let model = ProcessModel::Continuous(model);

    for n in [16u64, 64, 256] {
        let mut spec = ExperimentSpec::new(TimeMode::Continuous, vec![n], vec![1.0], 100, 1);
        spec.components = Some(vec![3]);
        let ct = run_ensemble(&model, &d, &schedule, &spec, n)?;
        spec.mode = TimeMode::Discrete;
        let dt = run_ensemble(&skeleton, &d, &schedule, &spec, n)?;
        println!(
            "N = {n:>3}: Var xi_3 continuous {:.4}, discrete {:.4}",
            variance(&ct.values(Series::Component(3), 0)?),
            variance(&dt.values(Series::Component(3), 0)?)
        );
    }
    Ok(())
}
