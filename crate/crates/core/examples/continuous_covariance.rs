//! Continuous time: D for the linear components by quadrature; fast
//! components vanish.

use noncon::covariance::{assemble_d_continuous, Quadrature};
use noncon::markov::ContinuousMarkovModel;
use noncon::observables::{decompose, Observable};
use noncon::schedule::{Schedule, TailFunction};

fn main() -> noncon::Result<()> {
    let model = ContinuousMarkovModel::new(
        None,
        &[vec![-1.0, 0.6, 0.4], vec![0.5, -1.0, 0.5], vec![0.3, 0.7, -1.0]],
        vec![vec![-1.0], vec![0.5], vec![2.0]],
        None,
    )?;
    let schedule = Schedule::new(2, vec![TailFunction::Polynomial(vec![0, 0, 1])], None)?;
    let d = decompose(&Observable::product(3)?, model.observable(), model.stationary())?;
    let report = assemble_d_continuous(&model, &d, &schedule, &Quadrature::default())?;
    println!("gap = {:.4}", model.spectral_gap());
    for i in 1..=report.ell {
        let row: Vec<String> = (1..=report.ell).map(|j| format!("{:>10.6}", report.entry(i, j))).collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
