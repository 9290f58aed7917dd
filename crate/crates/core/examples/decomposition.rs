//! Splits F(x_1, ..., x_l) into the components F_i with
//! E[F_i | x_1, ..., x_{i-1}] = 0 and checks the identities.

use noncon::markov::IidModel;
use noncon::observables::{decompose, Observable};

fn main() -> noncon::Result<()> {
    let r = 2f64.sqrt();
    let iid = IidModel::new(vec![vec![-r], vec![0.0], vec![r]], vec![0.25, 0.5, 0.25])?;
    let chain = iid.to_chain();
    let f = Observable::square_product_minus_one(2)?;
    let d = decompose(&f, chain.observable(), chain.stationary())?;

    println!("F-bar = {}", d.fbar());
    for i in 1..=d.ell() {
        println!("F_{i} = {:?}  (E F_{i}^2 = {})", d.component(i), d.second_moment(i));
    }
    println!("max |sum F_i - (F - F-bar)| = {:.1e}", d.reconstruction_defect());
    println!("max |E[F_i | past]|        = {:.1e}", d.mean_zero_defect());
    Ok(())
}
