//! Stationary law, spectral gap and exact mixing coefficients of a chain.

use noncon::markov::{mixing_profile, DiscreteMarkovModel};

fn main() -> noncon::Result<()> {
    let chain = DiscreteMarkovModel::new(
        None,
        &[vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]],
        vec![vec![-1.0], vec![0.5], vec![2.0]],
        None,
    )?;
    println!("pi = {:?}", chain.stationary());
    println!("spectral gap = {:.4}", chain.spectral_gap());

    let profile = mixing_profile(&chain, 10);
    println!("lag        psi        phi      alpha        rho");
    for n in 0..=profile.horizon {
        println!(
            "{n:>3} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e}",
            profile.psi[n], profile.phi[n], profile.alpha[n], profile.rho[n]
        );
    }
    Ok(())
}
