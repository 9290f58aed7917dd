use noncon::covariance::{a_series, assemble_d, TruncationPolicy};
use noncon::markov::{ContinuousMarkovModel, DiscreteMarkovModel};
use noncon::observables::{decompose_table, Observable};
use noncon::schedule::Schedule;
use proptest::prelude::*;

fn law(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn chain_from(raw: Vec<f64>, s: usize) -> Vec<Vec<f64>> {
    raw.chunks(s).map(|r| law(r.to_vec())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_reconstructs_and_is_conditionally_centred(
        ell in 1usize..=3,
        mu in prop::collection::vec(0.05f64..1.0, 3),
        values in prop::collection::vec(-5.0f64..5.0, 27),
    ) {
        let mu = law(mu);
        let full = values[..3usize.pow(ell as u32)].to_vec();
        let d = decompose_table(full, &mu, ell);
        prop_assert!(d.reconstruction_defect() < 1e-10);
        prop_assert!(d.mean_zero_defect() < 1e-10);
    }

    #[test]
    fn decomposition_is_linear(
        mu in prop::collection::vec(0.05f64..1.0, 3),
        f in prop::collection::vec(-5.0f64..5.0, 9),
        g in prop::collection::vec(-5.0f64..5.0, 9),
        c in -3.0f64..3.0,
    ) {
        let mu = law(mu);
        let h: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + c * b).collect();
        let (df, dg, dh) = (decompose_table(f, &mu, 2), decompose_table(g, &mu, 2), decompose_table(h, &mu, 2));
        for i in 1..=2 {
            for ((a, b), x) in df.component(i).iter().zip(dg.component(i)).zip(dh.component(i)) {
                prop_assert!((a + c * b - x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pair_laws_have_stationary_marginals(raw in prop::collection::vec(0.05f64..1.0, 9), lag in -40i64..40) {
        let p = chain_from(raw, 3);
        let m = DiscreteMarkovModel::new(None, &p, vec![vec![0.0]; 3], None).unwrap();
        let pair = m.pair_distribution(lag);
        prop_assert!(pair.check_marginals(m.stationary(), 1e-12));
        let back = m.pair_distribution(-lag).transpose();
        prop_assert!((pair.joint - back.joint).abs().max() < 1e-13);
    }

    #[test]
    fn chapman_kolmogorov(s in 0.0f64..3.0, t in 0.0f64..3.0, rates in prop::collection::vec(0.1f64..2.0, 6)) {
        let q = vec![
            vec![-(rates[0] + rates[1]), rates[0], rates[1]],
            vec![rates[2], -(rates[2] + rates[3]), rates[3]],
            vec![rates[4], rates[5], -(rates[4] + rates[5])],
        ];
        let m = ContinuousMarkovModel::new(None, &q, vec![vec![0.0]; 3], None).unwrap();
        let lhs = m.kernel(s + t);
        let rhs = m.kernel(s) * m.kernel(t);
        prop_assert!((lhs - rhs).abs().max() < 1e-12);
    }

    #[test]
    fn a_terms_respect_their_bounds(raw in prop::collection::vec(0.05f64..1.0, 9), points in prop::collection::vec(-2.0f64..2.0, 3)) {
        let p = chain_from(raw, 3);
        let m = DiscreteMarkovModel::new(None, &p, points.iter().map(|&x| vec![x]).collect(), None).unwrap();
        let d = noncon::observables::decompose(&Observable::product(3).unwrap(), m.observable(), m.stationary()).unwrap();
        for (i, j) in [(1, 1), (2, 1), (3, 2), (3, 3)] {
            for term in a_series(&m, &d, i, j, 12).unwrap() {
                prop_assert!(term.value.abs() <= term.bound * (1.0 + 1e-9) + 1e-14, "({i},{j}) u={} {} > {}", term.u, term.value, term.bound);
            }
        }
    }

    #[test]
    fn covariance_matrix_is_symmetric_psd(raw in prop::collection::vec(0.05f64..1.0, 9), points in prop::collection::vec(-2.0f64..2.0, 3)) {
        let p = chain_from(raw, 3);
        let m = DiscreteMarkovModel::new(None, &p, points.iter().map(|&x| vec![x]).collect(), None).unwrap();
        let d = noncon::observables::decompose(&Observable::product(2).unwrap(), m.observable(), m.stationary()).unwrap();
        let r = assemble_d(&m, &d, &Schedule::linear(2).unwrap(), &TruncationPolicy::default()).unwrap();
        prop_assert!(r.asymmetry() < 1e-12);
        prop_assert!(r.min_linear_eigenvalue() > -1e-9);
    }
}
