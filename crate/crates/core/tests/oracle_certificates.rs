use complabel::oracle::{certify_atom, pushforward_check, DiscreteProblem};
use complabel::rng::derive_seed;
use complabel::DiscreteProblem64;

#[test]
fn random_problems_recover_posterior_on_grid() {
    for p in 0..20u64 {
        let c = if p % 2 == 0 { 3 } else { 4 };
        let problem = DiscreteProblem64::random_invertible(c, 2, derive_seed(17, p))
            .unwrap()
            .snapped_to_lattice(50);
        for atom in 0..2 {
            let cert = certify_atom(&problem, atom, 50).unwrap();
            assert!(cert.linf_to_posterior <= 1e-12, "problem {p}: {cert:?}");
            assert_ne!(cert.argmax_agrees, Some(false), "problem {p}: {cert:?}");
            assert!(cert.risk_at_posterior <= cert.risk_at_minimum + 1e-12);
        }
    }
}

#[test]
fn off_lattice_posteriors_stay_close() {
    // no lattice point beats the true posterior, and the grid minimizer stays
    // within a few cells of it
    for p in 0..20u64 {
        let problem = DiscreteProblem64::random_invertible(3, 1, derive_seed(29, p)).unwrap();
        let cert = certify_atom(&problem, 0, 50).unwrap();
        assert!(cert.risk_at_posterior <= cert.risk_at_minimum + 1e-12);
        assert!(cert.linf_to_posterior <= 3.0 / 50.0, "problem {p}: {cert:?}");
    }
}

#[test]
fn finer_grid_is_no_worse() {
    for p in 0..5u64 {
        let problem = DiscreteProblem::<f64>::random_invertible(3, 1, derive_seed(23, p)).unwrap();
        let coarse = certify_atom(&problem, 0, 50).unwrap();
        let fine = certify_atom(&problem, 0, 100).unwrap();
        assert!(fine.linf_to_posterior <= coarse.linf_to_posterior + 1e-12);
    }
}

#[test]
fn monte_carlo_pushforward_matches_analytic() {
    let problem = DiscreteProblem64::random_invertible(4, 3, 5).unwrap();
    assert!(pushforward_check(&problem, 200_000, 9) <= 0.005);
}
