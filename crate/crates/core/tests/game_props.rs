use std::sync::Arc;

use nalgebra::DMatrix;
use popdyn_core::{
    check_jacobian_sampled, check_monotone_sampled, check_potential_sampled, congestion_field,
    random_matching_field, FnField, GameSpec, PayoffField, PopdynError, SimplexState, BUILTIN_GAMES,
};
use proptest::prelude::*;

fn builtins() -> Vec<Arc<dyn PayoffField>> {
    BUILTIN_GAMES
        .iter()
        .map(|name| GameSpec::builtin(name).build().unwrap())
        .collect()
}

#[test]
fn builtin_flags_survive_sampling() {
    for g in builtins() {
        let flags = g.flags();
        let mono = check_monotone_sampled(g.as_ref(), 2000, 7);
        if flags.is_monotone {
            assert!(mono.consistent, "{} declared monotone: {}", g.name(), mono.max_violation);
        }
        if flags.is_potential {
            let pot = check_potential_sampled(g.as_ref(), 200, 1e-5, 7).unwrap();
            assert!(pot.passed, "{}: {:?}", g.name(), pot);
        }
        let jac = check_jacobian_sampled(g.as_ref(), 50, 1e-6, 7).unwrap();
        assert!(jac.max_rel_error <= 1e-7, "{}: {}", g.name(), jac.max_rel_error);
    }
}

#[test]
fn coordination_is_not_monotone() {
    let g = GameSpec::builtin("coordination").build().unwrap();
    assert!(!g.flags().is_monotone);
    assert!(!check_monotone_sampled(g.as_ref(), 500, 1).consistent);
}

#[test]
fn missing_capabilities_are_reported() {
    let g = FnField::new("plain", 2, |x: &[f64], out: &mut [f64]| {
        out[0] = -x[0];
        out[1] = -x[1];
    });
    assert!(matches!(check_potential_sampled(&g, 10, 1e-5, 0), Err(PopdynError::MissingPotential(_))));
    assert!(matches!(check_jacobian_sampled(&g, 10, 1e-6, 0), Err(PopdynError::MissingJacobian(_))));
    let rps = GameSpec::builtin("rps").build().unwrap();
    assert!(check_potential_sampled(rps.as_ref(), 10, 1e-5, 0).is_err());
}

#[test]
fn bad_game_specs_are_rejected() {
    assert!(random_matching_field(DMatrix::zeros(2, 3)).is_err());
    assert!(congestion_field(vec![1.0, -1.0]).is_err());
    assert!(GameSpec::builtin("no_such_game").build().is_err());
}

fn symmetric_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..5).prop_flat_map(|n| {
        prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |vals| {
            let m = DMatrix::from_row_slice(n, n, &vals);
            (&m + m.transpose()) * 0.5
        })
    })
}

fn antisymmetric_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..5).prop_flat_map(|n| {
        prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |vals| {
            let m = DMatrix::from_row_slice(n, n, &vals);
            (&m - m.transpose()) * 0.5
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Symmetric random-matching games are potential games with F = ½⟨x, Ax⟩.
    #[test]
    fn symmetric_matrices_are_potential(a in symmetric_matrix()) {
        let g = random_matching_field(a).unwrap();
        prop_assert!(g.flags().is_potential);
        let rep = check_potential_sampled(&g, 50, 1e-5, 3).unwrap();
        prop_assert!(rep.passed, "{:?}", rep);
    }

    // Zero-sum symmetric games have ⟨v(x') - v(x), x' - x⟩ = 0.
    #[test]
    fn antisymmetric_matrices_are_monotone(a in antisymmetric_matrix()) {
        let g = random_matching_field(a).unwrap();
        prop_assert!(g.flags().is_monotone);
        prop_assert!(check_monotone_sampled(&g, 200, 3).max_violation.abs() <= 1e-12);
    }

    #[test]
    fn negative_definite_matrices_are_strictly_monotone(a in symmetric_matrix()) {
        let n = a.nrows();
        let shift = a.amax() * n as f64 + 1.0;
        let m = &a - DMatrix::identity(n, n) * shift;
        let g = random_matching_field(m).unwrap();
        prop_assert!(g.flags().is_strictly_monotone);
        prop_assert!(check_monotone_sampled(&g, 200, 5).max_violation < 0.0);
    }

    #[test]
    fn evaluation_is_deterministic(seed in 0u64..1000) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for g in builtins() {
            let x = SimplexState::sample_uniform(g.n_strategies(), &mut rng);
            let a = g.eval(x.as_slice());
            let b = g.eval(x.as_slice());
            prop_assert_eq!(&a, &b);
            prop_assert!(a.iter().all(|v| v.is_finite()));
        }
    }
}
