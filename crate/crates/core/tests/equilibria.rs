use balflow_core::balance::{classify, symmetric_eigenvalues};
use balflow_core::dissonance::dissonance;
use balflow_core::dynamics::{rhs, ModelKind, State};
use balflow_core::equilibria::{
    build_irreducible, build_reducible, equilibrium_dissonance, irreducible_pq, nst_k1, nst_k2,
    nst_stacked, pq_from_alpha_beta, random_nst, random_orthogonal, residual, BlockInput,
};
use balflow_core::matrix::frobenius_norm;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_spectrum(n: usize, k: usize, z: &nalgebra::DMatrix<f64>) {
    let (p, q) = irreducible_pq(n, k).unwrap();
    let ev = symmetric_eigenvalues(z).unwrap();
    for (i, e) in ev.iter().enumerate() {
        let want = if i < n - k { -q } else { p - q };
        assert!((e - want).abs() < 1e-9, "n {n} k {k}: {ev:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_frames_give_certified_equilibria(seed in any::<u64>(), n in 2usize..=8, kk in 0usize..7) {
        let k = 1 + kk % (n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_nst(n, k, &mut rng).unwrap();
        let z = build_irreducible(n, k, &v).unwrap();
        let m = z.as_matrix();
        prop_assert!(residual(&z) < 1e-9);
        prop_assert!(m.trace().abs() < 1e-10);
        prop_assert!((frobenius_norm(m) - 1.0).abs() < 1e-10);
        prop_assert!((dissonance(m) - equilibrium_dissonance(n, k).unwrap()).abs() < 1e-10);
        check_spectrum(n, k, m);
        let f = rhs(ModelKind::ProjectedPureInfluence, &State::Matrix(m.clone())).unwrap();
        prop_assert!(frobenius_norm(f.matrix()) < 1e-9);
    }

    #[test]
    fn alpha_beta_recovers_eigenvalues(alpha in -2.0f64..2.0, beta in 0.01f64..2.0) {
        let (p, q) = pq_from_alpha_beta(alpha, beta).unwrap();
        // Eigenvalues of p V Vᵀ - q I are p - q and -q; the recovery maps
        // them back to α ± √(α² + β).
        let r = (alpha * alpha + beta).sqrt();
        prop_assert!(((p - q) - (r + alpha)).abs() < 1e-12);
        prop_assert!((-q - (alpha - r)).abs() < 1e-12);
    }
}

#[test]
fn closed_form_frames_for_small_n() {
    for n in 2..=8usize {
        let s: Vec<i8> = (0..n).map(|i| if i % 3 == 1 { -1 } else { 1 }).collect();
        let z = build_irreducible(n, 1, &nst_k1(&s).unwrap()).unwrap();
        check_spectrum(n, 1, z.as_matrix());
        assert!(classify(z.as_matrix(), 1e-7).is_balanced());
        if n > 2 {
            let ang = balflow_core::equilibria::ngon_angles(n);
            let z = build_irreducible(n, 2, &nst_k2(&ang).unwrap()).unwrap();
            check_spectrum(n, 2, z.as_matrix());
            assert!(
                (dissonance(z.as_matrix()) - equilibrium_dissonance(n, 2).unwrap()).abs() < 1e-10
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 1..=4 {
        let v = nst_stacked(
            &random_orthogonal(k, &mut rng),
            &random_orthogonal(k, &mut rng),
        )
        .unwrap();
        let z = build_irreducible(2 * k, k, &v).unwrap();
        check_spectrum(2 * k, k, z.as_matrix());
        assert!(dissonance(z.as_matrix()).abs() < 1e-10);
    }
}

#[test]
fn reducible_ordering_and_zero_weight_case() {
    let b = || BlockInput::Frame(nst_k1(&[1, 1, -1]).unwrap());
    let (_, z) = build_reducible(&[b(), b()], None, None).unwrap();
    let d_red = dissonance(z.as_matrix());
    let d_irr = equilibrium_dissonance(6, 2).unwrap();
    assert!(d_red >= d_irr - 1e-12, "{d_red} < {d_irr}");

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v4 = nst_stacked(
        &random_orthogonal(2, &mut rng),
        &random_orthogonal(2, &mut rng),
    )
    .unwrap();
    let v2 = nst_k1(&[1, -1]).unwrap();
    let (spec, z) = build_reducible(
        &[BlockInput::Frame(v4), BlockInput::Frame(v2)],
        Some(&[0.125, 0.25]),
        None,
    )
    .unwrap();
    assert_eq!(spec.alpha, 0.0);
    assert!(residual(&z) < 1e-9);
}
