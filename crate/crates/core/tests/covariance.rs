use dyson_core::covariance::{CovarianceMap, CovariancePath, LinearMap, MatrixMap, PositivityClass};
use dyson_core::random::{ginibre, gue, kraus_map, stream_rng};
use dyson_core::{ComplexMatrix, HermitianMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn apply_examples() {
    let mut rng = stream_rng(1, 0);
    let b = ginibre(3, &mut rng);
    let id = CovarianceMap::sandwich(3, vec![HermitianMatrix::identity(3)]).unwrap();
    assert!(id.apply(&b).unwrap().dist(&b) < 1e-15);
    let choi = CovarianceMap::choi_example();
    let e = ComplexMatrix::diag(&[c(1.0), c(0.0), c(0.0)]);
    assert!(choi.apply(&e).unwrap().dist(&ComplexMatrix::diag(&[c(1.0), c(2.0), c(2.0)])) < 1e-14);
    assert_eq!(CovarianceMap::zero(3).apply(&b).unwrap(), ComplexMatrix::zeros(3));
    assert!(id.apply(&ComplexMatrix::zeros(2)).is_err());
}

#[test]
fn choi_example_matches_its_formula_on_random_inputs() {
    let mut rng = stream_rng(2, 0);
    let eta = CovarianceMap::choi_example();
    for _ in 0..20 {
        let b = ginibre(3, &mut rng);
        let want = &ComplexMatrix::scalar(3, b.trace() * 2.0) - &b;
        assert!(eta.apply(&b).unwrap().dist(&want) < 1e-13);
    }
}

#[test]
fn amplify_examples() {
    let mut rng = stream_rng(3, 0);
    let eta = kraus_map(2, 2, 1.0, &mut rng);
    let b = ginibre(2, &mut rng);
    let same = eta.amplify(1).unwrap();
    assert!(same.apply(&b).unwrap().dist(&eta.apply(&b).unwrap()) < 1e-15);

    let cmap = CovarianceMap::sandwich(1, vec![HermitianMatrix::from_real_diag(&[1.7])]).unwrap();
    let amp = cmap.amplify(2).unwrap();
    let x = ginibre(2, &mut rng);
    assert!(amp.apply(&x).unwrap().dist(&x.scale_real(1.7 * 1.7)) < 1e-14);

    let big = ComplexMatrix::block_diag(&[b.clone(), b.clone()]);
    let out = eta.amplify(2).unwrap().apply(&big).unwrap();
    let eb = eta.apply(&b).unwrap();
    assert_eq!(out.block(2, 0, 1), ComplexMatrix::zeros(2));
    assert!(out.block(2, 0, 0).dist(&eb) < 1e-15 && out.block(2, 1, 1).dist(&eb) < 1e-15);
}

#[test]
fn amplification_acts_blockwise_for_every_representation() {
    let mut rng = stream_rng(4, 0);
    let maps = [
        kraus_map(2, 3, 1.0, &mut rng),
        CovarianceMap::sandwich(2, vec![gue(2, &mut rng), gue(2, &mut rng)]).unwrap(),
        CovarianceMap::choi(2, kraus_map(2, 2, 1.0, &mut rng).choi_matrix(), PositivityClass::CompletelyPositive).unwrap(),
    ];
    for eta in &maps {
        for k in [2, 3] {
            let x = ginibre(2 * k, &mut rng);
            let out = eta.eval_amplified(&x, k);
            for p in 0..k {
                for q in 0..k {
                    assert!(out.block(2, p, q).dist(&eta.eval(&x.block(2, p, q))) < 1e-14);
                }
            }
        }
    }
}

#[test]
fn operator_norm_examples() {
    assert_eq!(CovarianceMap::zero(2).operator_norm(), 0.0);
    assert!((CovarianceMap::choi_example().operator_norm() - 5.0).abs() < 1e-13);
    let mut rng = stream_rng(5, 0);
    let ops = vec![gue(3, &mut rng), gue(3, &mut rng)];
    let sum = ops.iter().fold(ComplexMatrix::zeros(3), |acc, s| &acc + &(s.as_matrix() * s.as_matrix()));
    let want = HermitianMatrix::project(&sum).spectral_norm().unwrap();
    let eta = CovarianceMap::sandwich(3, ops).unwrap();
    assert!((eta.operator_norm() - want).abs() < 1e-13);
}

#[test]
fn operator_norm_dominates_random_unit_inputs() {
    let mut rng = stream_rng(6, 0);
    let maps = [kraus_map(3, 2, 1.3, &mut rng), CovarianceMap::choi_example()];
    for eta in &maps {
        let n = eta.operator_norm();
        for _ in 0..200 {
            let u = dyson_core::covariance::random_unitary(eta.dim(), &mut rng);
            assert!(eta.apply(&u).unwrap().op_norm() <= n * (1.0 + 1e-12));
        }
    }
}

#[test]
fn choi_psd_check_examples() {
    assert!(CovarianceMap::identity(3).choi_psd_check().is_psd);
    let choi = CovarianceMap::choi_example().choi_psd_check();
    assert!(!choi.is_psd && choi.min_eigenvalue < -0.5);
    let mut rng = stream_rng(7, 0);
    for _ in 0..10 {
        assert!(kraus_map(3, 2, 1.0, &mut rng).choi_psd_check().is_psd);
    }
    assert!(!CovarianceMap::transpose(2).choi_psd_check().is_psd);
}

#[test]
fn sample_2positivity_examples() {
    assert!(CovarianceMap::identity(2).sample_2positivity(100, 1).unwrap().passed);
    let choi = CovarianceMap::choi_example().sample_2positivity(1000, 2).unwrap();
    assert!(choi.passed && choi.trials_run == 1000);
    let t = CovarianceMap::transpose(2).sample_2positivity(1000, 3).unwrap();
    assert!(!t.passed);
    let w = t.counterexample.unwrap();
    let out = HermitianMatrix::project(&CovarianceMap::transpose(2).eval_amplified(&w, 2));
    assert!(out.min_eigenvalue().unwrap() < -1e-9);
    assert!(CovarianceMap::identity(2).sample_2positivity(0, 1).is_err());
}

#[test]
fn choi_convention_is_round_trip_consistent() {
    let mut rng = stream_rng(8, 0);
    let eta = kraus_map(3, 2, 1.0, &mut rng);
    let c = eta.choi_matrix();
    // C[(i,k),(j,l)] = Σ a_ik conj(a_jl) for a rank-one Kraus map.
    let a = ginibre(2, &mut rng);
    let single = CovarianceMap::kraus(2, vec![a.clone()]).unwrap().choi_matrix();
    for i in 0..2 {
        for k in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    let want = a[(i, k)] * a[(j, l)].conj();
                    assert!((single[(i * 2 + k, j * 2 + l)] - want).norm() < 1e-15);
                }
            }
        }
    }
    let back = CovarianceMap::choi(3, c, PositivityClass::CompletelyPositive).unwrap();
    for _ in 0..10 {
        let b = ginibre(3, &mut rng);
        assert!(back.apply(&b).unwrap().dist(&eta.apply(&b).unwrap()) < 1e-12);
    }
}

#[test]
fn convex_combination_and_scaling() {
    let mut rng = stream_rng(9, 0);
    let a = kraus_map(2, 1, 1.0, &mut rng);
    let b = kraus_map(2, 2, 2.0, &mut rng);
    let t = 0.3;
    let mix = CovarianceMap::convex_combination(&a, &b, t).unwrap();
    let x = ginibre(2, &mut rng);
    let want = &a.eval(&x).scale_real(1.0 - t) + &b.eval(&x).scale_real(t);
    assert!(mix.eval(&x).dist(&want) < 1e-13);
    assert_eq!(mix.positivity_class(), PositivityClass::CompletelyPositive);

    let choi = CovarianceMap::choi_example();
    let k3 = kraus_map(3, 1, 1.0, &mut rng);
    let m2 = CovarianceMap::convex_combination(&choi, &k3, 0.5).unwrap();
    assert_eq!(m2.positivity_class(), PositivityClass::TwoPositive);
    assert!(CovarianceMap::convex_combination(&a, &b, 1.5).is_err());
    assert!(CovarianceMap::convex_combination(&a, &k3, 0.5).is_err());

    let s = choi.scaled(0.2).unwrap();
    assert!((s.operator_norm() - 1.0).abs() < 1e-13);
    assert!(choi.scaled(-1.0).is_err());
}

#[test]
fn positive_only_declaration_survives_json() {
    let t = CovarianceMap::transpose(2);
    assert_eq!(t.positivity_class(), PositivityClass::PositiveOnly);
    let text = serde_json::to_string(&t).unwrap();
    let back: CovarianceMap = serde_json::from_str(&text).unwrap();
    assert_eq!(back.positivity_class(), PositivityClass::PositiveOnly);
}

#[test]
fn json_schema_for_each_representation() {
    let sandwich = r#"{"dim":2,"repr":{"kind":"sandwich","matrices":[{"dim":2,"entries":[[[0,0],[1,0]],[[1,0],[0,0]]]}]}}"#;
    let eta: CovarianceMap = serde_json::from_str(sandwich).unwrap();
    assert_eq!(eta.positivity_class(), PositivityClass::CompletelyPositive);
    assert!((eta.operator_norm() - 1.0).abs() < 1e-15);

    let choi = CovarianceMap::choi_example();
    let text = serde_json::to_string(&choi).unwrap();
    assert!(text.contains("\"kind\":\"choi\"") && text.contains("\"positivity_class\":\"TwoPositive\""));
    let back: CovarianceMap = serde_json::from_str(&text).unwrap();
    assert_eq!(back, choi);

    let no_class = r#"{"dim":1,"repr":{"kind":"choi","matrices":[{"dim":1,"entries":[[[1,0]]]}]}}"#;
    assert!(serde_json::from_str::<CovarianceMap>(no_class).is_err());
    let bad_kind = r#"{"dim":1,"repr":{"kind":"bogus","matrices":[]}}"#;
    assert!(serde_json::from_str::<CovarianceMap>(bad_kind).is_err());
    let not_herm = r#"{"dim":2,"repr":{"kind":"sandwich","matrices":[{"dim":2,"entries":[[[0,0],[1,0]],[[0,0],[0,0]]]}]}}"#;
    assert!(serde_json::from_str::<CovarianceMap>(not_herm).is_err());
}

#[test]
fn linear_map_algebra_and_adjoint() {
    let mut rng = stream_rng(10, 0);
    let f = LinearMap::from_fn(2, |b| &ginibre(2, &mut stream_rng(1, 1)) * b);
    let g = kraus_map(2, 2, 1.0, &mut rng).to_linear();
    let x = ginibre(2, &mut rng);
    let y = ginibre(2, &mut rng);
    assert!(f.add(&g).eval(&x).dist(&(&f.eval(&x) + &g.eval(&x))) < 1e-13);
    assert!(f.sub(&g).eval(&x).dist(&(&f.eval(&x) - &g.eval(&x))) < 1e-13);
    assert!(f.scale(2.5).eval(&x).dist(&f.eval(&x).scale_real(2.5)) < 1e-13);
    assert!(f.compose(&g).eval(&x).dist(&f.eval(&g.eval(&x))) < 1e-13);
    // ⟨f(x), y⟩ = ⟨x, f*(y)⟩ for the trace pairing.
    let lhs = (&y.adjoint() * &f.eval(&x)).trace();
    let rhs = (&f.adjoint_apply(&y).adjoint() * &x).trace();
    assert!((lhs - rhs).norm() < 1e-13);
}

#[test]
fn norm_estimate_brackets_the_norm() {
    let mut rng = stream_rng(11, 0);
    let a = kraus_map(3, 2, 1.0, &mut rng);
    let exact = a.to_linear().norm_estimate(4, 1);
    assert!(exact.exact && (exact.lower - 1.0).abs() < 1e-13);
    for _ in 0..10 {
        let b = kraus_map(3, 2, 1.0, &mut rng);
        let d = a.to_linear().sub(&b.to_linear());
        let est = d.norm_estimate(8, 2);
        assert!(est.lower <= est.upper * (1.0 + 1e-12));
        for _ in 0..50 {
            let u = dyson_core::covariance::random_unitary(3, &mut rng);
            assert!(d.eval(&u).op_norm() <= est.upper * (1.0 + 1e-12));
        }
    }
}

#[test]
fn affine_path_is_exact_and_range_checked() {
    let mut rng = stream_rng(12, 0);
    let e0 = kraus_map(2, 1, 1.0, &mut rng);
    let e1 = kraus_map(2, 2, 1.5, &mut rng);
    let path = CovariancePath::affine(e0.clone(), e1.clone()).unwrap();
    assert_eq!(path.interval(), (0.0, 1.0));
    let x = ginibre(2, &mut rng);
    let (et, dot) = path.at(0.25).unwrap();
    let want = &e0.eval(&x).scale_real(0.75) + &e1.eval(&x).scale_real(0.25);
    assert!(et.eval(&x).dist(&want) < 1e-13);
    assert!(dot.eval(&x).dist(&(&e1.eval(&x) - &e0.eval(&x))) < 1e-13);
    assert!(path.at(1.5).is_err());
    assert!(CovariancePath::affine(e0, CovarianceMap::identity(3)).is_err());
    assert!(CovariancePath::callback(1.0, 0.0, |_| unreachable!()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn representations_agree_and_are_linear(seed in any::<u64>(), m in 1usize..4, rank in 1usize..4, alpha in -3.0f64..3.0) {
        let mut rng = stream_rng(seed, 0);
        let eta = kraus_map(m, rank, 1.0, &mut rng);
        let via_choi = CovarianceMap::choi(m, eta.choi_matrix(), PositivityClass::CompletelyPositive).unwrap();
        let b = ginibre(m, &mut rng);
        let d = ginibre(m, &mut rng);
        prop_assert!(via_choi.eval(&b).dist(&eta.eval(&b)) < 1e-12);
        let lhs = eta.eval(&(&b.scale_real(alpha) + &d));
        let rhs = &eta.eval(&b).scale_real(alpha) + &eta.eval(&d);
        prop_assert!(lhs.dist(&rhs) < 1e-12 * (1.0 + alpha.abs()));
    }

    #[test]
    fn positive_maps_preserve_hermiticity(seed in any::<u64>(), m in 1usize..4) {
        let mut rng = stream_rng(seed, 0);
        let b = gue(m, &mut rng);
        let mut maps = vec![kraus_map(m, 2, 1.0, &mut rng)];
        if m == 3 {
            maps.push(CovarianceMap::choi_example());
        }
        for eta in maps {
            let out = eta.eval(b.as_matrix());
            prop_assert!(out.dist(&out.adjoint()) <= 1e-12 * b.spectral_norm().unwrap().max(1e-300));
        }
    }

    #[test]
    fn kraus_maps_pass_both_positivity_tests(seed in any::<u64>(), m in 1usize..4, rank in 1usize..4) {
        let eta = kraus_map(m, rank, 1.0, &mut stream_rng(seed, 0));
        prop_assert!(eta.choi_psd_check().is_psd);
        prop_assert!(eta.sample_2positivity(20, seed).unwrap().passed);
    }
}
