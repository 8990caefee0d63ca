use dyson_core::covariance::{CovarianceMap, CovariancePath, MatrixMap};
use dyson_core::dyson::{solve, SolverConfig};
use dyson_core::evolution::{
    burgers_rhs, burgers_sweep, covariance_gap, default_time_step, derivative_comparison_constant,
    equicontinuity_profile, local_comparison, psi, subordinate, subordination_chain_rule_gap,
    subordination_derivative_fd, subordination_jacobian, SubordinationParams, DEFAULT_SIGMA0,
};
use dyson_core::random::{ginibre, half_plane_point, kraus_map, stream_rng, unit_direction};
use dyson_core::{ComplexMatrix, Error, HalfPlanePoint};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn scalar(z: Complex64) -> ComplexMatrix {
    ComplexMatrix::scalar(1, z)
}

fn multiple_of_identity(m: usize, s: f64) -> CovarianceMap {
    CovarianceMap::identity(m).scaled(s).unwrap()
}

/// Semicircle of variance `s`: root of `s·G² − zG + 1 = 0` in the lower half-plane.
fn semicircle_var(z: Complex64, s: f64) -> Complex64 {
    let r = (z * z - 4.0 * s).sqrt();
    let g = (z - r) / (2.0 * s);
    if g.im < 0.0 {
        g
    } else {
        (z + r) / (2.0 * s)
    }
}

#[test]
fn psi_examples() {
    let w = scalar(c(0.0, -0.5));
    let p = psi(&CovarianceMap::identity(1), &w).unwrap();
    assert!((p[(0, 0)] - c(0.0, 1.5)).norm() < 1e-15);
    assert!(psi(&CovarianceMap::identity(1), &scalar(c(0.0, 0.5))).is_err());
    // Ψ_η inverts the solution map: Ψ_η(G_η(b)) = b.
    let mut rng = stream_rng(10, 0);
    for _ in 0..10 {
        let eta = kraus_map(3, 2, 1.0, &mut rng);
        let b = half_plane_point(3, 0.3, 1.0, &mut rng).unwrap();
        let s = solve(b.matrix(), &eta, &SolverConfig::default()).unwrap();
        assert!((&psi(&eta, &s.w).unwrap() - b.matrix()).op_norm() <= s.residual_norm + 1e-12);
    }
}

#[test]
fn covariance_gap_examples() {
    let g = covariance_gap(&CovarianceMap::identity(2), &multiple_of_identity(2, 1.5), 0).unwrap();
    assert!(g.lower <= 0.5 + 1e-12 && 0.5 <= g.upper + 1e-12 && g.lower > 0.49);
    assert!(matches!(
        covariance_gap(&CovarianceMap::identity(2), &CovarianceMap::identity(3), 0),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn subordination_is_identity_for_equal_covariances() {
    let mut rng = stream_rng(11, 0);
    let eta = kraus_map(2, 2, 1.0, &mut rng);
    let b0 = half_plane_point(2, 1.0, 1.0, &mut rng).unwrap();
    let r = subordinate(&b0, b0.matrix(), &eta, &eta, &SubordinationParams::default(), &SolverConfig::default()).unwrap();
    assert!(r.admissible && r.warning.is_none());
    assert!(r.deviation < 1e-10);
    assert!(r.consistency <= r.solver_error + 1e-12);
}

#[test]
fn subordination_deviation_and_identity() {
    let cfg = SolverConfig::default();
    let params = SubordinationParams::default();
    let mut rng = stream_rng(12, 0);
    for _ in 0..20 {
        let b0 = half_plane_point(2, 1.0, 1.0, &mut rng).unwrap();
        let ops = vec![ginibre(2, &mut rng).scale_real(0.5), ginibre(2, &mut rng).scale_real(0.5)];
        let eta0 = CovarianceMap::kraus(2, ops.clone()).unwrap();
        let extra = ginibre(2, &mut rng);
        let unit = CovarianceMap::kraus(2, vec![extra.clone()]).unwrap().operator_norm();
        let room = params.eta_threshold(b0.gamma()) / unit * 0.5;
        let eta1 = CovarianceMap::kraus(2, [ops, vec![extra.scale_real(room.sqrt())]].concat()).unwrap();
        let h = unit_direction(2, &mut rng).scale_real(0.2 * b0.gamma());
        let b = b0.matrix() + &h;
        let r = subordinate(&b0, &b, &eta0, &eta1, &params, &cfg).unwrap();
        assert!(r.admissible, "{:?}", r.warning);
        assert!(r.deviation <= r.deviation_bound + r.deviation_slack);
        // G_{η₀}(ω(b)) = G_{η₁}(b).
        assert!(r.consistency <= r.solver_error + 1e-10);
    }
}

#[test]
fn subordination_warns_outside_the_domain() {
    let b0 = HalfPlanePoint::new(ComplexMatrix::scalar(1, c(0.0, 1.0))).unwrap();
    let far = scalar(c(0.0, 3.0));
    let r = subordinate(
        &b0,
        &far,
        &CovarianceMap::identity(1),
        &multiple_of_identity(1, 1.1),
        &SubordinationParams::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(!r.admissible);
    assert!(r.warning.unwrap().contains("sigma'"));
    let bad = SubordinationParams { sigma_prime: 0.6, sigma: 0.5 };
    assert!(subordinate(&b0, b0.matrix(), &CovarianceMap::identity(1), &CovarianceMap::identity(1), &bad, &SolverConfig::default()).is_err());
}

#[test]
fn subordination_jacobian_matches_differences() {
    let cfg = SolverConfig::default();
    let mut rng = stream_rng(13, 0);
    for _ in 0..8 {
        let b = half_plane_point(2, 0.8, 1.0, &mut rng).unwrap().into_matrix();
        let eta0 = kraus_map(2, 2, 1.0, &mut rng);
        let eta1 = kraus_map(2, 2, 1.0, &mut rng);
        let (jac, err) = subordination_jacobian(&b, &eta0, &eta1, &cfg).unwrap();
        let h = ginibre(2, &mut rng);
        let fd = subordination_derivative_fd(&b, &h, &eta0, &eta1, 1e-4, &cfg).unwrap();
        assert!((&jac.eval(&h) - &fd).op_norm() <= err * h.op_norm() + 1e-6 * h.op_norm());
        let gap = subordination_chain_rule_gap(&b, &h, &eta0, &eta1, 1e-4, &cfg).unwrap();
        assert!(gap < 1e-6, "{gap}");
    }
    // Equal covariances give the identity map.
    let eta = CovarianceMap::identity(2);
    let b = half_plane_point(2, 1.0, 1.0, &mut rng).unwrap().into_matrix();
    let (jac, _) = subordination_jacobian(&b, &eta, &eta, &cfg).unwrap();
    let h = ginibre(2, &mut rng);
    assert!((&jac.eval(&h) - &h).op_norm() < 1e-9);
}

#[test]
fn comparison_constant_matches_grid_search() {
    for sigma0 in [0.05, 0.125, 0.3] {
        let got = derivative_comparison_constant(sigma0);
        let mut grid = f64::INFINITY;
        let n = 1500;
        for i in 1..n {
            let sp = i as f64 / n as f64;
            for j in 1..n {
                let s = j as f64 / n as f64;
                if s <= sp || (1.0 - sp) * (s - sp) < sigma0 {
                    continue;
                }
                grid = grid.min((1.0 - s + 6.75 * sp) / (sp * (1.0 - sp) * (1.0 - s).powi(3)));
            }
        }
        assert!(got <= grid * (1.0 + 1e-12) && got >= grid * 0.99, "{got} vs {grid}");
    }
}

#[test]
fn local_comparison_scalar_examples() {
    let cfg = SolverConfig::default();
    let b = HalfPlanePoint::new(scalar(c(0.0, 2.0))).unwrap();
    for delta in [0.01, 0.1, 0.4] {
        let lc = local_comparison(&b, &CovarianceMap::identity(1), &multiple_of_identity(1, 1.0 + delta), DEFAULT_SIGMA0, &cfg).unwrap();
        let z = c(0.0, 2.0);
        let exact = (semicircle_var(z, 1.0 + delta) - semicircle_var(z, 1.0)).norm();
        assert!((lc.gap_g - exact).abs() < 1e-10);
        assert!(lc.gap_g <= lc.bound_g + lc.slack_g);
        assert!(lc.gap_dg <= lc.bound_dg + lc.slack_dg);
        assert_eq!(lc.gamma, 2.0);
    }
    // δ = 0.6 exceeds σ₀γ² = 0.5.
    assert!(matches!(
        local_comparison(&b, &CovarianceMap::identity(1), &multiple_of_identity(1, 1.6), DEFAULT_SIGMA0, &cfg),
        Err(Error::Precondition(_))
    ));
    assert!(local_comparison(&b, &CovarianceMap::identity(1), &CovarianceMap::identity(1), 1.0, &cfg).is_err());
}

#[test]
fn dilation_identity() {
    // G_s(z) = G_1(z/√s)/√s for the variance-s semicircle.
    let cfg = SolverConfig::default();
    for s in [0.25, 2.0, 9.0] {
        for z in [c(0.3, 0.5), c(-2.0, 1.0), c(0.0, 0.1)] {
            let g = solve(&scalar(z), &multiple_of_identity(1, s), &cfg).unwrap().w[(0, 0)];
            let r = s.sqrt();
            let g1 = solve(&scalar(z / r), &CovarianceMap::identity(1), &cfg).unwrap().w[(0, 0)] / r;
            assert!((g - g1).norm() < 1e-9, "{g} {g1}");
            assert!((g - semicircle_var(z, s)).norm() < 1e-9);
        }
    }
}

#[test]
fn burgers_rhs_scalar_closed_form() {
    let cfg = SolverConfig::default();
    let path = CovariancePath::affine(multiple_of_identity(1, 0.5), multiple_of_identity(1, 2.0)).unwrap();
    for t in [0.0, 0.3, 1.0] {
        let s = 0.5 + 1.5 * t;
        for z in [c(0.1, 0.4), c(-1.5, 1.0)] {
            let g = semicircle_var(z, s);
            // Implicit differentiation of s·G² − zG + 1 = 0 in s.
            let want = 1.5 * (-g * g / (2.0 * s * g - z));
            let got = burgers_rhs(&path, t, &scalar(z), &cfg).unwrap()[(0, 0)];
            assert!((got - want).norm() < 1e-9, "{got} vs {want}");
        }
    }
}

#[test]
fn burgers_constant_path_is_stationary() {
    let mut rng = stream_rng(14, 0);
    let eta = kraus_map(2, 2, 1.0, &mut rng);
    let path = CovariancePath::affine(eta.clone(), eta).unwrap();
    let bs: Vec<_> = (0..3).map(|_| half_plane_point(2, 0.5, 1.0, &mut rng).unwrap().into_matrix()).collect();
    let r = burgers_sweep(&path, &bs, &[0.2, 0.8], None, &SolverConfig::default()).unwrap();
    assert_eq!(r.samples.len(), 6);
    for s in &r.samples {
        assert!(s.g_dot.op_norm() < 1e-12);
        assert!(s.fd_check < 1e-9);
    }
    assert_eq!(r.delta, default_time_step(&path));
}

#[test]
fn burgers_sweep_agrees_with_differences() {
    let mut rng = stream_rng(15, 0);
    let path = CovariancePath::affine(kraus_map(2, 2, 1.0, &mut rng), kraus_map(2, 2, 1.0, &mut rng)).unwrap();
    let bs: Vec<_> = (0..3).map(|_| half_plane_point(2, 0.5, 1.0, &mut rng).unwrap().into_matrix()).collect();
    let r = burgers_sweep(&path, &bs, &[0.25, 0.5, 0.75], Some(1e-4), &SolverConfig::default()).unwrap();
    assert!(r.max_fd_check < 1e-6, "{}", r.max_fd_check);
    assert!(burgers_sweep(&path, &bs, &[0.0], None, &SolverConfig::default()).is_err());
    assert!(burgers_sweep(&path, &bs, &[0.5], Some(0.0), &SolverConfig::default()).is_err());
    let json = r.to_json();
    assert!(json.contains("\"G_t\"") && json.contains("halving_ratio"));
}

#[test]
fn burgers_callback_path() {
    // η_t = e^t·id on [0, 1].
    let path = CovariancePath::callback(0.0, 1.0, |t: f64| {
        let eta = multiple_of_identity(1, t.exp());
        let dot = eta.to_linear();
        Ok((eta, dot))
    })
    .unwrap();
    let z = c(0.2, 0.6);
    let t: f64 = 0.4;
    let s = t.exp();
    let g = semicircle_var(z, s);
    let want = s * (-g * g / (2.0 * s * g - z));
    let got = burgers_rhs(&path, t, &scalar(z), &SolverConfig::default()).unwrap()[(0, 0)];
    assert!((got - want).norm() < 1e-9);
    assert!(CovariancePath::callback(1.0, 1.0, |_| unreachable!()).is_err());
}

#[test]
fn equicontinuity_profile_is_lipschitz_in_time() {
    let cfg = SolverConfig::default();
    let mut rng = stream_rng(16, 0);
    let eta0 = kraus_map(2, 2, 1.0, &mut rng);
    let eta1 = kraus_map(2, 2, 1.0, &mut rng);
    let gap = covariance_gap(&eta0, &eta1, 0).unwrap().upper;
    let path = CovariancePath::affine(eta0, eta1).unwrap();
    let gamma = 0.7;
    let bs: Vec<_> = (0..4).map(|_| half_plane_point(2, gamma, 1.0, &mut rng).unwrap().into_matrix()).collect();
    let offsets = [0.0, 0.01, 0.05, 0.1, 0.2];
    let prof = equicontinuity_profile(&path, &bs, 0.3, &offsets, &cfg).unwrap();
    assert_eq!(prof[0], 0.0);
    for (s, p) in offsets.iter().zip(&prof).skip(1) {
        let sigma0 = s * gap / (gamma * gamma);
        if sigma0 < 1.0 {
            assert!(*p <= s * gap / ((1.0 - sigma0) * gamma.powi(3)) + 1e-9);
        }
    }
    assert!(prof.windows(2).all(|w| w[0] <= w[1] + 1e-12));
}
