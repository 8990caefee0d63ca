use std::f64::consts::PI;

use dyson_core::covariance::CovarianceMap;
use dyson_core::dyson::SolverConfig;
use dyson_core::measures::{
    cauchy_smooth, default_window, density_of_states, kolmogorov_distance, levy_distance, scalar_cauchy,
    scalar_cauchy_certified, to_measure, DataPair, DiscreteMeasure, SpectralDensity, StateFunctional,
};
use dyson_core::random::{density_matrix, ginibre, gue, kraus_map, stream_rng};
use dyson_core::verify::atomic_im_difference_integral;
use dyson_core::{ComplexMatrix, Error, HermitianMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn semicircle(z: Complex64) -> Complex64 {
    let r = (z * z - 4.0).sqrt();
    let g = (z - r) / 2.0;
    if g.im <= 0.0 {
        g
    } else {
        (z + r) / 2.0
    }
}

/// Lévy distance by bisection over the sandwich condition, evaluated at every
/// point where either side can change (atoms shifted by `±ε`) and just left
/// of each.
fn levy_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let f = |m: &DiscreteMeasure, x: f64| m.atoms().iter().zip(m.weights()).filter(|(a, _)| **a <= x).map(|(_, w)| w).sum::<f64>();
    let ok = |e: f64| {
        let mut pts = Vec::new();
        for a in mu.atoms().iter().chain(nu.atoms()) {
            for x in [a - e, *a, a + e] {
                pts.push(x);
                pts.push(x - 1e-12);
            }
        }
        pts.iter().all(|&x| {
            f(mu, x - e) - e <= f(nu, x) + 1e-13
                && f(nu, x) <= f(mu, x + e) + e + 1e-13
                && f(nu, x - e) - e <= f(mu, x) + 1e-13
                && f(mu, x) <= f(nu, x + e) + e + 1e-13
        })
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if ok(0.0) {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn random_atomic(rng: &mut dyson_core::random::Rng64, spread: f64) -> DiscreteMeasure {
    use rand::Rng;
    let n = 1 + rng.random_range(0..8usize);
    let atoms = (0..n).map(|_| rng.random_range(-spread..spread)).collect();
    let weights = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
    DiscreteMeasure::new(atoms, weights).unwrap()
}

#[test]
fn state_functional_invariants() {
    let tr = StateFunctional::normalized_trace(4);
    assert!((tr.apply(&ComplexMatrix::identity(4)) - 1.0).norm() < 1e-15);
    let mut rng = stream_rng(1, 0);
    for _ in 0..20 {
        let phi = StateFunctional::from_density(density_matrix(3, &mut rng)).unwrap();
        assert!((phi.apply(&ComplexMatrix::identity(3)) - 1.0).norm() < 1e-14);
        let b = ginibre(3, &mut rng);
        assert!(phi.apply(&(&b.adjoint() * &b)).re >= -1e-12);
    }
    assert!(StateFunctional::from_density(HermitianMatrix::identity(2)).is_err());
    assert!(StateFunctional::from_density(HermitianMatrix::from_real_diag(&[1.5, -0.5])).is_err());
}

#[test]
fn data_pair_validation_and_json() {
    let eta = CovarianceMap::identity(2);
    assert!(matches!(
        DataPair::with_trace_state(HermitianMatrix::zeros(3), eta.clone()),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(DataPair::new(HermitianMatrix::zeros(2), eta.clone(), StateFunctional::normalized_trace(3)).is_err());
    assert!(matches!(
        DataPair::with_trace_state(HermitianMatrix::zeros(2), CovarianceMap::transpose(2)),
        Err(Error::NotKPositive { level: 2, .. })
    ));
    let rho = DataPair::with_trace_state(HermitianMatrix::from_real_diag(&[0.5, -1.0]), eta).unwrap();
    let back = DataPair::from_json(&rho.to_json()).unwrap();
    assert_eq!(back.to_json(), rho.to_json());

    let minimal = r#"{"b0":{"dim":1,"entries":[[[0,0]]]},"eta":{"dim":1,"repr":{"kind":"kraus","matrices":[{"dim":1,"entries":[[[1,0]]]}]}}}"#;
    let p = DataPair::from_json(minimal).unwrap();
    assert_eq!(p.phi(), &StateFunctional::normalized_trace(1));
    let extra = minimal.replacen('{', r#"{"typo":1,"#, 1);
    assert!(DataPair::from_json(&extra).is_err());
    assert!(DataPair::from_json("{not json").is_err());
}

#[test]
fn scalar_cauchy_examples() {
    let cfg = SolverConfig::default();
    let atom = DataPair::with_trace_state(HermitianMatrix::zeros(2), CovarianceMap::zero(2)).unwrap();
    let z = Complex64::new(0.3, 0.7);
    assert!((scalar_cauchy(&atom, z, &cfg).unwrap() - 1.0 / z).norm() < 1e-14);
    let g = scalar_cauchy(&DataPair::semicircle(), Complex64::new(0.0, 1.0), &cfg).unwrap();
    assert!((g - Complex64::new(0.0, -0.618_033_988_749_894_8)).norm() < 1e-11);
    assert!(scalar_cauchy(&atom, Complex64::new(1.0, 0.0), &cfg).is_err());
    assert!(scalar_cauchy(&atom, Complex64::new(1.0, -0.1), &cfg).is_err());
}

#[test]
fn cauchy_transform_is_herglotz_and_normalized() {
    let cfg = SolverConfig::default();
    let mut rng = stream_rng(2, 0);
    let mut pairs = vec![DataPair::semicircle()];
    for _ in 0..4 {
        let eta = kraus_map(2, 2, 1.0, &mut rng);
        let phi = StateFunctional::from_density(density_matrix(2, &mut rng)).unwrap();
        pairs.push(DataPair::new(gue(2, &mut rng), eta, phi).unwrap());
    }
    pairs.push(DataPair::with_trace_state(gue(3, &mut rng), CovarianceMap::choi_example().scaled(0.2).unwrap()).unwrap());
    for rho in &pairs {
        for k in 0..15 {
            let z = Complex64::new(-3.0 + 0.4 * k as f64, 0.05 + 0.1 * k as f64);
            assert!(scalar_cauchy(rho, z, &cfg).unwrap().im < 0.0);
        }
        let b = rho.b0().spectral_norm().unwrap();
        let e = rho.eta().operator_norm();
        let mut prev = f64::INFINITY;
        for y in [10.0, 100.0, 1000.0] {
            let iy = Complex64::new(0.0, y);
            let dev = (iy * scalar_cauchy(rho, iy, &cfg).unwrap() - 1.0).norm();
            assert!(dev < prev);
            prev = dev;
            // Moment expansion: |iy𝒢(iy) − 1| ≤ Σ_n (‖b0‖² + ‖η‖)^{n/2} / yⁿ.
            let s = (b * b + e).sqrt().max(b);
            assert!(dev <= (b + s * s / y) / y * (1.0 + 2.0 * s / y) + 1e-12);
        }
    }
}

#[test]
fn semicircle_density_matches_closed_form() {
    let eps = 0.05;
    let sd = density_of_states(&DataPair::semicircle(), eps, None, 801, &SolverConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for (t, v) in sd.grid.iter().zip(&sd.values) {
        let want = -semicircle(Complex64::new(*t, eps)).im / PI;
        worst = worst.max((v - want).abs());
    }
    assert!(worst < 1e-9, "{worst}");
    assert!(sd.value_error < 1e-9);
    let (lo, hi) = default_window(&DataPair::semicircle(), eps).unwrap();
    assert!((lo + 2.5).abs() < 1e-14 && (hi - 2.5).abs() < 1e-14);
}

#[test]
fn semicircle_density_at_zero_approaches_the_unsmoothed_value() {
    let cfg = SolverConfig::default();
    let mut prev = f64::INFINITY;
    for eps in [0.2, 0.1, 0.05, 0.02, 0.01] {
        let sd = density_of_states(&DataPair::semicircle(), eps, Some((-0.01, 0.01)), 3, &cfg).unwrap();
        let gap = (sd.values[1] - 1.0 / PI).abs();
        assert!(gap < prev);
        prev = gap;
    }
    assert!(prev < 0.01 / PI);
}

#[test]
fn atomic_density_is_average_of_cauchy_bumps() {
    let rho = DataPair::with_trace_state(HermitianMatrix::from_real_diag(&[-1.0, 1.0]), CovarianceMap::zero(2)).unwrap();
    let eps = 0.1;
    let sd = density_of_states(&rho, eps, Some((-3.0, 3.0)), 121, &SolverConfig::default()).unwrap();
    for (t, v) in sd.grid.iter().zip(&sd.values) {
        let bump = |a: f64| eps / PI / ((t - a) * (t - a) + eps * eps);
        assert!((v - 0.5 * (bump(-1.0) + bump(1.0))).abs() < 1e-12);
    }
}

#[test]
fn default_window_captures_almost_all_mass() {
    let cfg = SolverConfig::default();
    let sd = density_of_states(&DataPair::semicircle(), 0.01, None, 2001, &cfg).unwrap();
    let mass = sd.mass();
    assert!((0.98..=1.0).contains(&mass), "{mass}");
    assert!((sd.tail_mass() - (1.0 - mass)).abs() < 1e-15);
    let m = to_measure(&sd).unwrap();
    assert!(m.mean().abs() < 0.02);
}

#[test]
fn density_rejects_bad_parameters() {
    let rho = DataPair::semicircle();
    let cfg = SolverConfig::default();
    assert!(density_of_states(&rho, 0.0, None, 11, &cfg).is_err());
    assert!(density_of_states(&rho, 0.1, None, 1, &cfg).is_err());
    assert!(density_of_states(&rho, 0.1, Some((1.0, -1.0)), 11, &cfg).is_err());
}

#[test]
fn csv_round_trip() {
    let sd = density_of_states(&DataPair::semicircle(), 0.1, None, 51, &SolverConfig::default()).unwrap();
    let text = sd.to_csv();
    assert!(text.starts_with("t,density\n"));
    let back = SpectralDensity::from_csv(&text, 0.1).unwrap();
    assert_eq!(back.grid, sd.grid);
    assert_eq!(back.values, sd.values);
    assert!(SpectralDensity::from_csv("x,y\n1,2\n2,3\n", 0.1).is_err());
    assert!(SpectralDensity::from_csv("t,density\n1,2\n0,3\n", 0.1).is_err());
}

#[test]
fn to_measure_examples() {
    let flat = SpectralDensity {
        epsilon: 0.1,
        grid: (0..11).map(|i| i as f64 / 10.0).collect(),
        values: vec![1.0; 11],
        support_window: (0.0, 1.0),
        value_error: 0.0,
    };
    let m = to_measure(&flat).unwrap();
    assert_eq!(m.len(), 10);
    assert!(m.weights().iter().all(|w| (w - 0.1).abs() < 1e-14));
    let mut spike = flat.clone();
    spike.values = vec![0.0; 11];
    spike.values[4] = 5.0;
    spike.values[5] = 5.0;
    let m = to_measure(&spike).unwrap();
    let big = m.weights().iter().cloned().fold(0.0, f64::max);
    assert!(big > 0.49 && (m.atoms()[m.weights().iter().position(|&w| w == big).unwrap()] - 0.45).abs() < 1e-14);
    let mut empty = flat;
    empty.values = vec![0.0; 11];
    assert!(matches!(to_measure(&empty), Err(Error::ZeroMass)));
}

#[test]
fn discrete_measure_construction() {
    let m = DiscreteMeasure::new(vec![2.0, -1.0, 2.0, 0.5], vec![1.0, 2.0, 1.0, 0.0]).unwrap();
    assert_eq!(m.atoms(), &[-1.0, 2.0]);
    assert_eq!(m.weights(), &[0.5, 0.5]);
    assert_eq!(*m.cdf().last().unwrap(), 1.0);
    assert_eq!(m.cdf_at(-2.0), 0.0);
    assert_eq!(m.cdf_at(-1.0), 0.5);
    assert_eq!(m.cdf_at(2.0), 1.0);
    assert!((m.mean() - 0.5).abs() < 1e-15);
    assert!(DiscreteMeasure::new(vec![1.0], vec![0.0]).is_err());
    assert!(DiscreteMeasure::new(vec![1.0], vec![-1.0]).is_err());
    assert!(DiscreteMeasure::new(vec![f64::NAN], vec![1.0]).is_err());
    assert!(DiscreteMeasure::new(vec![1.0, 2.0], vec![1.0]).is_err());
    let json = m.to_json();
    let back: DiscreteMeasure = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
}

#[test]
fn levy_and_kolmogorov_examples() {
    let d0 = DiscreteMeasure::dirac(0.0);
    assert_eq!(levy_distance(&d0, &d0), 0.0);
    assert_eq!(kolmogorov_distance(&d0, &d0), 0.0);
    for a in [0.001, 0.25, 0.3, 0.7, 1.0] {
        assert!((levy_distance(&d0, &DiscreteMeasure::dirac(a)) - a).abs() < 1e-12);
        assert_eq!(kolmogorov_distance(&d0, &DiscreteMeasure::dirac(a)), 1.0);
    }
    assert!((levy_distance(&d0, &DiscreteMeasure::dirac(10.0)) - 1.0).abs() < 1e-12);
}

#[test]
fn levy_matches_bruteforce_oracle() {
    let mut rng = stream_rng(3, 0);
    for _ in 0..200 {
        let mu = random_atomic(&mut rng, 1.5);
        let nu = random_atomic(&mut rng, 1.5);
        let l = levy_distance(&mu, &nu);
        let want = levy_oracle(&mu, &nu);
        assert!((l - want).abs() < 1e-9, "{l} vs {want}");
    }
}

#[test]
fn cauchy_smooth_examples() {
    let eps = 0.2;
    let sd = cauchy_smooth(&DiscreteMeasure::dirac(0.0), eps, (-50.0, 50.0), 20001).unwrap();
    for (t, v) in sd.grid.iter().zip(&sd.values).step_by(997) {
        assert!((v - eps / PI / (t * t + eps * eps)).abs() < 1e-14);
    }
    assert!((sd.mass() - 1.0).abs() < 3e-3);
    let mut rng = stream_rng(4, 0);
    let mu = random_atomic(&mut rng, 1.0);
    let sd = cauchy_smooth(&mu, 0.1, (-3.0, 3.0), 301).unwrap();
    for (t, v) in sd.grid.iter().zip(&sd.values) {
        let z = Complex64::new(*t, 0.1);
        assert!((v + mu.cauchy_transform(z).im / PI).abs() < 1e-12);
    }
}

#[test]
fn smoothed_distance_is_bounded_by_the_transform_gap() {
    let mut rng = stream_rng(5, 0);
    for _ in 0..40 {
        let mu = random_atomic(&mut rng, 1.0);
        let nu = random_atomic(&mut rng, 1.0);
        let eps = 0.1;
        let window = (-1.0 - 300.0 * eps, 1.0 + 300.0 * eps);
        let a = cauchy_smooth(&mu, eps, window, 6001).unwrap();
        let b = cauchy_smooth(&nu, eps, window, 6001).unwrap();
        let l = levy_distance(&to_measure(&a).unwrap(), &to_measure(&b).unwrap());
        let slack = a.max_spacing() + b.max_spacing() + (1.0 - a.mass()).abs() + (1.0 - b.mass()).abs();
        assert!(l <= atomic_im_difference_integral(&mu, &nu, eps) + slack);
    }
}

#[test]
fn certified_cauchy_error_covers_the_closed_form() {
    let cfg = SolverConfig::default();
    for t in [-2.5, -1.0, 0.0, 0.9, 1.99, 3.0] {
        let z = Complex64::new(t, 0.03);
        let c = scalar_cauchy_certified(&DataPair::semicircle(), z, &cfg).unwrap();
        assert!((c.value - semicircle(z)).norm() <= c.error);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn levy_is_a_metric_below_kolmogorov(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let a = random_atomic(&mut rng, 2.0);
        let b = random_atomic(&mut rng, 2.0);
        let c = random_atomic(&mut rng, 2.0);
        let (ab, ba) = (levy_distance(&a, &b), levy_distance(&b, &a));
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(ab <= levy_distance(&a, &c) + levy_distance(&c, &b) + 1e-12);
        prop_assert!(ab <= kolmogorov_distance(&a, &b) + 1e-12);
        prop_assert_eq!(levy_distance(&a, &a), 0.0);
    }

    #[test]
    fn translation_shifts_levy_exactly(seed in any::<u64>(), shift in 0.0f64..1.0) {
        let mut rng = stream_rng(seed, 1);
        let a = random_atomic(&mut rng, 2.0);
        let b = DiscreteMeasure::new(a.atoms().iter().map(|x| x + shift).collect(), a.weights().to_vec()).unwrap();
        prop_assert!(levy_distance(&a, &b) <= shift + 1e-12);
    }
}
