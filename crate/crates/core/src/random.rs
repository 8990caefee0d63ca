//! Seeded generators for test instances.
//!
//! Every stream is a ChaCha20 generator keyed by a 64-bit seed; independent
//! sub-streams (one per instance or Monte Carlo trial) are selected with the
//! generator's stream counter, so results never depend on scheduling order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::algebra::{ComplexMatrix, HalfPlanePoint, HermitianMatrix};
use crate::covariance::CovarianceMap;
use crate::error::Result;

pub type Rng64 = ChaCha20Rng;

/// Generator for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex Gaussian with `E|z|² = 1`.
pub fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(normal(rng) * s, normal(rng) * s)
}

/// Ginibre matrix with i.i.d. entries of variance `1/m`.
pub fn ginibre(m: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let s = 1.0 / (m as f64).sqrt();
    ComplexMatrix::from_fn(m, |_, _| complex_normal(rng) * s)
}

/// GUE matrix normalized so that its spectrum fills `[-2, 2]` as `m` grows:
/// real diagonal entries of variance `1/m` and off-diagonal entries whose
/// real and imaginary parts have variance `1/(2m)` each.
pub fn gue(m: usize, rng: &mut impl Rng) -> HermitianMatrix {
    let s = 1.0 / (m as f64).sqrt();
    HermitianMatrix::from_lower_fn(m, |i, j| {
        if i == j {
            Complex64::new(normal(rng) * s, 0.0)
        } else {
            complex_normal(rng) * s
        }
    })
}

/// Random unit vector in `ℂ^n`.
pub fn unit_vector(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n).map(|_| complex_normal(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Random density matrix `W W* / Tr(W W*)` with Ginibre `W`.
pub fn density_matrix(m: usize, rng: &mut impl Rng) -> HermitianMatrix {
    let w = ginibre(m, rng);
    let p = &w * &w.adjoint();
    let tr = p.trace().re;
    HermitianMatrix::project(&p.scale_real(1.0 / tr))
}

/// Matrix with operator norm exactly one (up to rounding), Ginibre direction.
pub fn unit_direction(m: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let h = ginibre(m, rng);
    let n = h.op_norm();
    h.scale_real(1.0 / n)
}

/// A point `X + i·Y` with `X` a scaled GUE sample and `Y ⪰ gamma·1` whose
/// smallest eigenvalue equals `gamma` up to rounding.
pub fn half_plane_point(m: usize, gamma: f64, spread: f64, rng: &mut impl Rng) -> Result<HalfPlanePoint> {
    let x = gue(m, rng).scale_real(spread);
    let y = if m == 1 {
        HermitianMatrix::from_real_diag(&[gamma])
    } else {
        // Y = γ·1 + V diag(0, s_2, ..., s_m) V* with V unitary.
        let v = gue(m, rng).eigen()?.vectors;
        let s: Vec<f64> = (0..m).map(|k| if k == 0 { 0.0 } else { spread * rng.random::<f64>() }).collect();
        HermitianMatrix::from_lower_fn(m, |i, j| {
            (0..m).map(|k| v[(i, k)] * v[(j, k)].conj() * s[k]).sum()
        })
        .shift_real(gamma)
    };
    let b = x.as_matrix() + &y.as_matrix().scale(Complex64::new(0.0, 1.0));
    HalfPlanePoint::new(b)
}

/// Completely positive map with `rank` Ginibre Kraus operators, scaled so
/// that `‖η(1)‖ = scale`.
pub fn kraus_map(m: usize, rank: usize, scale: f64, rng: &mut impl Rng) -> CovarianceMap {
    let ops: Vec<ComplexMatrix> = (0..rank).map(|_| ginibre(m, rng)).collect();
    let raw = CovarianceMap::kraus(m, ops.clone()).expect("consistent dimensions");
    let n = raw.operator_norm();
    let f = (scale / n).sqrt();
    CovarianceMap::kraus(m, ops.into_iter().map(|a| a.scale_real(f)).collect()).expect("consistent dimensions")
}
