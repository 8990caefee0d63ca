use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::eigen::{self, Eigen};
use super::matrix::{ComplexMatrix, MatrixRepr};

/// A complex matrix whose entries satisfy `a[i][j] == conj(a[j][i])` bit-for-bit.
///
/// The diagonal is real. Every constructor either enforces the symmetry by
/// writing the upper triangle from the lower one, or verifies it exactly.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Builds from a lower-triangle generator `f(i, j)` with `j <= i`.
    ///
    /// Diagonal imaginary parts are dropped and the upper triangle is filled
    /// with conjugates.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut a = ComplexMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..i {
                let z = f(i, j);
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
            }
            a[(i, i)] = Complex64::new(f(i, i).re, 0.0);
        }
        Self(a)
    }

    /// Accepts `a` only if it is exactly Hermitian.
    pub fn try_from_matrix(a: ComplexMatrix) -> Result<Self> {
        let n = a.dim();
        for i in 0..n {
            for j in 0..=i {
                if a[(i, j)] != a[(j, i)].conj() {
                    return Err(Error::NotHermitian { row: i, col: j });
                }
            }
        }
        Ok(Self(a))
    }

    /// Hermitian part `(a + a*)/2`.
    pub fn project(a: &ComplexMatrix) -> Self {
        a.re_part()
    }

    pub fn zeros(dim: usize) -> Self {
        Self(ComplexMatrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    pub fn from_real_diag(values: &[f64]) -> Self {
        Self::from_lower_fn(values.len(), |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Real symmetric matrix from row-major data; only the lower triangle is read.
    pub fn from_real_symmetric(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: data.len() });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self::from_lower_fn(dim, |i, j| Complex64::new(data[i * dim + j], 0.0)))
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn eigen(&self) -> Result<Eigen> {
        eigen::herm_eigen(self)
    }

    /// Ascending eigenvalues without eigenvectors.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigen::eigenvalues_of(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Spectral radius, which is also the operator norm.
    pub fn spectral_norm(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
    }

    /// `U f(Λ) U*`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let Eigen { values, vectors } = self.eigen()?;
        let n = self.dim();
        let fv: Vec<f64> = values.iter().map(|&x| f(x)).collect();
        Ok(Self::from_lower_fn(n, |i, j| {
            (0..n).map(|k| vectors[(i, k)] * vectors[(j, k)].conj() * fv[k]).sum()
        }))
    }

    /// Principal square root of a positive semidefinite matrix.
    pub fn sqrt(&self) -> Result<Self> {
        self.map_spectrum(|x| x.max(0.0).sqrt())
    }

    /// `a^{-1/2}`, for positive definite `a`.
    pub fn inv_sqrt(&self) -> Result<Self> {
        let lo = self.min_eigenvalue()?;
        if lo <= 0.0 {
            return Err(Error::NotInUpperHalfPlane { min_eigenvalue: lo });
        }
        self.map_spectrum(|x| 1.0 / x.sqrt())
    }

    pub fn add(&self, other: &Self) -> Self {
        let s = &self.0 + &other.0;
        Self::from_lower_fn(self.dim(), |i, j| s[(i, j)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        let s = &self.0 - &other.0;
        Self::from_lower_fn(self.dim(), |i, j| s[(i, j)])
    }

    pub fn scale_real(&self, x: f64) -> Self {
        Self(self.0.scale_real(x))
    }

    /// `self + x·1`.
    pub fn shift_real(&self, x: f64) -> Self {
        Self(self.0.shift(Complex64::new(x, 0.0)))
    }

    /// Kronecker product with the identity `1_n` on the right.
    pub fn kron_identity(&self, n: usize) -> Self {
        Self(self.0.kron(&ComplexMatrix::identity(n)))
    }
}

impl Deref for HermitianMatrix {
    type Target = ComplexMatrix;
    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}

impl AsRef<ComplexMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

impl From<HermitianMatrix> for ComplexMatrix {
    fn from(h: HermitianMatrix) -> Self {
        h.0
    }
}

impl TryFrom<MatrixRepr> for HermitianMatrix {
    type Error = Error;
    fn try_from(repr: MatrixRepr) -> Result<Self> {
        HermitianMatrix::try_from_matrix(ComplexMatrix::try_from(repr)?)
    }
}

impl From<HermitianMatrix> for MatrixRepr {
    fn from(h: HermitianMatrix) -> Self {
        MatrixRepr::from(h.0)
    }
}

/// A point of the operator upper half-plane together with a certified
/// lower bound `gamma` for the spectrum of its imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfPlanePoint {
    matrix: ComplexMatrix,
    gamma: f64,
}

impl HalfPlanePoint {
    /// Computes `gamma` as the smallest eigenvalue of `Im(b)`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let gamma = matrix.im_part().min_eigenvalue()?;
        if !(gamma > 0.0) {
            return Err(Error::NotInUpperHalfPlane { min_eigenvalue: gamma });
        }
        Ok(Self { matrix, gamma })
    }

    /// Uses a caller-provided `gamma`, checked against the eigensolver.
    pub fn with_gamma(matrix: ComplexMatrix, gamma: f64) -> Result<Self> {
        let lo = matrix.im_part().min_eigenvalue()?;
        if !(gamma > 0.0) || lo < gamma {
            return Err(Error::NotInUpperHalfPlane { min_eigenvalue: lo });
        }
        Ok(Self { matrix, gamma })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// `‖Im(b)^{-1}‖`, the reciprocal of the smallest eigenvalue of `Im(b)`.
pub fn im_inv_norm(b: &ComplexMatrix) -> Result<f64> {
    let lo = b.im_part().min_eigenvalue()?;
    if lo > 0.0 {
        Ok(1.0 / lo)
    } else {
        Err(Error::NotInUpperHalfPlane { min_eigenvalue: lo })
    }
}

/// Relative slack used when testing the open condition `< 4`.
pub const HALF_PLANE_SLACK: f64 = 1e-12;

/// Decides whether `[[b1, w], [0, b2]]` lies in the upper half-plane of the
/// doubled algebra, via `‖Im(b2)^{-1/2} w* Im(b1)^{-1} w Im(b2)^{-1/2}‖ < 4`.
pub fn in_upper_half_plane2(b1: &ComplexMatrix, b2: &ComplexMatrix, w: &ComplexMatrix) -> Result<bool> {
    let m = b1.dim();
    b2.check_dim(m)?;
    w.check_dim(m)?;
    let im1 = b1.im_part();
    let im2 = b2.im_part();
    let lo1 = im1.min_eigenvalue()?;
    let lo2 = im2.min_eigenvalue()?;
    for lo in [lo1, lo2] {
        if lo <= 0.0 {
            return Err(Error::NotInUpperHalfPlane { min_eigenvalue: lo });
        }
    }
    let s1 = im1.inv_sqrt()?;
    let s2 = im2.inv_sqrt()?;
    // ‖s2 w* s1² w s2‖ = ‖s1 w s2‖².
    let core = s1.as_matrix() * w * s2.as_matrix();
    let value = core.op_norm().powi(2);
    Ok(value < 4.0 * (1.0 - HALF_PLANE_SLACK))
}
