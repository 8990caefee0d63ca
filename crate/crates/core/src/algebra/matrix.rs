use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::eigen;
use super::hermitian::HermitianMatrix;
use super::lu::Lu;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense square complex matrix in row-major storage.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

/// Wire format shared by [`ComplexMatrix`] and [`HermitianMatrix`].
#[derive(Serialize, Deserialize)]
pub(crate) struct MatrixRepr {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<MatrixRepr> for ComplexMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        if repr.entries.len() != repr.dim {
            return Err(Error::DimensionMismatch { expected: repr.dim, actual: repr.entries.len() });
        }
        let rows = repr
            .entries
            .into_iter()
            .map(|row| row.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .collect();
        ComplexMatrix::from_rows(rows)
    }
}

impl From<ComplexMatrix> for MatrixRepr {
    fn from(a: ComplexMatrix) -> Self {
        let entries = (0..a.dim)
            .map(|i| a.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        MatrixRepr { dim: a.dim, entries }
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, Complex64::new(1.0, 0.0))
    }

    /// `z` times the identity.
    pub fn scalar(dim: usize, z: Complex64) -> Self {
        let mut a = Self::zeros(dim);
        for i in 0..dim {
            a.data[i * dim + i] = z;
        }
        a
    }

    pub fn diag(values: &[Complex64]) -> Self {
        let mut a = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            a[(i, i)] = v;
        }
        a
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut a = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                a.data[i * dim + j] = f(i, j);
            }
        }
        a
    }

    /// Builds a matrix from rows, rejecting ragged, empty or non-finite input.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
            }
            data.extend(row);
        }
        Self::from_vec(dim, data)
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: data.len() });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, data })
    }

    /// Real-valued convenience constructor, row-major.
    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(dim, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual: self.dim })
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * z).collect() }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&y| y * x).collect() }
    }

    /// `self + z·1`.
    pub fn shift(&self, z: Complex64) -> Self {
        let mut a = self.clone();
        for i in 0..self.dim {
            a.data[i * self.dim + i] += z;
        }
        a
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex64, other: &ComplexMatrix) {
        assert_eq!(self.dim, other.dim, "dimension mismatch in axpy");
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    /// Hermitian part `(a + a*)/2`, exactly conjugate-symmetric.
    pub fn re_part(&self) -> HermitianMatrix {
        HermitianMatrix::from_lower_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// `(a − a*)/(2i)`, exactly conjugate-symmetric.
    pub fn im_part(&self) -> HermitianMatrix {
        HermitianMatrix::from_lower_fn(self.dim, |i, j| {
            (self[(i, j)] - self[(j, i)].conj()) * Complex64::new(0.0, -0.5)
        })
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        if self.dim == 1 {
            return self.data[0].norm();
        }
        let gram = HermitianMatrix::from_lower_fn(self.dim, |i, j| {
            (0..self.dim).map(|k| self[(k, i)].conj() * self[(k, j)]).sum()
        });
        let top = eigen::eigenvalues_of(&gram)
            .map(|ev| ev.last().copied().unwrap_or(0.0))
            .unwrap_or_else(|_| gram.frobenius_norm().powi(2));
        top.max(0.0).sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn lu(&self) -> Result<Lu> {
        Lu::factor(self)
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.dim == 1 {
            let z = self.data[0];
            if z == Complex64::new(0.0, 0.0) {
                return Err(Error::Singular { pivot: 0 });
            }
            return Ok(Self { dim: 1, data: vec![z.inv()] });
        }
        Lu::factor(self)?.inverse()
    }

    /// Assembles `[[a, b], [c, d]]`.
    pub fn block2(a: &Self, b: &Self, c: &Self, d: &Self) -> Self {
        let m = a.dim;
        for x in [b, c, d] {
            assert_eq!(x.dim, m, "block dimensions must agree");
        }
        Self::from_fn(2 * m, |i, j| {
            let src = match (i < m, j < m) {
                (true, true) => a,
                (true, false) => b,
                (false, true) => c,
                (false, false) => d,
            };
            src[(i % m, j % m)]
        })
    }

    /// Assembles a `k×k` grid of `m×m` blocks given row-major as `blocks[p*k + q]`.
    pub fn from_blocks(k: usize, blocks: &[Self]) -> Self {
        assert_eq!(blocks.len(), k * k, "expected k² blocks");
        let m = blocks[0].dim;
        Self::from_fn(k * m, |i, j| blocks[(i / m) * k + j / m][(i % m, j % m)])
    }

    pub fn block_diag(blocks: &[Self]) -> Self {
        let k = blocks.len();
        let m = blocks[0].dim;
        let zero = Self::zeros(m);
        let grid: Vec<Self> = (0..k * k)
            .map(|idx| if idx / k == idx % k { blocks[idx / k].clone() } else { zero.clone() })
            .collect();
        Self::from_blocks(k, &grid)
    }

    /// Block `(p, q)` of size `m`, where `self` is viewed as a grid of `m×m` blocks.
    pub fn block(&self, m: usize, p: usize, q: usize) -> Self {
        assert!(m >= 1 && self.dim % m == 0, "block size must divide the dimension");
        Self::from_fn(m, |i, j| self[(p * m + i, q * m + j)])
    }

    /// Kronecker product; block `(i, j)` of the result is `self[i][j]·other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (m, n) = (self.dim, other.dim);
        Self::from_fn(m * n, |r, c| self[(r / n, c / n)] * other[(r % n, c % n)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Self { dim: n, data: out }
    }

    /// `self · x` for a column vector.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Distance of `a` from `b` in operator norm.
    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).op_norm()
    }
}

/// `i·1`.
pub fn i_identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::scalar(dim, I)
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

macro_rules! elementwise {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                assert_eq!(self.dim, rhs.dim, "dimension mismatch");
                ComplexMatrix {
                    dim: self.dim,
                    data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a $op b).collect(),
                }
            }
        }
        impl $trait<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                (&self).$method(rhs)
            }
        }
        impl $trait<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                self.$method(&rhs)
            }
        }
    };
}

elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Mul<ComplexMatrix> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        self.matmul(&rhs)
    }
}

impl Mul<&ComplexMatrix> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Mul<ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        self.matmul(&rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix { dim: self.dim, data: self.data.iter().map(|&z| -z).collect() }
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        -&self
    }
}
