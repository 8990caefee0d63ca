use num_complex::Complex64;

use crate::error::{Error, Result};

use super::matrix::ComplexMatrix;

/// LU factorization with partial pivoting, `P a = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    norm1: f64,
}

fn norm1_of(n: usize, data: &[Complex64]) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| data[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl Lu {
    pub fn factor(a: &ComplexMatrix) -> Result<Self> {
        Self::factor_raw(a.dim(), a.as_slice().to_vec())
    }

    /// Factors a row-major `n×n` buffer in place.
    pub fn factor_raw(n: usize, mut lu: Vec<Complex64>) -> Result<Self> {
        assert_eq!(lu.len(), n * n);
        let norm1 = norm1_of(n, &lu);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, lu[i * n + k].l1_norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv_pivot = lu[k * n + k].inv();
            let (top, bottom) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n..(k + 1) * n];
            for row in bottom.chunks_exact_mut(n) {
                let factor = row[k] * inv_pivot;
                row[k] = factor;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (x, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                    *x -= factor * u;
                }
            }
        }
        Ok(Self { n, lu, perm, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `a x = rhs` for one right-hand side.
    pub fn solve_vec(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: Complex64 = row.iter().zip(&x[..i]).map(|(&l, &y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: Complex64 = row.iter().zip(&x[i + 1..]).map(|(&u, &y)| u * y).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    pub fn inverse(&self) -> Result<ComplexMatrix> {
        let n = self.n;
        let mut inv = ComplexMatrix::zeros(n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve_vec(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        if !inv.is_finite() {
            return Err(Error::Singular { pivot: n - 1 });
        }
        Ok(inv)
    }

    pub fn determinant(&self) -> Complex64 {
        let n = self.n;
        let mut det: Complex64 = (0..n).map(|i| self.lu[i * n + i]).product();
        // Parity of the permutation via cycle decomposition.
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                j = self.perm[j];
                len += 1;
            }
            if len % 2 == 0 {
                det = -det;
            }
        }
        det
    }

    /// 1-norm condition number `‖a‖₁‖a⁻¹‖₁`, computed from the explicit inverse.
    pub fn condition_number(&self) -> Result<f64> {
        let inv = self.inverse()?;
        Ok(self.norm1 * norm1_of(self.n, inv.as_slice()))
    }
}

/// Inverse together with its 1-norm condition number.
pub fn inverse_with_condition(a: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let lu = Lu::factor(a)?;
    let inv = lu.inverse()?;
    let cond = lu.norm1 * norm1_of(a.dim(), inv.as_slice());
    Ok((inv, cond))
}
