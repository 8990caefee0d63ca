//! Hermitian eigensolver: Householder reduction to tridiagonal form followed
//! by the implicit-shift QL iteration.
//!
//! The reduction works on split real/imaginary row-major buffers and touches
//! only the lower triangle. The rank-2 update of step `k` is deferred and fused
//! with the matrix-vector product of step `k + 1`, so each step streams the
//! trailing block through memory once.

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::hermitian::HermitianMatrix;
use super::matrix::ComplexMatrix;

/// Eigen-decomposition `a = U diag(values) U*` with ascending `values`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Iteration budget per unit of dimension for the QL phase.
pub const QL_SWEEPS_PER_DIM: usize = 64;

pub fn herm_eigen(a: &HermitianMatrix) -> Result<Eigen> {
    let n = a.dim();
    let (re, im) = split(a.as_matrix());
    let tri = tridiagonalize(n, re, im, true);
    let (d, mut offdiag, phases) = tri.real_form();
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let mut d = d;
    tql(&mut d, &mut offdiag, Some(&mut z))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    let values: Vec<f64> = order.iter().map(|&c| d[c]).collect();

    // U = Q · D · Z with columns permuted into ascending order.
    let mut u = ComplexMatrix::from_fn(n, |i, c| phases[i] * z[i * n + order[c]]);
    for (k, refl) in tri.reflectors.iter().enumerate().rev() {
        refl.apply_left(&mut u, k + 1);
    }
    Ok(Eigen { values, vectors: u })
}

/// Ascending eigenvalues only.
pub fn eigenvalues_of(a: &HermitianMatrix) -> Result<Vec<f64>> {
    let (re, im) = split(a.as_matrix());
    eigenvalues_split(a.dim(), re, im)
}

/// Ascending eigenvalues of the Hermitian matrix whose lower triangle is given
/// by split row-major buffers. The upper triangle is never read.
pub fn eigenvalues_split(n: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Vec<f64>> {
    assert!(n >= 1 && re.len() == n * n && im.len() == n * n);
    let tri = tridiagonalize(n, re, im, false);
    let (mut d, mut offdiag, _) = tri.real_form();
    tql(&mut d, &mut offdiag, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn split(a: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    let re = a.as_slice().iter().map(|z| z.re).collect();
    let im = a.as_slice().iter().map(|z| z.im).collect();
    (re, im)
}

/// `H = I − tau·v v*` acting on indices `offset..n`.
struct Reflector {
    v: Vec<Complex64>,
    tau: f64,
}

impl Reflector {
    fn apply_left(&self, u: &mut ComplexMatrix, offset: usize) {
        if self.tau == 0.0 {
            return;
        }
        let n = u.dim();
        let mut s = vec![Complex64::new(0.0, 0.0); n];
        for (r, vr) in self.v.iter().enumerate() {
            let row = u.row(offset + r);
            let cv = vr.conj();
            for (acc, &x) in s.iter_mut().zip(row) {
                *acc += cv * x;
            }
        }
        for (r, vr) in self.v.iter().enumerate() {
            let f = *vr * self.tau;
            let row = &mut u.as_mut_slice()[(offset + r) * n..(offset + r + 1) * n];
            for (x, &acc) in row.iter_mut().zip(&s) {
                *x -= f * acc;
            }
        }
    }
}

struct Tridiagonal {
    diag: Vec<f64>,
    sub: Vec<Complex64>,
    reflectors: Vec<Reflector>,
}

impl Tridiagonal {
    /// Real symmetric form `S = D* T D` with nonnegative off-diagonal.
    /// Returns the diagonal, the off-diagonal padded with a trailing zero, and `D`.
    fn real_form(&self) -> (Vec<f64>, Vec<f64>, Vec<Complex64>) {
        let n = self.diag.len();
        let mut phases = vec![Complex64::new(1.0, 0.0); n];
        let mut off = vec![0.0; n];
        for k in 0..n.saturating_sub(1) {
            let e = self.sub[k];
            let r = e.norm();
            off[k] = r;
            phases[k + 1] = if r > 0.0 { phases[k] * (e / r) } else { phases[k] };
        }
        (self.diag.clone(), off, phases)
    }
}

fn tridiagonalize(n: usize, mut re: Vec<f64>, mut im: Vec<f64>, keep: bool) -> Tridiagonal {
    let mut diag = vec![0.0; n];
    let mut sub = Vec::with_capacity(n.saturating_sub(1));
    let mut reflectors = Vec::new();

    // Deferred update A ← A − vp wp* − wp vp*, active on the trailing block.
    let mut vp_re = vec![0.0; n];
    let mut vp_im = vec![0.0; n];
    let mut wp_re = vec![0.0; n];
    let mut wp_im = vec![0.0; n];
    let mut pending = false;

    let mut v_re = vec![0.0; n];
    let mut v_im = vec![0.0; n];
    let mut p_re = vec![0.0; n];
    let mut p_im = vec![0.0; n];

    for k in 0..n.saturating_sub(1) {
        if pending {
            for i in k..n {
                let idx = i * n + k;
                re[idx] -= vp_re[i] * wp_re[k] + vp_im[i] * wp_im[k] + wp_re[i] * vp_re[k] + wp_im[i] * vp_im[k];
                im[idx] -= vp_im[i] * wp_re[k] - vp_re[i] * wp_im[k] + wp_im[i] * vp_re[k] - wp_re[i] * vp_im[k];
            }
            im[k * n + k] = 0.0;
        }
        diag[k] = re[k * n + k];

        // Reflector for the column below the diagonal.
        let x0 = Complex64::new(re[(k + 1) * n + k], im[(k + 1) * n + k]);
        let mut tail = 0.0;
        for i in k + 2..n {
            tail += re[i * n + k].powi(2) + im[i * n + k].powi(2);
        }
        let tau;
        if tail == 0.0 {
            sub.push(x0);
            tau = 0.0;
            v_re[k + 1..].iter_mut().for_each(|x| *x = 0.0);
            v_im[k + 1..].iter_mut().for_each(|x| *x = 0.0);
        } else {
            let xnorm = (x0.norm_sqr() + tail).sqrt();
            let a0 = x0.norm();
            let phase = if a0 > 0.0 { x0 / a0 } else { Complex64::new(1.0, 0.0) };
            let beta = -phase * xnorm;
            let v0 = x0 - beta;
            v_re[k + 1] = v0.re;
            v_im[k + 1] = v0.im;
            for i in k + 2..n {
                v_re[i] = re[i * n + k];
                v_im[i] = im[i * n + k];
            }
            tau = 2.0 / (v0.norm_sqr() + tail);
            sub.push(beta);
        }

        // Fused pass: apply the deferred update to the trailing block and
        // accumulate p = A v using only the lower triangle.
        let lo = k + 1;
        p_re[lo..].iter_mut().for_each(|x| *x = 0.0);
        p_im[lo..].iter_mut().for_each(|x| *x = 0.0);
        for i in lo..n {
            let row_re = &mut re[i * n + lo..i * n + i + 1];
            let row_im = &mut im[i * n + lo..i * n + i + 1];
            let len = i - lo;
            if pending {
                let (vr, vi, wr, wi) = (vp_re[i], vp_im[i], wp_re[i], wp_im[i]);
                update_row(
                    &mut row_re[..=len],
                    &mut row_im[..=len],
                    (vr, vi, wr, wi),
                    (&vp_re[lo..=i], &vp_im[lo..=i], &wp_re[lo..=i], &wp_im[lo..=i]),
                );
                row_im[len] = 0.0;
            }
            let (vr_i, vi_i) = (v_re[i], v_im[i]);
            let (acc_re, acc_im) = row_matvec(
                &row_re[..len],
                &row_im[..len],
                (&v_re[lo..i], &v_im[lo..i]),
                (vr_i, vi_i),
                (&mut p_re[lo..i], &mut p_im[lo..i]),
            );
            let a_ii = row_re[len];
            p_re[i] += acc_re + a_ii * vr_i;
            p_im[i] += acc_im + a_ii * vi_i;
        }

        if tau == 0.0 {
            for i in lo..n {
                wp_re[i] = 0.0;
                wp_im[i] = 0.0;
                vp_re[i] = 0.0;
                vp_im[i] = 0.0;
            }
        } else {
            // w = tau p − (tau²/2)(v* p) v
            let mut vp_dot = Complex64::new(0.0, 0.0);
            for i in lo..n {
                vp_dot += Complex64::new(v_re[i], -v_im[i]) * Complex64::new(p_re[i], p_im[i]);
            }
            let kcoef = vp_dot * (0.5 * tau * tau);
            for i in lo..n {
                let v = Complex64::new(v_re[i], v_im[i]);
                let w = Complex64::new(p_re[i], p_im[i]) * tau - kcoef * v;
                wp_re[i] = w.re;
                wp_im[i] = w.im;
                vp_re[i] = v.re;
                vp_im[i] = v.im;
            }
        }
        pending = true;

        if keep {
            let v = (lo..n).map(|i| Complex64::new(v_re[i], v_im[i])).collect();
            reflectors.push(Reflector { v, tau });
        }
    }

    let last = n - 1;
    let mut d_last = re[last * n + last];
    if pending {
        d_last -= 2.0 * (vp_re[last] * wp_re[last] + vp_im[last] * wp_im[last]);
    }
    diag[last] = d_last;

    Tridiagonal { diag, sub, reflectors }
}

/// `row[j] −= vp_i·conj(wp_j) + wp_i·conj(vp_j)` for all `j` in the slice.
#[inline]
fn update_row(
    row_re: &mut [f64],
    row_im: &mut [f64],
    (vr, vi, wr, wi): (f64, f64, f64, f64),
    (vpr, vpi, wpr, wpi): (&[f64], &[f64], &[f64], &[f64]),
) {
    let len = row_re.len();
    let (row_im, vpr, vpi, wpr, wpi) = (&mut row_im[..len], &vpr[..len], &vpi[..len], &wpr[..len], &wpi[..len]);
    for j in 0..len {
        row_re[j] -= vr * wpr[j] + vi * wpi[j] + wr * vpr[j] + wi * vpi[j];
        row_im[j] -= vi * wpr[j] - vr * wpi[j] + wi * vpr[j] - wr * vpi[j];
    }
}

/// Returns `Σ_j a_ij v_j` over the strict lower part of row `i` and adds
/// `conj(a_ij)·v_i` into `p_j`.
#[inline]
fn row_matvec(
    a_re: &[f64],
    a_im: &[f64],
    (v_re, v_im): (&[f64], &[f64]),
    (vr_i, vi_i): (f64, f64),
    (p_re, p_im): (&mut [f64], &mut [f64]),
) -> (f64, f64) {
    let len = a_re.len();
    let (a_im, v_re, v_im, p_re, p_im) = (&a_im[..len], &v_re[..len], &v_im[..len], &mut p_re[..len], &mut p_im[..len]);
    let mut sr = [0.0f64; 4];
    let mut si = [0.0f64; 4];
    let chunks = len / 4 * 4;
    let mut j = 0;
    while j < chunks {
        for l in 0..4 {
            let (ar, ai) = (a_re[j + l], a_im[j + l]);
            let (br, bi) = (v_re[j + l], v_im[j + l]);
            sr[l] += ar * br - ai * bi;
            si[l] += ar * bi + ai * br;
            p_re[j + l] += ar * vr_i + ai * vi_i;
            p_im[j + l] += ar * vi_i - ai * vr_i;
        }
        j += 4;
    }
    let mut tr = (sr[0] + sr[1]) + (sr[2] + sr[3]);
    let mut ti = (si[0] + si[1]) + (si[2] + si[3]);
    for j in chunks..len {
        let (ar, ai) = (a_re[j], a_im[j]);
        tr += ar * v_re[j] - ai * v_im[j];
        ti += ar * v_im[j] + ai * v_re[j];
        p_re[j] += ar * vr_i + ai * vi_i;
        p_im[j] += ar * vi_i - ai * vr_i;
    }
    (tr, ti)
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix.
///
/// `e[k]` couples `k` and `k + 1`; `e[n-1]` must be zero. If `z` is given
/// (row-major `n×n`), its columns are rotated along with the iteration.
fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    let cap = QL_SWEEPS_PER_DIM * n.max(1);
    let mut total = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            total += 1;
            if total > cap {
                return Err(Error::EigenNonConvergence { iterations: total - 1 });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for row in z.chunks_exact_mut(n) {
                        let f = row[i + 1];
                        row[i + 1] = s * row[i] + c * f;
                        row[i] = c * row[i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
