//! Certified fixed-point solver for `b·G = 1 + η(G)·G` on the operator upper
//! half-plane, with matricial amplification and Fréchet derivatives.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{i_identity, inverse_with_condition, ComplexMatrix, HermitianMatrix, Lu};
use crate::covariance::{CovarianceMap, LinearMap, MatrixMap, PositivityClass};
use crate::error::{Error, Result};

/// Stopping and start-up parameters for the fixed-point iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Target for `‖Δ(w)‖ / γ`, where `γ` is the smallest eigenvalue of `Im(b)`.
    /// Targets below the rounding floor are relaxed to it, see
    /// [`SolveDiagnostics::floor_limited`].
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Start of the iteration; `None` means `−i·1`.
    #[serde(skip)]
    pub initial_point: Option<ComplexMatrix>,
    /// Approach points close to the real axis through a ladder of larger
    /// imaginary shifts, reusing each solution as the next starting point.
    /// Off by default: the contraction rate at the target point governs the
    /// iteration count, so the ladder stages are mostly overhead.
    pub continuation: bool,
    /// Iterations to continue after the tolerance is met, keeping the iterate
    /// with the smallest residual.
    pub extra_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol_residual: 1e-12, max_iter: 10_000, initial_point: None, continuation: false, extra_iterations: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || !self.tol_residual.is_finite() {
            return Err(Error::InvalidInput(format!("tol_residual must be positive, got {}", self.tol_residual)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        if let Some(w0) = &self.initial_point {
            let hi = w0.im_part().eigenvalues()?.last().copied().unwrap_or(0.0);
            if !(hi < 0.0) {
                return Err(Error::InvalidInput(
                    "initial point must lie in the lower half-plane (Im(w0) negative definite)".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_residual = tol;
        self
    }

    pub fn with_initial_point(mut self, w0: ComplexMatrix) -> Self {
        self.initial_point = Some(w0);
        self
    }
}

/// Per-solve diagnostic record.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    /// Smallest eigenvalue of `Im(b)`.
    pub gamma: f64,
    /// 1-norm condition number of the final `b − η(w)`.
    pub condition: f64,
    /// `(iteration, cheap residual)` at iterations 1, 2, 4, 8, ...
    pub residual_history: Vec<(usize, f64)>,
    /// Number of continuation stages run before the target point.
    pub continuation_stages: usize,
    /// The tolerance was below the rounding floor and the returned residual
    /// is the floor-limited best one rather than `≤ tol·γ`.
    pub floor_limited: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DysonSolution {
    pub w: ComplexMatrix,
    /// `‖b − w⁻¹ − η(w)‖` in operator norm.
    pub residual_norm: f64,
    /// A-posteriori bound on `‖w − G(b)‖`; absent when the residual is too
    /// large to certify.
    pub error_bound: Option<f64>,
    pub iterations: usize,
    pub diagnostics: SolveDiagnostics,
}

impl DysonSolution {
    /// Error bound, or infinity when certification failed.
    pub fn error_or_inf(&self) -> f64 {
        self.error_bound.unwrap_or(f64::INFINITY)
    }
}

/// `Δ_{b,η}(w) = b − w⁻¹ − η(w)`.
pub fn residual(b: &ComplexMatrix, eta: &CovarianceMap, w: &ComplexMatrix) -> Result<ComplexMatrix> {
    b.check_dim(eta.dim())?;
    w.check_dim(eta.dim())?;
    residual_with(b, &|x| eta.eval(x), w)
}

fn residual_with(b: &ComplexMatrix, eta: &dyn Fn(&ComplexMatrix) -> ComplexMatrix, w: &ComplexMatrix) -> Result<ComplexMatrix> {
    let winv = w.inverse()?;
    Ok(b - &winv - eta(w))
}

/// Certified error `‖Im(b)⁻¹‖²·r/(1 − σ)` with `σ = r·‖Im(b)⁻¹‖`, if `σ < 1`.
pub fn certified_error(residual_norm: f64, im_inv_norm: f64) -> Option<f64> {
    let sigma = residual_norm * im_inv_norm;
    (sigma < 1.0).then(|| im_inv_norm * im_inv_norm * residual_norm / (1.0 - sigma))
}

fn lambda_min_im(b: &ComplexMatrix) -> Result<f64> {
    let lo = b.im_part().min_eigenvalue()?;
    if lo > 0.0 {
        Ok(lo)
    } else {
        Err(Error::NotInUpperHalfPlane { min_eigenvalue: lo })
    }
}

/// Below this `γ` (relative to the scale of `b`) continuation is used.
const CONTINUATION_RATIO: f64 = 0.25;

/// Solves the Dyson equation at `b` by the iteration `w ↦ (b − η(w))⁻¹`.
pub fn solve(b: &ComplexMatrix, eta: &CovarianceMap, cfg: &SolverConfig) -> Result<DysonSolution> {
    b.check_dim(eta.dim())?;
    cfg.validate()?;
    if let Some(w0) = &cfg.initial_point {
        w0.check_dim(eta.dim())?;
    }
    let f = |x: &ComplexMatrix| eta.eval(x);
    solve_map(b, &f, cfg)
}

fn solve_map(b: &ComplexMatrix, eta: &dyn Fn(&ComplexMatrix) -> ComplexMatrix, cfg: &SolverConfig) -> Result<DysonSolution> {
    let gamma = lambda_min_im(b)?;
    let m = b.dim();
    let mut start = cfg.initial_point.clone().unwrap_or_else(|| i_identity(m).scale_real(-1.0));
    let mut stages = 0;
    let mut spent = 0;

    if cfg.continuation {
        let scale = 1.0 + b.re_part().spectral_norm()?;
        let top = CONTINUATION_RATIO * scale;
        if gamma < top {
            // Ladder of shifts from `top` down towards γ, halving each time.
            let mut shifts = Vec::new();
            let mut level = top;
            while level > 2.0 * gamma {
                shifts.push(level - gamma);
                level *= 0.5;
            }
            let loose = SolverConfig {
                tol_residual: 1e-6,
                max_iter: cfg.max_iter,
                initial_point: None,
                continuation: false,
                extra_iterations: 0,
            };
            for shift in shifts {
                let bs = b.shift(Complex64::new(0.0, shift));
                match picard(&bs, eta, &start, &loose, gamma + shift) {
                    Ok(sol) => {
                        spent += sol.iterations;
                        stages += 1;
                        start = sol.w;
                    }
                    Err(Error::NonConvergence { iterations, .. }) => {
                        spent += iterations;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let budget = SolverConfig { max_iter: cfg.max_iter.saturating_sub(spent).max(1), ..cfg.clone() };
    let mut sol = picard(b, eta, &start, &budget, gamma).map_err(|e| match e {
        Error::NonConvergence { iterations, last_residual } => {
            Error::NonConvergence { iterations: iterations + spent, last_residual }
        }
        other => other,
    })?;
    sol.iterations += spent;
    sol.diagnostics.continuation_stages = stages;
    Ok(sol)
}

/// Rounding floor of the residual, in units of `ε_mach·(‖b‖ + ‖w⁻¹‖ + ‖η(w)‖)`.
pub const ROUNDING_FLOOR: f64 = 256.0 * f64::EPSILON;

/// Direct residual checks without a 1% improvement before the iteration is
/// considered stalled.
const STALL_CHECKS: usize = 200;

/// Plain iteration from `start` until the residual drops below `tol·γ`.
///
/// When the target lies below what rounding allows, the iteration stalls; the
/// best iterate is then accepted if its residual is within the rounding floor,
/// still with its certified error bound.
fn picard(
    b: &ComplexMatrix,
    eta: &dyn Fn(&ComplexMatrix) -> ComplexMatrix,
    start: &ComplexMatrix,
    cfg: &SolverConfig,
    gamma: f64,
) -> Result<DysonSolution> {
    let target = cfg.tol_residual * gamma;
    let im_inv = 1.0 / gamma;
    let b_scale = b.frobenius_norm();
    let mut history = Vec::new();
    let mut w = start.clone();
    let mut prev: Option<ComplexMatrix> = None;
    let mut best: Option<(ComplexMatrix, f64, usize)> = None;
    let mut best_any: Option<(ComplexMatrix, f64, usize)> = None;
    let mut progress_mark = f64::INFINITY;
    let mut since_progress = 0usize;
    let mut extra_left = cfg.extra_iterations;
    let mut last_residual = f64::INFINITY;

    for it in 1..=cfg.max_iter {
        let mat = b - &eta(&w);
        if let Some(p) = &prev {
            // With w = p⁻¹, the residual at w is b − p − η(w) = mat − p.
            let cheap = (&mat - p).frobenius_norm();
            last_residual = cheap;
            if it.is_power_of_two() {
                history.push((it - 1, cheap));
            }
            let floor = ROUNDING_FLOOR * (b_scale + mat.frobenius_norm() + p.frobenius_norm());
            if cheap <= target.max(floor) || best.is_some() {
                let direct = residual_with(b, eta, &w)?.op_norm();
                last_residual = direct;
                if direct <= target && best.as_ref().map_or(true, |(_, r, _)| direct < *r) {
                    best = Some((w.clone(), direct, it - 1));
                }
                if best_any.as_ref().map_or(true, |(_, r, _)| direct < *r) {
                    best_any = Some((w.clone(), direct, it - 1));
                }
                if direct < 0.99 * progress_mark {
                    progress_mark = direct;
                    since_progress = 0;
                } else {
                    since_progress += 1;
                }
                if let Some((bw, br, bit)) = &best {
                    if extra_left == 0 {
                        return finish(b, eta, bw.clone(), *br, *bit, gamma, im_inv, history, false);
                    }
                    extra_left -= 1;
                } else if since_progress > STALL_CHECKS {
                    break;
                }
            }
        }
        let next = mat.inverse()?;
        prev = Some(mat);
        w = next;
    }
    if let Some((bw, br, bit)) = best {
        return finish(b, eta, bw, br, bit, gamma, im_inv, history, false);
    }
    if let Some((bw, br, bit)) = best_any {
        let scale = b.op_norm() + bw.inverse()?.op_norm() + eta(&bw).op_norm();
        if br <= ROUNDING_FLOOR * scale {
            return finish(b, eta, bw, br, bit, gamma, im_inv, history, true);
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iter, last_residual })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    b: &ComplexMatrix,
    eta: &dyn Fn(&ComplexMatrix) -> ComplexMatrix,
    w: ComplexMatrix,
    residual_norm: f64,
    iterations: usize,
    gamma: f64,
    im_inv: f64,
    residual_history: Vec<(usize, f64)>,
    floor_limited: bool,
) -> Result<DysonSolution> {
    let mat = b - &eta(&w);
    let condition = inverse_with_condition(&mat).map(|(_, c)| c).unwrap_or(f64::INFINITY);
    Ok(DysonSolution {
        error_bound: certified_error(residual_norm, im_inv),
        w,
        residual_norm,
        iterations,
        diagnostics: SolveDiagnostics { gamma, condition, residual_history, continuation_stages: 0, floor_limited },
    })
}

/// Solves the amplified equation for `η^{(k)}` at `b ∈ M_k(M_m(ℂ))`.
///
/// Level 2 requires a map declared at least 2-positive. Higher levels are
/// allowed for maps declared 2-positive but only CP maps are guaranteed.
pub fn solve_amplified(b: &ComplexMatrix, eta: &CovarianceMap, k: usize, cfg: &SolverConfig) -> Result<DysonSolution> {
    let m = eta.dim();
    if k == 0 {
        return Err(Error::InvalidInput("amplification level must be at least 1".into()));
    }
    b.check_dim(k * m)?;
    if k == 1 {
        return solve(b, eta, cfg);
    }
    let class = eta.positivity_class();
    if class == PositivityClass::PositiveOnly {
        return Err(Error::NotKPositive { declared: class.name(), level: k });
    }
    if k > class.guaranteed_level() {
        log::warn!("amplification level {k} exceeds the declared positivity ({class}); results are unverified");
    }
    cfg.validate()?;
    if let Some(w0) = &cfg.initial_point {
        w0.check_dim(k * m)?;
    }
    let f = |x: &ComplexMatrix| eta.eval_amplified(x, k);
    solve_map(b, &f, cfg)
}

/// Value of a derivative or difference together with its certified error.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedMatrix {
    pub value: ComplexMatrix,
    /// Bound on the distance to the exact value, when certification succeeded.
    pub error_bound: Option<f64>,
}

/// `(DG_η)(b)h` through the amplified solve at `[[b, r·h], [0, b]]`.
pub fn frechet_derivative(b: &ComplexMatrix, eta: &CovarianceMap, h: &ComplexMatrix, cfg: &SolverConfig) -> Result<ComplexMatrix> {
    Ok(frechet_derivative_certified(b, eta, h, cfg)?.value)
}

/// As [`frechet_derivative`], also returning the certified error.
pub fn frechet_derivative_certified(
    b: &ComplexMatrix,
    eta: &CovarianceMap,
    h: &ComplexMatrix,
    cfg: &SolverConfig,
) -> Result<CertifiedMatrix> {
    let m = eta.dim();
    b.check_dim(m)?;
    h.check_dim(m)?;
    let gamma = lambda_min_im(b)?;
    let hn = h.op_norm();
    if hn == 0.0 {
        return Ok(CertifiedMatrix { value: ComplexMatrix::zeros(m), error_bound: Some(0.0) });
    }
    // ‖r·h‖ = γ, half of the admissible 2γ.
    let r = gamma / hn;
    upper_triangular_block(b, b, &h.scale_real(r), r, eta, cfg)
}

/// `G(b₁) − G(b₀)` read off the amplified solve at `[[b₀, r(b₁ − b₀)], [0, b₁]]`.
pub fn difference_via_amplification(
    b0: &ComplexMatrix,
    b1: &ComplexMatrix,
    eta: &CovarianceMap,
    cfg: &SolverConfig,
) -> Result<ComplexMatrix> {
    Ok(difference_via_amplification_certified(b0, b1, eta, cfg)?.value)
}

pub fn difference_via_amplification_certified(
    b0: &ComplexMatrix,
    b1: &ComplexMatrix,
    eta: &CovarianceMap,
    cfg: &SolverConfig,
) -> Result<CertifiedMatrix> {
    let m = eta.dim();
    b0.check_dim(m)?;
    b1.check_dim(m)?;
    let g0 = lambda_min_im(b0)?;
    let g1 = lambda_min_im(b1)?;
    let d = b1 - b0;
    let dn = d.op_norm();
    if dn == 0.0 {
        return Ok(CertifiedMatrix { value: ComplexMatrix::zeros(m), error_bound: Some(0.0) });
    }
    // ‖r·d‖² = γ₀γ₁, a quarter of the admissible 4γ₀γ₁.
    let r = (g0 * g1).sqrt() / dn;
    upper_triangular_block(b0, b1, &d.scale_real(r), r, eta, cfg)
}

fn upper_triangular_block(
    b0: &ComplexMatrix,
    b1: &ComplexMatrix,
    corner: &ComplexMatrix,
    r: f64,
    eta: &CovarianceMap,
    cfg: &SolverConfig,
) -> Result<CertifiedMatrix> {
    let m = eta.dim();
    let big = ComplexMatrix::block2(b0, corner, &ComplexMatrix::zeros(m), b1);
    let amp_cfg = SolverConfig { initial_point: None, ..cfg.clone() };
    let sol = solve_amplified(&big, eta, 2, &amp_cfg)?;
    let value = sol.w.block(m, 0, 1).scale_real(1.0 / r);
    Ok(CertifiedMatrix { value, error_bound: sol.error_bound.map(|e| e / r) })
}

/// Matrix of `X ↦ (b − η(G))X − η(X)G` in row-major vectorization.
fn derivative_system(eta: &CovarianceMap, g: &ComplexMatrix, ginv: &ComplexMatrix) -> ComplexMatrix {
    let m = eta.dim();
    let n = m * m;
    let mut sys = ComplexMatrix::zeros(n);
    for k in 0..m {
        for l in 0..m {
            let mut e = ComplexMatrix::zeros(m);
            e[(k, l)] = Complex64::new(1.0, 0.0);
            let img = &(ginv * &e) - &(&eta.eval(&e) * g);
            let col = k * m + l;
            for (row, z) in img.as_slice().iter().enumerate() {
                sys[(row, col)] = *z;
            }
        }
    }
    sys
}

/// `(DG_η)(b)h` from the linearized equation `(b − η(G))X − η(X)G = −hG`.
pub fn frechet_derivative_linear(
    b: &ComplexMatrix,
    eta: &CovarianceMap,
    h: &ComplexMatrix,
    cfg: &SolverConfig,
) -> Result<ComplexMatrix> {
    let m = eta.dim();
    b.check_dim(m)?;
    h.check_dim(m)?;
    let g = solve(b, eta, cfg)?.w;
    let ginv = b - &eta.eval(&g);
    let lu = Lu::factor(&derivative_system(eta, &g, &ginv))?;
    let rhs = -(h * &g);
    let x = lu.solve_vec(rhs.as_slice());
    ComplexMatrix::from_vec(m, x).map_err(|_| Error::Singular { pivot: m * m - 1 })
}

/// The full derivative `DG_η(b)` as a linear map, from the linearized equation.
pub fn derivative_map(b: &ComplexMatrix, eta: &CovarianceMap, g: &ComplexMatrix) -> Result<LinearMap> {
    let m = eta.dim();
    b.check_dim(m)?;
    g.check_dim(m)?;
    let ginv = b - &eta.eval(g);
    let lu = Lu::factor(&derivative_system(eta, g, &ginv))?;
    let mut failed = false;
    let map = LinearMap::from_fn(m, |e| {
        let rhs = -(e * g);
        let x = lu.solve_vec(rhs.as_slice());
        ComplexMatrix::from_vec(m, x).unwrap_or_else(|_| {
            failed = true;
            ComplexMatrix::zeros(m)
        })
    });
    if failed {
        return Err(Error::Singular { pivot: m * m - 1 });
    }
    Ok(map)
}

/// `Im(w)` is negative definite.
pub fn in_lower_half_plane(w: &ComplexMatrix) -> Result<bool> {
    let hi = HermitianMatrix::project(&w.im_part()).eigenvalues()?;
    Ok(hi.last().copied().unwrap_or(0.0) < 0.0)
}

/// `DG_η(b)` tabulated on the matrix units through amplified solves, with a
/// certified bound on the operator-norm error of the whole map: the sum of
/// the per-unit errors, since every entry of a contraction has modulus ≤ 1.
pub fn derivative_map_certified(b: &ComplexMatrix, eta: &CovarianceMap, cfg: &SolverConfig) -> Result<(LinearMap, f64)> {
    let m = eta.dim();
    b.check_dim(m)?;
    let mut images = Vec::with_capacity(m * m);
    let mut error = 0.0;
    for k in 0..m {
        for l in 0..m {
            let mut e = ComplexMatrix::zeros(m);
            e[(k, l)] = Complex64::new(1.0, 0.0);
            let c = frechet_derivative_certified(b, eta, &e, cfg)?;
            error += c.error_bound.unwrap_or(f64::INFINITY);
            images.push(c.value);
        }
    }
    let mut next = images.into_iter();
    let map = LinearMap::from_fn(m, |_| next.next().expect("one image per matrix unit"));
    Ok((map, error))
}
