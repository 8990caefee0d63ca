//! Dependence of Dyson solutions on the covariance: `Ψ_η`, subordination,
//! local comparison of nearby covariances and the Burgers equation along
//! paths `t ↦ η_t`.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{ComplexMatrix, HalfPlanePoint};
use crate::covariance::{CovarianceMap, CovariancePath, LinearMap, MatrixMap, NormEstimate};
use crate::dyson::{derivative_map_certified, frechet_derivative, in_lower_half_plane, solve, SolverConfig};
use crate::error::{Error, Result};

/// Random restarts used when estimating norms of linear maps here.
pub const NORM_RESTARTS: usize = 8;

/// `Ψ_η(w) = w⁻¹ + η(w)` for `w` in the lower half-plane.
pub fn psi(eta: &CovarianceMap, w: &ComplexMatrix) -> Result<ComplexMatrix> {
    w.check_dim(eta.dim())?;
    if !in_lower_half_plane(w)? {
        return Err(Error::InvalidInput("psi requires Im(w) negative definite".into()));
    }
    Ok(&w.inverse()? + &eta.eval(w))
}

/// Norm of `η₁ − η₀` as a map on `M_m(ℂ)`.
pub fn covariance_gap(eta0: &CovarianceMap, eta1: &CovarianceMap, seed: u64) -> Result<NormEstimate> {
    if eta0.dim() != eta1.dim() {
        return Err(Error::DimensionMismatch { expected: eta0.dim(), actual: eta1.dim() });
    }
    Ok(eta1.to_linear().sub(&eta0.to_linear()).norm_estimate(NORM_RESTARTS, seed))
}

/// Radii of the subordination discs, `0 < σ′ < σ < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubordinationParams {
    pub sigma_prime: f64,
    pub sigma: f64,
}

impl Default for SubordinationParams {
    fn default() -> Self {
        Self { sigma_prime: 0.25, sigma: 0.5 }
    }
}

impl SubordinationParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.sigma_prime && self.sigma_prime < self.sigma && self.sigma < 1.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 < sigma' < sigma < 1, got sigma' = {}, sigma = {}",
                self.sigma_prime, self.sigma
            )));
        }
        Ok(())
    }

    /// Largest admissible `‖η₁ − η₀‖` at scale `γ`: `(1 − σ′)(σ − σ′)γ²`.
    pub fn eta_threshold(&self, gamma: f64) -> f64 {
        (1.0 - self.sigma_prime) * (self.sigma - self.sigma_prime) * gamma * gamma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubordinationResult {
    /// `ω(b) = Ψ_{η₀}(G_{η₁}(b))`.
    pub omega_b: ComplexMatrix,
    /// `‖ω(b) − b‖`.
    pub deviation: f64,
    /// `‖G_{η₀}(ω(b)) − G_{η₁}(b)‖`.
    pub consistency: f64,
    /// `‖η₁ − η₀‖ / ((1 − σ′)γ)` with the lower norm estimate.
    pub deviation_bound: f64,
    /// Numerical uncertainty of `deviation` coming from the solve at `b`.
    pub deviation_slack: f64,
    /// Sum of the certified errors of both solves.
    pub solver_error: f64,
    pub eta_gap: NormEstimate,
    /// Whether `b` and `η₁ − η₀` satisfy the hypotheses of the deviation bound.
    pub admissible: bool,
    pub warning: Option<String>,
}

/// Subordination function of `η₁` over `η₀` around the centre `b₀`, evaluated
/// at `b`. Outside the admissible region a warning is attached and the
/// identity `G_{η₀}(ω(b)) = G_{η₁}(b)` is still checked.
pub fn subordinate(
    b0: &HalfPlanePoint,
    b: &ComplexMatrix,
    eta0: &CovarianceMap,
    eta1: &CovarianceMap,
    params: &SubordinationParams,
    cfg: &SolverConfig,
) -> Result<SubordinationResult> {
    params.validate()?;
    let m = eta0.dim();
    b0.matrix().check_dim(m)?;
    b.check_dim(m)?;
    let gamma = b0.gamma();
    let eta_gap = covariance_gap(eta0, eta1, 0)?;

    let mut problems = Vec::new();
    let dist = (b - b0.matrix()).op_norm();
    if dist > params.sigma_prime * gamma {
        problems.push(format!("‖b − b0‖ = {dist:.3e} exceeds sigma'·gamma = {:.3e}", params.sigma_prime * gamma));
    }
    let threshold = params.eta_threshold(gamma);
    if eta_gap.upper > threshold {
        problems.push(format!("‖eta1 − eta0‖ ≤ {:.3e} exceeds the admissible {threshold:.3e}", eta_gap.upper));
    }
    let warning = (!problems.is_empty()).then(|| {
        let w = format!("outside the subordination domain: {}", problems.join("; "));
        log::warn!("{w}");
        w
    });

    let s1 = solve(b, eta1, cfg)?;
    let omega = psi(eta0, &s1.w)?;
    let s0 = solve(&omega, eta0, cfg)?;
    let deviation = (&omega - b).op_norm();
    let consistency = (&s0.w - &s1.w).op_norm();
    Ok(SubordinationResult {
        deviation,
        consistency,
        deviation_bound: eta_gap.lower / ((1.0 - params.sigma_prime) * gamma),
        deviation_slack: s1.residual_norm + eta_gap.upper * s1.error_or_inf(),
        solver_error: s0.error_or_inf() + s1.error_or_inf(),
        eta_gap,
        admissible: warning.is_none(),
        warning,
        omega_b: omega,
    })
}

/// `Dω(b₀)` for `ω = Ψ_{η₀} ∘ G_{η₁}`, by the chain rule
/// `h ↦ −G⁻¹(DG h)G⁻¹ + η₀(DG h)` with `G = G_{η₁}(b₀)`, together with a
/// bound on its error inherited from the derivative map.
pub fn subordination_jacobian(
    b0: &ComplexMatrix,
    eta0: &CovarianceMap,
    eta1: &CovarianceMap,
    cfg: &SolverConfig,
) -> Result<(LinearMap, f64)> {
    let g = solve(b0, eta1, cfg)?.w;
    let ginv = g.inverse()?;
    let (dg, dg_error) = derivative_map_certified(b0, eta1, cfg)?;
    let m = eta0.dim();
    let map = LinearMap::from_fn(m, |h| {
        let x = dg.eval(h);
        &eta0.eval(&x) - &(&(&ginv * &x) * &ginv)
    });
    let gi = ginv.op_norm();
    Ok((map, (gi * gi + eta0.operator_norm()) * dg_error))
}

/// Central difference `(ω(b + δh) − ω(b − δh))/(2δ)` of the subordination
/// function.
pub fn subordination_derivative_fd(
    b: &ComplexMatrix,
    h: &ComplexMatrix,
    eta0: &CovarianceMap,
    eta1: &CovarianceMap,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<ComplexMatrix> {
    let omega = |x: &ComplexMatrix| -> Result<ComplexMatrix> { psi(eta0, &solve(x, eta1, cfg)?.w) };
    let step = h.scale_real(delta);
    let plus = omega(&(b + &step))?;
    let minus = omega(&(b - &step))?;
    Ok((&plus - &minus).scale_real(0.5 / delta))
}

/// Gap `‖DG_{η₁}(b)h − DG_{η₀}(ω(b))(Dω(b)h)‖` with `Dω(b)h` from central
/// differences.
pub fn subordination_chain_rule_gap(
    b: &ComplexMatrix,
    h: &ComplexMatrix,
    eta0: &CovarianceMap,
    eta1: &CovarianceMap,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let lhs = frechet_derivative(b, eta1, h, cfg)?;
    let omega = psi(eta0, &solve(b, eta1, cfg)?.w)?;
    let domega = subordination_derivative_fd(b, h, eta0, eta1, delta, cfg)?;
    let rhs = frechet_derivative(&omega, eta0, &domega, cfg)?;
    Ok((&lhs - &rhs).op_norm())
}

/// Result of comparing `G_{η₀}` and `G_{η₁}` at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalComparison {
    /// `‖G_{η₁}(b) − G_{η₀}(b)‖`.
    pub gap_g: f64,
    /// Lower estimate of `‖DG_{η₁}(b) − DG_{η₀}(b)‖` over all unit directions.
    pub gap_dg: f64,
    /// `‖η₁ − η₀‖ / ((1 − σ₀)γ³)`.
    pub bound_g: f64,
    /// Optimized derivative comparison bound.
    pub bound_dg: f64,
    /// Certified solver error entering `gap_g`.
    pub slack_g: f64,
    /// Certified error of the two derivative maps entering `gap_dg`.
    pub slack_dg: f64,
    pub eta_gap: NormEstimate,
    pub gamma: f64,
    pub sigma0: f64,
}

/// Default `σ₀` for [`local_comparison`].
pub const DEFAULT_SIGMA0: f64 = 0.125;

/// `min over 0 < σ′ < σ < 1 with σ₀ = (1 − σ′)(σ − σ′)` of
/// `(1 − σ + cσ′)/(σ′(1 − σ′)(1 − σ)³)`, with `c = 27/4`.
pub fn derivative_comparison_constant(sigma0: f64) -> f64 {
    const C: f64 = 27.0 / 4.0;
    let f = |sp: f64| {
        let s = sp + sigma0 / (1.0 - sp);
        (1.0 - s + C * sp) / (sp * (1.0 - sp) * (1.0 - s).powi(3))
    };
    // σ < 1 exactly when σ′ < 1 − √σ₀.
    let hi = 1.0 - sigma0.sqrt();
    let n = 4000;
    let (mut best_x, mut best) = (hi * 0.5, f64::INFINITY);
    for i in 1..n {
        let x = hi * i as f64 / n as f64;
        let v = f(x);
        if v < best {
            best = v;
            best_x = x;
        }
    }
    let (mut a, mut b) = ((best_x - hi / n as f64).max(0.0), (best_x + hi / n as f64).min(hi));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.min(f(0.5 * (a + b)))
}

/// Compares the solutions for two nearby covariances at `b`. Declined unless
/// `‖η₁ − η₀‖ ≤ σ₀γ²`.
pub fn local_comparison(
    b: &HalfPlanePoint,
    eta0: &CovarianceMap,
    eta1: &CovarianceMap,
    sigma0: f64,
    cfg: &SolverConfig,
) -> Result<LocalComparison> {
    if !(0.0 < sigma0 && sigma0 < 1.0) {
        return Err(Error::InvalidInput(format!("sigma0 must lie in (0, 1), got {sigma0}")));
    }
    let gamma = b.gamma();
    let eta_gap = covariance_gap(eta0, eta1, 1)?;
    let limit = sigma0 * gamma * gamma;
    if eta_gap.upper > limit {
        return Err(Error::Precondition(format!(
            "‖eta1 − eta0‖ may reach {:.3e}, above sigma0·gamma² = {limit:.3e}",
            eta_gap.upper
        )));
    }
    let s0 = solve(b.matrix(), eta0, cfg)?;
    let s1 = solve(b.matrix(), eta1, cfg)?;
    let (d0, e0) = derivative_map_certified(b.matrix(), eta0, cfg)?;
    let (d1, e1) = derivative_map_certified(b.matrix(), eta1, cfg)?;
    let gap_dg = d1.sub(&d0).norm_estimate(NORM_RESTARTS, 2).lower;
    Ok(LocalComparison {
        gap_g: (&s1.w - &s0.w).op_norm(),
        gap_dg,
        bound_g: eta_gap.lower / ((1.0 - sigma0) * gamma.powi(3)),
        bound_dg: derivative_comparison_constant(sigma0) * eta_gap.lower / gamma.powi(4),
        slack_g: s0.error_or_inf() + s1.error_or_inf(),
        slack_dg: e0 + e1,
        eta_gap,
        gamma,
        sigma0,
    })
}

/// One `(t, b)` evaluation of the Burgers equation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BurgersSample {
    pub t: f64,
    pub b: ComplexMatrix,
    #[serde(rename = "G_t")]
    pub g_t: ComplexMatrix,
    #[serde(rename = "G_dot")]
    pub g_dot: ComplexMatrix,
    /// `‖Ġ_t − (G_{t+δ} − G_{t−δ})/(2δ)‖`.
    pub fd_check: f64,
    /// The same gap with step `δ/2`.
    pub fd_check_half: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BurgersReport {
    pub samples: Vec<BurgersSample>,
    pub max_fd_check: f64,
    /// `max fd_check` at `δ` over `max fd_check` at `δ/2`; about 4 for a
    /// second-order difference.
    pub halving_ratio: f64,
    pub delta: f64,
}

impl BurgersReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// `Ġ_t(b) = −DG_t(b)(η̇_t(G_t(b)))`.
pub fn burgers_rhs(path: &CovariancePath, t: f64, b: &ComplexMatrix, cfg: &SolverConfig) -> Result<ComplexMatrix> {
    Ok(burgers_point(path, t, b, cfg)?.1)
}

fn burgers_point(
    path: &CovariancePath,
    t: f64,
    b: &ComplexMatrix,
    cfg: &SolverConfig,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (eta, eta_dot) = path.at(t)?;
    let g = solve(b, &eta, cfg)?.w;
    let v = eta_dot.eval(&g);
    let d = frechet_derivative(b, &eta, &v, cfg)?;
    Ok((g, -d))
}

/// Default time step for the difference oracle: `1e-5·max(1, T)` with `T`
/// the largest absolute endpoint of the path interval.
pub fn default_time_step(path: &CovariancePath) -> f64 {
    let (lo, hi) = path.interval();
    1e-5 * lo.abs().max(hi.abs()).max(1.0)
}

/// Evaluates `G_t` and `Ġ_t` on the grid and compares `Ġ_t` with central
/// differences in `t` at steps `δ` and `δ/2`. Times within `δ` of the path
/// ends are rejected.
pub fn burgers_sweep(
    path: &CovariancePath,
    b_grid: &[ComplexMatrix],
    t_grid: &[f64],
    delta: Option<f64>,
    cfg: &SolverConfig,
) -> Result<BurgersReport> {
    let delta = delta.unwrap_or_else(|| default_time_step(path));
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {delta}")));
    }
    let (lo, hi) = path.interval();
    if let Some(t) = t_grid.iter().find(|&&t| !(t - delta >= lo && t + delta <= hi)) {
        return Err(Error::InvalidInput(format!("time {t} is within the difference step of the path ends [{lo}, {hi}]")));
    }
    let jobs: Vec<(f64, &ComplexMatrix)> = t_grid.iter().flat_map(|&t| b_grid.iter().map(move |b| (t, b))).collect();
    let samples: Vec<BurgersSample> = jobs
        .par_iter()
        .map(|&(t, b)| {
            let (g_t, g_dot) = burgers_point(path, t, b, cfg)?;
            let at = |s: f64| -> Result<ComplexMatrix> { Ok(solve(b, &path.at(s)?.0, cfg)?.w) };
            let cd = |d: f64| -> Result<ComplexMatrix> { Ok((&at(t + d)? - &at(t - d)?).scale_real(0.5 / d)) };
            let fd_check = (&g_dot - &cd(delta)?).op_norm();
            let fd_check_half = (&g_dot - &cd(0.5 * delta)?).op_norm();
            Ok(BurgersSample { t, b: b.clone(), g_t, g_dot, fd_check, fd_check_half })
        })
        .collect::<Result<_>>()?;
    let max_fd_check = samples.iter().map(|s| s.fd_check).fold(0.0, f64::max);
    let max_half = samples.iter().map(|s| s.fd_check_half).fold(0.0, f64::max);
    let halving_ratio = if max_half > 0.0 { max_fd_check / max_half } else { f64::INFINITY };
    Ok(BurgersReport { samples, max_fd_check, halving_ratio, delta })
}

/// `sup_b ‖G_{t₀+s}(b) − G_{t₀}(b)‖` for each offset `s`.
pub fn equicontinuity_profile(
    path: &CovariancePath,
    b_grid: &[ComplexMatrix],
    t0: f64,
    offsets: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let eta0 = path.at(t0)?.0;
    let base: Vec<ComplexMatrix> = b_grid.iter().map(|b| Ok(solve(b, &eta0, cfg)?.w)).collect::<Result<_>>()?;
    offsets
        .iter()
        .map(|&s| {
            let eta = path.at(t0 + s)?.0;
            b_grid.iter().zip(&base).try_fold(0.0f64, |acc, (b, g0)| Ok(acc.max((&solve(b, &eta, cfg)?.w - g0).op_norm())))
        })
        .collect()
}
