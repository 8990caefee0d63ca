//! Scalar Cauchy transforms, densities of states and distances between
//! probability measures on the real line.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{ComplexMatrix, HermitianMatrix};
use crate::covariance::{CovarianceMap, PositivityClass};
use crate::dyson::{solve, SolverConfig};
use crate::error::{Error, Result};

/// Tolerance on `Tr ρ = 1` and on negative eigenvalues of a state's density.
pub const STATE_TOL: f64 = 1e-12;

/// A state `φ(b) = Tr(ρ b)` on `M_m(ℂ)` given by a density matrix `ρ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HermitianMatrix", into = "HermitianMatrix")]
pub struct StateFunctional {
    density: HermitianMatrix,
}

impl StateFunctional {
    /// The normalized trace `tr_m`.
    pub fn normalized_trace(m: usize) -> Self {
        Self { density: HermitianMatrix::identity(m).scale_real(1.0 / m as f64) }
    }

    /// Rejects densities that are not positive semidefinite with unit trace.
    pub fn from_density(density: HermitianMatrix) -> Result<Self> {
        let tr = density.as_matrix().trace().re;
        if (tr - 1.0).abs() > STATE_TOL * density.dim() as f64 {
            return Err(Error::InvalidInput(format!("state density must have unit trace, got {tr}")));
        }
        let lo = density.min_eigenvalue()?;
        if lo < -STATE_TOL {
            return Err(Error::InvalidInput(format!("state density must be positive semidefinite, min eigenvalue {lo}")));
        }
        Ok(Self { density })
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn density(&self) -> &HermitianMatrix {
        &self.density
    }

    pub fn apply(&self, b: &ComplexMatrix) -> Complex64 {
        let m = self.dim();
        let rho = self.density.as_matrix();
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                s += rho[(j, i)] * b[(i, j)];
            }
        }
        s
    }
}

impl TryFrom<HermitianMatrix> for StateFunctional {
    type Error = Error;
    fn try_from(h: HermitianMatrix) -> Result<Self> {
        Self::from_density(h)
    }
}

impl From<StateFunctional> for HermitianMatrix {
    fn from(s: StateFunctional) -> Self {
        s.density
    }
}

/// A data pair `(b₀, η)` on `M_m(ℂ)` together with the state used to read
/// scalar quantities off operator-valued ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "DataPairJson", into = "DataPairJson")]
pub struct DataPair {
    b0: HermitianMatrix,
    eta: CovarianceMap,
    phi: StateFunctional,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataPairJson {
    b0: HermitianMatrix,
    eta: CovarianceMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<StateFunctional>,
}

impl TryFrom<DataPairJson> for DataPair {
    type Error = Error;
    fn try_from(j: DataPairJson) -> Result<Self> {
        let m = j.b0.dim();
        DataPair::new(j.b0, j.eta, j.phi.unwrap_or_else(|| StateFunctional::normalized_trace(m)))
    }
}

impl From<DataPair> for DataPairJson {
    fn from(p: DataPair) -> Self {
        DataPairJson { b0: p.b0, eta: p.eta, phi: Some(p.phi) }
    }
}

impl DataPair {
    pub fn new(b0: HermitianMatrix, eta: CovarianceMap, phi: StateFunctional) -> Result<Self> {
        let m = eta.dim();
        if b0.dim() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: b0.dim() });
        }
        if phi.dim() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: phi.dim() });
        }
        if eta.positivity_class() == PositivityClass::PositiveOnly {
            return Err(Error::NotKPositive { declared: eta.positivity_class().name(), level: 2 });
        }
        Ok(Self { b0, eta, phi })
    }

    pub fn with_trace_state(b0: HermitianMatrix, eta: CovarianceMap) -> Result<Self> {
        let m = b0.dim();
        Self::new(b0, eta, StateFunctional::normalized_trace(m))
    }

    /// `m = 1`, `b₀ = 0`, `η = id`: the standard semicircle law.
    pub fn semicircle() -> Self {
        Self::with_trace_state(HermitianMatrix::zeros(1), CovarianceMap::identity(1)).expect("valid fixture")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("data pairs always serialize")
    }

    pub fn dim(&self) -> usize {
        self.eta.dim()
    }

    pub fn b0(&self) -> &HermitianMatrix {
        &self.b0
    }

    pub fn eta(&self) -> &CovarianceMap {
        &self.eta
    }

    pub fn phi(&self) -> &StateFunctional {
        &self.phi
    }

    pub fn with_b0(&self, b0: HermitianMatrix) -> Result<Self> {
        Self::new(b0, self.eta.clone(), self.phi.clone())
    }

    pub fn with_eta(&self, eta: CovarianceMap) -> Result<Self> {
        Self::new(self.b0.clone(), eta, self.phi.clone())
    }

    /// Radius of a disc around `φ(b₀)` expected to carry the spectrum:
    /// `‖b₀‖ + 2√‖η(1)‖`.
    pub fn support_radius(&self) -> Result<f64> {
        Ok(self.b0.spectral_norm()? + 2.0 * self.eta.operator_norm().sqrt())
    }

    /// `φ(b₀)`, the mean of the density of states.
    pub fn mean(&self) -> f64 {
        self.phi.apply(self.b0.as_matrix()).re
    }

    /// Operator `z·1 − b₀`.
    pub fn spectral_point(&self, z: Complex64) -> ComplexMatrix {
        self.b0.as_matrix().scale_real(-1.0).shift(z)
    }
}

/// `𝒢_ρ(z)` with the certified bound on its error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CauchyValue {
    pub value: Complex64,
    /// Bound on `|computed − exact|`; infinite when certification failed.
    pub error: f64,
    pub iterations: usize,
}

/// `𝒢_ρ(z) = φ(G_η(z·1 − b₀))`.
pub fn scalar_cauchy(rho: &DataPair, z: Complex64, cfg: &SolverConfig) -> Result<Complex64> {
    Ok(scalar_cauchy_certified(rho, z, cfg)?.value)
}

pub fn scalar_cauchy_certified(rho: &DataPair, z: Complex64, cfg: &SolverConfig) -> Result<CauchyValue> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput(format!("spectral parameter must lie in the upper half-plane, got {z}")));
    }
    let sol = solve(&rho.spectral_point(z), &rho.eta, cfg)?;
    // States have norm one, so the matrix error bound transfers directly.
    Ok(CauchyValue { value: rho.phi.apply(&sol.w), error: sol.error_or_inf(), iterations: sol.iterations })
}

/// Default number of grid points for densities.
pub const DEFAULT_GRID: usize = 2001;

/// `[φ(b₀) − R, φ(b₀) + R]` with `R = ‖b₀‖ + 2√‖η(1)‖ + 10ε`.
pub fn default_window(rho: &DataPair, epsilon: f64) -> Result<(f64, f64)> {
    let c = rho.mean();
    let r = rho.support_radius()? + 10.0 * epsilon;
    Ok((c - r, c + r))
}

/// Uniform grid of `k ≥ 2` points covering `[lo, hi]`, endpoints included.
pub fn uniform_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let h = (hi - lo) / (k - 1) as f64;
    (0..k).map(|i| if i == k - 1 { hi } else { lo + h * i as f64 }).collect()
}

fn check_window(window: (f64, f64), k: usize, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if k < 2 {
        return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {k}")));
    }
    if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
        return Err(Error::InvalidInput(format!("window must satisfy lo < hi, got {:?}", window)));
    }
    Ok(())
}

/// Grid samples of a smoothed density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub epsilon: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub support_window: (f64, f64),
    /// Largest certified error of the density values, `max error(𝒢)/π`.
    #[serde(default)]
    pub value_error: f64,
}

impl SpectralDensity {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Trapezoid masses of the grid cells, negative parts clipped.
    pub fn cell_masses(&self) -> Vec<f64> {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (0.5 * (t[1] - t[0]) * (v[0] + v[1])).max(0.0))
            .collect()
    }

    /// Trapezoid integral over the window.
    pub fn mass(&self) -> f64 {
        self.cell_masses().iter().sum()
    }

    /// Mass missing from the window, `max(0, 1 − mass)`.
    pub fn tail_mass(&self) -> f64 {
        (1.0 - self.mass()).max(0.0)
    }

    pub fn max_spacing(&self) -> f64 {
        self.grid.windows(2).map(|t| t[1] - t[0]).fold(0.0, f64::max)
    }

    /// CSV with header `t,density`; values are written in shortest
    /// round-trip decimal form.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "density"]).expect("in-memory write");
        for (t, v) in self.grid.iter().zip(&self.values) {
            w.serialize((t, v)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is utf-8")
    }

    /// Parses the CSV layout written by [`SpectralDensity::to_csv`].
    pub fn from_csv(text: &str, epsilon: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::InvalidInput(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["t", "density"] {
            return Err(Error::InvalidInput("expected header `t,density`".into()));
        }
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for row in rdr.deserialize::<(f64, f64)>() {
            let (t, v) = row.map_err(|e| Error::InvalidInput(e.to_string()))?;
            grid.push(t);
            values.push(v);
        }
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("grid must have at least two ascending points".into()));
        }
        let support_window = (grid[0], *grid.last().unwrap());
        Ok(Self { epsilon, grid, values, support_window, value_error: 0.0 })
    }
}

/// `−(1/π)·Im 𝒢_ρ(t + iε)` on a uniform grid over `window` (default
/// [`default_window`]). Grid points are solved independently and in parallel.
pub fn density_of_states(
    rho: &DataPair,
    epsilon: f64,
    window: Option<(f64, f64)>,
    k: usize,
    cfg: &SolverConfig,
) -> Result<SpectralDensity> {
    let window = match window {
        Some(w) => w,
        None => default_window(rho, epsilon)?,
    };
    check_window(window, k, epsilon)?;
    cfg.validate()?;
    let grid = uniform_grid(window.0, window.1, k);
    let samples: Vec<CauchyValue> = grid
        .par_iter()
        .map(|&t| scalar_cauchy_certified(rho, Complex64::new(t, epsilon), cfg))
        .collect::<Result<_>>()?;
    let values = samples.iter().map(|c| -c.value.im / PI).collect();
    let value_error = samples.iter().map(|c| c.error).fold(0.0, f64::max) / PI;
    Ok(SpectralDensity { epsilon, grid, values, support_window: window, value_error })
}

/// Finitely supported probability measure with sorted, distinct atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureJson {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureJson> for DiscreteMeasure {
    type Error = Error;
    fn try_from(j: MeasureJson) -> Result<Self> {
        DiscreteMeasure::new(j.atoms, j.weights)
    }
}

impl From<DiscreteMeasure> for MeasureJson {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureJson { atoms: m.atoms, weights: m.weights }
    }
}

impl DiscreteMeasure {
    /// Sorts the atoms, merges repeated ones and normalizes the weights.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: atoms.len(), actual: weights.len() });
        }
        if atoms.iter().chain(&weights).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::InvalidInput(format!("weights must be nonnegative, got {w}")));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).filter(|p| p.1 > 0.0).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            if atoms.last() == Some(&a) {
                *weights.last_mut().unwrap() += w;
            } else {
                atoms.push(a);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroMass);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { atoms, weights, cdf })
    }

    pub fn dirac(a: f64) -> Self {
        Self::new(vec![a], vec![1.0]).expect("finite atom")
    }

    /// Equal weights on the given points (repetitions add up).
    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `F(x) = μ((−∞, x])`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let n = self.atoms.partition_point(|&a| a <= x);
        if n == 0 {
            0.0
        } else {
            self.cdf[n - 1]
        }
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// `Σ wⱼ/(z − aⱼ)`.
    pub fn cauchy_transform(&self, z: Complex64) -> Complex64 {
        self.atoms.iter().zip(&self.weights).map(|(&a, &w)| w / (z - a)).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measures always serialize")
    }
}

/// Quantizes a density: one atom per grid cell at its midpoint, weighted by
/// the cell's trapezoid mass, renormalized to total mass one.
pub fn to_measure(sd: &SpectralDensity) -> Result<DiscreteMeasure> {
    let atoms = sd.grid.windows(2).map(|t| 0.5 * (t[0] + t[1])).collect();
    DiscreteMeasure::new(atoms, sd.cell_masses())
}

/// Whether `F_a(x) ≤ F_b(x + ε) + ε` for all real `x`. Both sides are step
/// functions, so it suffices to test at the atoms of `a`.
fn dominated(a: &DiscreteMeasure, b: &DiscreteMeasure, eps: f64) -> bool {
    let mut j = 0;
    for (x, fa) in a.atoms.iter().zip(&a.cdf) {
        let shifted = x + eps;
        while j < b.atoms.len() && b.atoms[j] <= shifted {
            j += 1;
        }
        let fb = if j == 0 { 0.0 } else { b.cdf[j - 1] };
        if *fa > fb + eps {
            return false;
        }
    }
    true
}

/// Number of bisection steps on `[0, 1]`, giving resolution `2⁻⁶⁰`.
pub const LEVY_BISECTION_STEPS: usize = 60;

/// Lévy distance `inf{ε : F_μ(x − ε) − ε ≤ F_ν(x) ≤ F_μ(x + ε) + ε ∀x}`.
pub fn levy_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let ok = |eps: f64| dominated(mu, nu, eps) && dominated(nu, mu, eps);
    if ok(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..LEVY_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `sup_x |F_μ(x) − F_ν(x)|`.
pub fn kolmogorov_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fm, mut fn_) = (0.0_f64, 0.0_f64);
    let mut sup = 0.0_f64;
    while i < mu.len() || j < nu.len() {
        let x = match (mu.atoms.get(i), nu.atoms.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < mu.len() && mu.atoms[i] <= x {
            fm = mu.cdf[i];
            i += 1;
        }
        while j < nu.len() && nu.atoms[j] <= x {
            fn_ = nu.cdf[j];
            j += 1;
        }
        sup = sup.max((fm - fn_).abs());
    }
    sup
}

/// Density of `μ ∗ γ_ε` with the Cauchy kernel `γ_ε(t) = ε/(π(ε² + t²))`,
/// sampled on a uniform grid over `window`.
pub fn cauchy_smooth(mu: &DiscreteMeasure, epsilon: f64, window: (f64, f64), k: usize) -> Result<SpectralDensity> {
    check_window(window, k, epsilon)?;
    let grid = uniform_grid(window.0, window.1, k);
    let values = grid
        .par_iter()
        .map(|&t| {
            mu.atoms
                .iter()
                .zip(&mu.weights)
                .map(|(&a, &w)| {
                    let d = t - a;
                    w * epsilon / (PI * (epsilon * epsilon + d * d))
                })
                .sum()
        })
        .collect();
    Ok(SpectralDensity { epsilon, grid, values, support_window: window, value_error: 0.0 })
}

/// Bound on how far [`to_measure`] can move a density in Lévy distance:
/// one grid spacing plus the mass outside the window.
pub fn quantization_slack(sd: &SpectralDensity) -> f64 {
    sd.max_spacing() + sd.tail_mass()
}

/// Closed-form Cauchy transform of the semicircle law of variance `s2`,
/// branch with negative imaginary part on the upper half-plane.
pub fn semicircle_cauchy(z: Complex64, s2: f64) -> Complex64 {
    let root = (z * z - 4.0 * s2).sqrt();
    let g = (z - root) / (2.0 * s2);
    if g.im <= 0.0 {
        g
    } else {
        (z + root) / (2.0 * s2)
    }
}

