//! Kronecker random matrices `X = b₀⊗1_N + Σⱼ bⱼ⊗Xⱼ` with independent GUE
//! `Xⱼ`, whose spectra approach the density of states of `(b₀, η)` with
//! `η(b) = Σⱼ bⱼ b bⱼ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::eigenvalues_split;
use crate::algebra::HermitianMatrix;
use crate::covariance::CovarianceMap;
use crate::dyson::SolverConfig;
use crate::error::{Error, Result};
use crate::measures::{cauchy_smooth, default_window, density_of_states, levy_distance, to_measure, DataPair, DiscreteMeasure};
use crate::random::{self, stream_rng};

/// GUE matrix of size `n`, spectrum filling `[-2, 2]` for large `n`.
pub fn sample_gue(n: usize, seed: u64) -> HermitianMatrix {
    random::gue(n, &mut stream_rng(seed, 0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KroneckerModel {
    pub b0: HermitianMatrix,
    #[serde(default)]
    pub b: Vec<HermitianMatrix>,
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

impl KroneckerModel {
    pub fn new(b0: HermitianMatrix, b: Vec<HermitianMatrix>, n: usize, trials: usize, seed: u64) -> Result<Self> {
        let model = Self { b0, b, n, trials, seed };
        model.validate()?;
        Ok(model)
    }

    /// `m = 1`, `b₀ = 0`, `b₁ = 1`: a single GUE matrix.
    pub fn semicircle(n: usize, trials: usize, seed: u64) -> Self {
        Self::new(HermitianMatrix::zeros(1), vec![HermitianMatrix::identity(1)], n, trials, seed).expect("valid fixture")
    }

    /// `m = 2`, `b₀ = 0`, `b₁ = σ_x`, `b₂ = σ_z`.
    pub fn pauli(n: usize, trials: usize, seed: u64) -> Self {
        let sx = HermitianMatrix::from_real_symmetric(2, &[0.0, 1.0, 1.0, 0.0]).expect("symmetric");
        let sz = HermitianMatrix::from_real_diag(&[1.0, -1.0]);
        Self::new(HermitianMatrix::zeros(2), vec![sx, sz], n, trials, seed).expect("valid fixture")
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.b0.dim();
        for bj in &self.b {
            bj.check_dim(m)?;
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("N must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model always serializes")
    }

    pub fn dim(&self) -> usize {
        self.b0.dim()
    }

    /// `η(b) = Σⱼ bⱼ b bⱼ`.
    pub fn covariance(&self) -> CovarianceMap {
        CovarianceMap::sandwich(self.dim(), self.b.clone()).expect("dimensions validated")
    }

    /// `(b₀, η, tr_m)`.
    pub fn data_pair(&self) -> Result<DataPair> {
        DataPair::with_trace_state(self.b0.clone(), self.covariance())
    }

    /// Eigenvalues of one sample. Trial `t` draws `Xⱼ` from stream `(t, j)`.
    pub fn sample_eigenvalues(&self, trial: usize) -> Result<Vec<f64>> {
        let m = self.dim();
        let n = self.n;
        let size = m * n;
        let mut re = vec![0.0; size * size];
        let mut im = vec![0.0; size * size];
        // Row index a·N + i, column c·N + k.
        for a in 0..m {
            for i in 0..n {
                let z = self.b0.as_matrix()[(a, a)];
                re[(a * n + i) * size + a * n + i] += z.re;
            }
            for c in 0..m {
                let z = self.b0.as_matrix()[(a, c)];
                if a != c && z != num_complex::Complex64::new(0.0, 0.0) {
                    for i in 0..n {
                        re[(a * n + i) * size + c * n + i] += z.re;
                        im[(a * n + i) * size + c * n + i] += z.im;
                    }
                }
            }
        }
        for (j, bj) in self.b.iter().enumerate() {
            let mut rng = stream_rng(self.seed, ((trial as u64) << 16) | j as u64);
            let x = random::gue(n, &mut rng);
            let xs = x.as_matrix();
            for a in 0..m {
                for c in 0..m {
                    let coef = bj.as_matrix()[(a, c)];
                    if coef.norm_sqr() == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        let row = (a * n + i) * size + c * n;
                        for k in 0..n {
                            let v = coef * xs[(i, k)];
                            re[row + k] += v.re;
                            im[row + k] += v.im;
                        }
                    }
                }
            }
        }
        eigenvalues_split(size, re, im)
    }
}

/// Pooled eigenvalues of all trials as a uniform atomic measure.
pub fn empirical_spectrum(model: &KroneckerModel) -> Result<DiscreteMeasure> {
    model.validate()?;
    let per_trial: Vec<Vec<f64>> = (0..model.trials).into_par_iter().map(|t| model.sample_eigenvalues(t)).collect::<Result<_>>()?;
    let mut atoms: Vec<f64> = per_trial.into_iter().flatten().collect();
    atoms.sort_by(f64::total_cmp);
    DiscreteMeasure::uniform(atoms)
}

/// Outcome of a Monte Carlo comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub levy: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: f64,
}

impl MonteCarloReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes")
    }
}

/// Lévy distance between the `ε`-smoothed empirical spectrum and the
/// `ε`-smoothed density of states, both quantized on the same `k`-point grid.
pub fn validate_against_dos(model: &KroneckerModel, epsilon: f64, k: usize, cfg: &SolverConfig) -> Result<MonteCarloReport> {
    let empirical = empirical_spectrum(model)?;
    validate_spectrum(model, &empirical, epsilon, k, cfg)
}

/// [`validate_against_dos`] for an already sampled spectrum.
pub fn validate_spectrum(
    model: &KroneckerModel,
    empirical: &DiscreteMeasure,
    epsilon: f64,
    k: usize,
    cfg: &SolverConfig,
) -> Result<MonteCarloReport> {
    let rho = model.data_pair()?;
    let (lo, hi) = default_window(&rho, epsilon)?;
    let atoms = empirical.atoms();
    let window = (lo.min(atoms[0] - 10.0 * epsilon), hi.max(atoms[atoms.len() - 1] + 10.0 * epsilon));
    let smoothed = cauchy_smooth(empirical, epsilon, window, k)?;
    let dos = density_of_states(&rho, epsilon, Some(window), k, cfg)?;
    let levy = levy_distance(&to_measure(&smoothed)?, &to_measure(&dos)?);
    Ok(MonteCarloReport { levy, n: model.n, trials: model.trials, seed: model.seed, epsilon })
}
