//! Linear maps on `M_m(ℂ)`: positive covariance maps in Kraus, sandwich or
//! Choi form, their amplifications, and general (not necessarily positive)
//! maps such as differences of covariances.
//!
//! Choi convention: `C` is `m²×m²` with row index `i·m + k` and column index
//! `j·m + l`, and `η(b)_{ij} = Σ_{kl} C[(i,k),(j,l)] b_{kl}`. With this
//! convention a Kraus map `b ↦ Σ a b a*` has `C[(i,k),(j,l)] = Σ a_{ik} conj(a_{jl})`,
//! and `C` is positive semidefinite exactly when the map is completely positive.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{ComplexMatrix, HermitianMatrix};
use crate::error::{Error, Result};
use crate::random;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Anything that acts linearly on `M_m(ℂ)`.
pub trait MatrixMap: Send + Sync {
    fn dim(&self) -> usize;

    /// Applies the map; `b` must have dimension [`MatrixMap::dim`].
    fn eval(&self, b: &ComplexMatrix) -> ComplexMatrix;

    /// Applies the map to every `m×m` block of a `k×k` block matrix.
    fn eval_amplified(&self, b: &ComplexMatrix, k: usize) -> ComplexMatrix {
        let m = self.dim();
        if k == 1 {
            return self.eval(b);
        }
        let blocks: Vec<ComplexMatrix> = (0..k * k).map(|idx| self.eval(&b.block(m, idx / k, idx % k))).collect();
        ComplexMatrix::from_blocks(k, &blocks)
    }
}

/// Declared positivity of a covariance map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositivityClass {
    #[serde(rename = "CP", alias = "cp", alias = "completely_positive")]
    CompletelyPositive,
    #[serde(rename = "TwoPositive", alias = "2-positive", alias = "two_positive")]
    TwoPositive,
    #[serde(rename = "PositiveOnly", alias = "positive")]
    PositiveOnly,
}

impl PositivityClass {
    /// Largest `k` for which the declaration guarantees `k`-positivity.
    pub fn guaranteed_level(self) -> usize {
        match self {
            PositivityClass::CompletelyPositive => usize::MAX,
            PositivityClass::TwoPositive => 2,
            PositivityClass::PositiveOnly => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PositivityClass::CompletelyPositive => "CP",
            PositivityClass::TwoPositive => "TwoPositive",
            PositivityClass::PositiveOnly => "PositiveOnly",
        }
    }

    /// The weaker of two declarations.
    pub fn meet(self, other: Self) -> Self {
        if self.guaranteed_level() <= other.guaranteed_level() {
            self
        } else {
            other
        }
    }
}

impl fmt::Display for PositivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    /// `η(b) = Σ a b a*`.
    Kraus(Vec<ComplexMatrix>),
    /// `η(b) = Σ s b s` with Hermitian `s`.
    Sandwich(Vec<HermitianMatrix>),
    /// Choi matrix in the module convention.
    Choi(ComplexMatrix),
}

/// A positive linear map `η` on `M_m(ℂ)` with a declared positivity class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovarianceJson", into = "CovarianceJson")]
pub struct CovarianceMap {
    dim: usize,
    repr: Representation,
    class: PositivityClass,
    adjoints: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct CovarianceJson {
    dim: usize,
    repr: ReprJson,
    positivity_class: Option<PositivityClass>,
}

#[derive(Serialize, Deserialize)]
struct ReprJson {
    kind: String,
    matrices: Vec<ComplexMatrix>,
}

impl TryFrom<CovarianceJson> for CovarianceMap {
    type Error = Error;

    fn try_from(json: CovarianceJson) -> Result<Self> {
        let CovarianceJson { dim, repr, positivity_class } = json;
        if dim == 0 {
            return Err(Error::InvalidInput("covariance map dimension must be at least 1".into()));
        }
        match repr.kind.to_ascii_lowercase().as_str() {
            "kraus" => {
                let map = CovarianceMap::kraus(dim, repr.matrices)?;
                match positivity_class {
                    Some(c) if c != PositivityClass::CompletelyPositive => Ok(map.with_declared_class(c)),
                    _ => Ok(map),
                }
            }
            "sandwich" => {
                let ops = repr
                    .matrices
                    .into_iter()
                    .map(HermitianMatrix::try_from_matrix)
                    .collect::<Result<Vec<_>>>()?;
                let map = CovarianceMap::sandwich(dim, ops)?;
                match positivity_class {
                    Some(c) if c != PositivityClass::CompletelyPositive => Ok(map.with_declared_class(c)),
                    _ => Ok(map),
                }
            }
            "choi" => {
                let mut mats = repr.matrices;
                if mats.len() != 1 {
                    return Err(Error::InvalidInput(format!(
                        "choi representation needs exactly one matrix, got {}",
                        mats.len()
                    )));
                }
                let class = positivity_class.ok_or_else(|| {
                    Error::InvalidInput("choi representation requires an explicit positivity_class".into())
                })?;
                CovarianceMap::choi(dim, mats.remove(0), class)
            }
            other => Err(Error::InvalidInput(format!("unknown covariance representation kind '{other}'"))),
        }
    }
}

impl From<CovarianceMap> for CovarianceJson {
    fn from(map: CovarianceMap) -> Self {
        let (kind, matrices) = match map.repr {
            Representation::Kraus(ops) => ("kraus", ops),
            Representation::Sandwich(ops) => ("sandwich", ops.into_iter().map(ComplexMatrix::from).collect()),
            Representation::Choi(c) => ("choi", vec![c]),
        };
        CovarianceJson {
            dim: map.dim,
            repr: ReprJson { kind: kind.into(), matrices },
            positivity_class: Some(map.class),
        }
    }
}

impl CovarianceMap {
    pub fn kraus(dim: usize, ops: Vec<ComplexMatrix>) -> Result<Self> {
        for a in &ops {
            a.check_dim(dim)?;
        }
        let adjoints = ops.iter().map(ComplexMatrix::adjoint).collect();
        Ok(Self { dim, repr: Representation::Kraus(ops), class: PositivityClass::CompletelyPositive, adjoints })
    }

    pub fn sandwich(dim: usize, ops: Vec<HermitianMatrix>) -> Result<Self> {
        for s in &ops {
            s.check_dim(dim)?;
        }
        Ok(Self {
            dim,
            repr: Representation::Sandwich(ops),
            class: PositivityClass::CompletelyPositive,
            adjoints: Vec::new(),
        })
    }

    /// A map given by its Choi matrix, trusted to have the declared class.
    pub fn choi(dim: usize, c: ComplexMatrix, class: PositivityClass) -> Result<Self> {
        c.check_dim(dim * dim)?;
        Ok(Self { dim, repr: Representation::Choi(c), class, adjoints: Vec::new() })
    }

    pub fn identity(dim: usize) -> Self {
        Self::kraus(dim, vec![ComplexMatrix::identity(dim)]).expect("dimensions agree")
    }

    pub fn zero(dim: usize) -> Self {
        Self::kraus(dim, Vec::new()).expect("no operators")
    }

    /// `b ↦ 2·Tr(b)·1 − b` on `M_3(ℂ)`: 2-positive but not completely positive.
    pub fn choi_example() -> Self {
        let m = 3;
        let c = LinearMap::from_fn(m, |b| ComplexMatrix::scalar(m, b.trace() * 2.0) - b).into_choi();
        Self::choi(m, c, PositivityClass::TwoPositive).expect("dimensions agree")
    }

    /// The transpose map: positive but not 2-positive.
    pub fn transpose(dim: usize) -> Self {
        let c = LinearMap::from_fn(dim, ComplexMatrix::transpose).into_choi();
        Self::choi(dim, c, PositivityClass::PositiveOnly).expect("dimensions agree")
    }

    /// Replaces the declared class. Kraus and sandwich forms are always CP, so
    /// declaring a weaker class only forgoes guarantees.
    pub fn with_declared_class(mut self, class: PositivityClass) -> Self {
        self.class = class;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn positivity_class(&self) -> PositivityClass {
        self.class
    }

    pub fn apply(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        b.check_dim(self.dim)?;
        Ok(self.eval(b))
    }

    /// `η^{(k)}` on `M_k(M_m(ℂ))`.
    pub fn amplify(&self, k: usize) -> Result<CovarianceMap> {
        if k == 0 {
            return Err(Error::InvalidInput("amplification level must be at least 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let m = self.dim;
        let lift = |a: &ComplexMatrix| ComplexMatrix::identity(k).kron(a);
        let class = match self.class {
            PositivityClass::CompletelyPositive => PositivityClass::CompletelyPositive,
            _ => PositivityClass::PositiveOnly,
        };
        match &self.repr {
            Representation::Kraus(ops) => {
                Ok(Self::kraus(k * m, ops.iter().map(lift).collect())?.with_declared_class(class))
            }
            Representation::Sandwich(ops) => {
                let lifted = ops.iter().map(|s| HermitianMatrix::try_from_matrix(lift(s.as_matrix())));
                Ok(Self::sandwich(k * m, lifted.collect::<Result<Vec<_>>>()?)?.with_declared_class(class))
            }
            Representation::Choi(c) => {
                let km = k * m;
                let mut big = ComplexMatrix::zeros(km * km);
                for p in 0..k {
                    for q in 0..k {
                        for i in 0..m {
                            for kk in 0..m {
                                for j in 0..m {
                                    for l in 0..m {
                                        let row = (p * m + i) * km + p * m + kk;
                                        let col = (q * m + j) * km + q * m + l;
                                        big[(row, col)] = c[(i * m + kk, j * m + l)];
                                    }
                                }
                            }
                        }
                    }
                }
                Self::choi(km, big, class)
            }
        }
    }

    /// `‖η(1)‖`, which equals `‖η‖` for positive maps.
    pub fn operator_norm(&self) -> f64 {
        let e = self.eval(&ComplexMatrix::identity(self.dim));
        HermitianMatrix::project(&e).spectral_norm().unwrap_or_else(|_| e.op_norm())
    }

    pub fn choi_matrix(&self) -> ComplexMatrix {
        match &self.repr {
            Representation::Choi(c) => c.clone(),
            _ => LinearMap::from_fn(self.dim, |b| self.eval(b)).into_choi(),
        }
    }

    /// Tests whether the Choi matrix is positive semidefinite, i.e. whether
    /// the map is completely positive.
    pub fn choi_psd_check(&self) -> ChoiCheck {
        choi_check(&self.choi_matrix())
    }

    /// Randomized falsifier for 2-positivity: feeds random rank-one positive
    /// elements of `M_2(M_m(ℂ))` through `η^{(2)}` and looks for a negative
    /// eigenvalue below `−1e-9·‖input‖`.
    pub fn sample_2positivity(&self, trials: usize, seed: u64) -> Result<PositivityProbe> {
        if trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        let n = 2 * self.dim;
        let mut rng = random::stream_rng(seed, 0);
        let mut worst = f64::INFINITY;
        for trial in 0..trials {
            let v = random::unit_vector(n, &mut rng);
            let input = ComplexMatrix::from_fn(n, |i, j| v[i] * v[j].conj());
            let out = HermitianMatrix::project(&self.eval_amplified(&input, 2));
            // The input v v* has unit norm, so the threshold needs no rescaling.
            let lo = out.min_eigenvalue()?;
            worst = worst.min(lo);
            if lo < -POSITIVITY_SLACK {
                return Ok(PositivityProbe {
                    passed: false,
                    trials_run: trial + 1,
                    min_eigenvalue: lo,
                    counterexample: Some(input),
                });
            }
        }
        Ok(PositivityProbe { passed: true, trials_run: trials, min_eigenvalue: worst, counterexample: None })
    }

    /// `(1 − t)·a + t·b` for `t ∈ [0, 1]`.
    pub fn convex_combination(a: &Self, b: &Self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("convex weight {t} outside [0, 1]")));
        }
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch { expected: a.dim, actual: b.dim });
        }
        let class = a.class.meet(b.class);
        match (a.kraus_ops(), b.kraus_ops()) {
            (Some(ka), Some(kb)) => {
                let (sa, sb) = ((1.0 - t).sqrt(), t.sqrt());
                let mut ops: Vec<ComplexMatrix> = Vec::with_capacity(ka.len() + kb.len());
                if sa > 0.0 {
                    ops.extend(ka.iter().map(|x| x.scale_real(sa)));
                }
                if sb > 0.0 {
                    ops.extend(kb.iter().map(|x| x.scale_real(sb)));
                }
                Ok(Self::kraus(a.dim, ops)?.with_declared_class(class))
            }
            _ => {
                let mut c = a.choi_matrix().scale_real(1.0 - t);
                c.axpy(Complex64::new(t, 0.0), &b.choi_matrix());
                Self::choi(a.dim, c, class)
            }
        }
    }

    /// `c·η` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::InvalidInput(format!("scale factor {c} must be nonnegative")));
        }
        match &self.repr {
            Representation::Kraus(ops) => {
                Ok(Self::kraus(self.dim, ops.iter().map(|a| a.scale_real(c.sqrt())).collect())?
                    .with_declared_class(self.class))
            }
            _ => Self::choi(self.dim, self.choi_matrix().scale_real(c), self.class),
        }
    }

    /// The same map as a general linear map.
    pub fn to_linear(&self) -> LinearMap {
        match &self.repr {
            Representation::Choi(c) => LinearMap { dim: self.dim, choi: c.clone() },
            _ => LinearMap::from_fn(self.dim, |b| self.eval(b)),
        }
    }

    fn kraus_ops(&self) -> Option<Vec<ComplexMatrix>> {
        match &self.repr {
            Representation::Kraus(ops) => Some(ops.clone()),
            Representation::Sandwich(ops) => Some(ops.iter().map(|s| s.as_matrix().clone()).collect()),
            Representation::Choi(_) => None,
        }
    }
}

impl MatrixMap for CovarianceMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, b: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(b.dim(), self.dim);
        match &self.repr {
            Representation::Kraus(ops) => {
                let mut out = ComplexMatrix::zeros(self.dim);
                for (a, a_adj) in ops.iter().zip(&self.adjoints) {
                    out += &(&(a * b) * a_adj);
                }
                out
            }
            Representation::Sandwich(ops) => {
                let mut out = ComplexMatrix::zeros(self.dim);
                for s in ops {
                    let s = s.as_matrix();
                    out += &(&(s * b) * s);
                }
                out
            }
            Representation::Choi(c) => apply_choi(self.dim, c, b),
        }
    }

    fn eval_amplified(&self, b: &ComplexMatrix, k: usize) -> ComplexMatrix {
        let m = self.dim;
        if k == 1 {
            return self.eval(b);
        }
        match &self.repr {
            Representation::Kraus(_) | Representation::Sandwich(_) => {
                let blocks: Vec<ComplexMatrix> =
                    (0..k * k).map(|idx| self.eval(&b.block(m, idx / k, idx % k))).collect();
                ComplexMatrix::from_blocks(k, &blocks)
            }
            Representation::Choi(c) => {
                let blocks: Vec<ComplexMatrix> =
                    (0..k * k).map(|idx| apply_choi(m, c, &b.block(m, idx / k, idx % k))).collect();
                ComplexMatrix::from_blocks(k, &blocks)
            }
        }
    }
}

fn apply_choi(m: usize, c: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let bs = b.as_slice();
    ComplexMatrix::from_fn(m, |i, j| {
        let mut s = ZERO;
        for k in 0..m {
            let row = c.row(i * m + k);
            let seg = &row[j * m..(j + 1) * m];
            let brow = &bs[k * m..(k + 1) * m];
            for (x, y) in seg.iter().zip(brow) {
                s += x * y;
            }
        }
        s
    })
}

/// Slack for the 2-positivity falsifier, relative to the input norm.
pub const POSITIVITY_SLACK: f64 = 1e-9;
/// Slack for Choi positivity, relative to the Choi matrix norm.
pub const CHOI_PSD_SLACK: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChoiCheck {
    pub is_psd: bool,
    /// Most negative eigenvalue of the Hermitian part of the Choi matrix.
    pub min_eigenvalue: f64,
    /// Distance of the Choi matrix from its Hermitian part.
    pub hermitian_defect: f64,
}

fn choi_check(c: &ComplexMatrix) -> ChoiCheck {
    let h = HermitianMatrix::project(c);
    let defect = (c - h.as_matrix()).max_abs();
    let scale = h.spectral_norm().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let lo = h.min_eigenvalue().unwrap_or(f64::NEG_INFINITY);
    ChoiCheck {
        is_psd: lo >= -CHOI_PSD_SLACK * scale && defect <= CHOI_PSD_SLACK * scale,
        min_eigenvalue: lo,
        hermitian_defect: defect,
    }
}

#[derive(Clone, Debug)]
pub struct PositivityProbe {
    pub passed: bool,
    pub trials_run: usize,
    /// Smallest output eigenvalue seen, per unit input norm.
    pub min_eigenvalue: f64,
    /// Positive input whose image has a negative eigenvalue, if one was found.
    pub counterexample: Option<ComplexMatrix>,
}

/// A general linear map on `M_m(ℂ)` stored as a Choi matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    dim: usize,
    choi: ComplexMatrix,
}

/// Two-sided estimate of an operator norm `sup_{‖b‖≤1} ‖T(b)‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    /// Attained value `‖T(b)‖/‖b‖` at the best input found.
    pub lower: f64,
    /// Guaranteed upper bound.
    pub upper: f64,
    /// True when `lower` is known to equal the norm.
    pub exact: bool,
}

impl LinearMap {
    pub fn from_choi(dim: usize, choi: ComplexMatrix) -> Result<Self> {
        choi.check_dim(dim * dim)?;
        Ok(Self { dim, choi })
    }

    /// Tabulates a linear action on the matrix units.
    pub fn from_fn(dim: usize, mut f: impl FnMut(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let m = dim;
        let mut choi = ComplexMatrix::zeros(m * m);
        for k in 0..m {
            for l in 0..m {
                let mut e = ComplexMatrix::zeros(m);
                e[(k, l)] = ONE;
                let img = f(&e);
                for i in 0..m {
                    for j in 0..m {
                        choi[(i * m + k, j * m + l)] = img[(i, j)];
                    }
                }
            }
        }
        Self { dim, choi }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, choi: ComplexMatrix::zeros(dim * dim) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn into_choi(self) -> ComplexMatrix {
        self.choi
    }

    pub fn apply(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        b.check_dim(self.dim)?;
        Ok(apply_choi(self.dim, &self.choi, b))
    }

    /// Adjoint with respect to the Hilbert–Schmidt inner product.
    pub fn adjoint_apply(&self, y: &ComplexMatrix) -> ComplexMatrix {
        let m = self.dim;
        ComplexMatrix::from_fn(m, |k, l| {
            let mut s = ZERO;
            for i in 0..m {
                for j in 0..m {
                    s += y[(i, j)] * self.choi[(i * m + k, j * m + l)].conj();
                }
            }
            s
        })
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { dim: self.dim, choi: &self.choi - &other.choi }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { dim: self.dim, choi: &self.choi + &other.choi }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { dim: self.dim, choi: self.choi.scale_real(c) }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |b| self.eval(&other.eval(b)))
    }

    /// Estimates `‖T‖ = sup_{‖b‖≤1} ‖T(b)‖`.
    ///
    /// When `±T` is completely positive the norm is `‖T(1)‖` exactly. Otherwise
    /// the lower value is the best ratio found by alternating maximization from
    /// the identity and from `restarts` random unitaries, and the upper value
    /// comes from splitting the Choi matrix into completely positive parts.
    pub fn norm_estimate(&self, restarts: usize, seed: u64) -> NormEstimate {
        let m = self.dim;
        let one = ComplexMatrix::identity(m);
        let check = choi_check(&self.choi);
        let neg = choi_check(&(-&self.choi));
        if check.is_psd || neg.is_psd {
            let v = self.eval(&one).op_norm();
            return NormEstimate { lower: v, upper: v, exact: true };
        }
        let upper = self.split_upper_bound();

        let mut rng = random::stream_rng(seed, 0x6e6f726d);
        let mut lower = 0.0f64;
        let mut starts = vec![one];
        for _ in 0..restarts {
            starts.push(polar_unitary(&random::ginibre(m, &mut rng)));
        }
        for start in starts {
            lower = lower.max(self.alternating_max(start, 40));
        }
        NormEstimate { lower: lower.min(upper), upper, exact: false }
    }

    fn alternating_max(&self, mut b: ComplexMatrix, iterations: usize) -> f64 {
        let mut best = 0.0f64;
        for _ in 0..iterations {
            let nb = b.op_norm();
            if nb == 0.0 {
                break;
            }
            let y = self.eval(&b);
            let val = y.op_norm() / nb;
            let improved = val > best * (1.0 + 1e-13);
            best = best.max(val);
            if !improved {
                break;
            }
            let Some((u, v)) = top_singular_pair(&y) else { break };
            let yy = ComplexMatrix::from_fn(self.dim, |i, j| u[i] * v[j].conj());
            let n = self.adjoint_apply(&yy);
            b = polar_unitary(&n);
        }
        best
    }

    fn split_upper_bound(&self) -> f64 {
        let m = self.dim;
        let one = ComplexMatrix::identity(m);
        let herm = HermitianMatrix::project(&self.choi);
        let anti = HermitianMatrix::project(&(&self.choi - herm.as_matrix()).scale(Complex64::new(0.0, -1.0)));
        let mut total = 0.0;
        for part in [herm, anti] {
            let Ok(eig) = part.eigen() else {
                return f64::INFINITY;
            };
            let n = m * m;
            for sign in [1.0, -1.0] {
                let pos = HermitianMatrix::from_lower_fn(n, |i, j| {
                    (0..n)
                        .filter(|&k| sign * eig.values[k] > 0.0)
                        .map(|k| eig.vectors[(i, k)] * eig.vectors[(j, k)].conj() * (sign * eig.values[k]))
                        .sum()
                });
                total += apply_choi(m, pos.as_matrix(), &one).op_norm();
            }
        }
        total
    }
}

impl MatrixMap for LinearMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, b: &ComplexMatrix) -> ComplexMatrix {
        apply_choi(self.dim, &self.choi, b)
    }
}

/// Top singular vectors `(u, v)` with `y v = σ u`, via the Hermitian dilation.
fn top_singular_pair(y: &ComplexMatrix) -> Option<(Vec<Complex64>, Vec<Complex64>)> {
    let m = y.dim();
    let zero = ComplexMatrix::zeros(m);
    let dil = HermitianMatrix::project(&ComplexMatrix::block2(&zero, y, &y.adjoint(), &zero));
    let eig = dil.eigen().ok()?;
    let c = 2 * m - 1;
    let s = std::f64::consts::SQRT_2;
    let u: Vec<Complex64> = (0..m).map(|i| eig.vectors[(i, c)] * s).collect();
    let v: Vec<Complex64> = (0..m).map(|i| eig.vectors[(m + i, c)] * s).collect();
    Some((u, v))
}

/// Unitary factor `U V*` of the singular value decomposition `n = U Σ V*`,
/// rescaled into the unit ball if degenerate singular values spoil unitarity.
pub fn polar_unitary(n: &ComplexMatrix) -> ComplexMatrix {
    let m = n.dim();
    let zero = ComplexMatrix::zeros(m);
    let dil = HermitianMatrix::project(&ComplexMatrix::block2(&zero, n, &n.adjoint(), &zero));
    let Ok(eig) = dil.eigen() else {
        return ComplexMatrix::identity(m);
    };
    let mut b = ComplexMatrix::zeros(m);
    for c in m..2 * m {
        for i in 0..m {
            for j in 0..m {
                b[(i, j)] += eig.vectors[(i, c)] * eig.vectors[(m + j, c)].conj() * 2.0;
            }
        }
    }
    let nb = b.op_norm();
    if nb > 1.0 {
        b = b.scale_real(1.0 / nb);
    }
    b
}

/// Value of a covariance path at one time: `(η_t, η̇_t)`.
pub type PathPoint = (CovarianceMap, LinearMap);

type PathFn = dyn Fn(f64) -> Result<PathPoint> + Send + Sync;

/// A `C¹` path `t ↦ η_t` of covariance maps together with its derivative.
#[derive(Clone)]
pub enum CovariancePath {
    /// `η_t = (1 − t)·η₀ + t·η₁` on `[0, 1]`.
    Affine { eta0: CovarianceMap, eta1: CovarianceMap, derivative: LinearMap },
    /// User-supplied evaluation; 2-positivity along the path is trusted.
    Callback { t_start: f64, t_end: f64, eval: Arc<PathFn> },
}

impl fmt::Debug for CovariancePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariancePath::Affine { eta0, eta1, .. } => {
                f.debug_struct("Affine").field("eta0", eta0).field("eta1", eta1).finish()
            }
            CovariancePath::Callback { t_start, t_end, .. } => {
                f.debug_struct("Callback").field("t_start", t_start).field("t_end", t_end).finish()
            }
        }
    }
}

impl CovariancePath {
    pub fn affine(eta0: CovarianceMap, eta1: CovarianceMap) -> Result<Self> {
        if eta0.dim() != eta1.dim() {
            return Err(Error::DimensionMismatch { expected: eta0.dim(), actual: eta1.dim() });
        }
        let derivative = eta1.to_linear().sub(&eta0.to_linear());
        Ok(CovariancePath::Affine { eta0, eta1, derivative })
    }

    pub fn callback(
        t_start: f64,
        t_end: f64,
        eval: impl Fn(f64) -> Result<PathPoint> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(t_start < t_end) {
            return Err(Error::InvalidInput(format!("empty path interval [{t_start}, {t_end}]")));
        }
        Ok(CovariancePath::Callback { t_start, t_end, eval: Arc::new(eval) })
    }

    pub fn interval(&self) -> (f64, f64) {
        match self {
            CovariancePath::Affine { .. } => (0.0, 1.0),
            CovariancePath::Callback { t_start, t_end, .. } => (*t_start, *t_end),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovariancePath::Affine { eta0, .. } => eta0.dim(),
            CovariancePath::Callback { eval, t_start, .. } => eval(*t_start).map(|(e, _)| e.dim()).unwrap_or(0),
        }
    }

    /// `(η_t, η̇_t)`.
    pub fn at(&self, t: f64) -> Result<PathPoint> {
        let (lo, hi) = self.interval();
        if !(lo..=hi).contains(&t) {
            return Err(Error::InvalidInput(format!("path time {t} outside [{lo}, {hi}]")));
        }
        match self {
            CovariancePath::Affine { eta0, eta1, derivative } => {
                Ok((CovarianceMap::convex_combination(eta0, eta1, t)?, derivative.clone()))
            }
            CovariancePath::Callback { eval, .. } => eval(t),
        }
    }
}

/// Random unitary from the polar factor of a Ginibre matrix.
pub fn random_unitary(m: usize, rng: &mut impl Rng) -> ComplexMatrix {
    polar_unitary(&random::ginibre(m, rng))
}
