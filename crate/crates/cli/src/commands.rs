use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dyson_core::covariance::{CovarianceMap, CovariancePath};
use dyson_core::dyson::{frechet_derivative_certified, frechet_derivative_linear, solve};
use dyson_core::evolution::{burgers_sweep, subordinate, SubordinationParams};
use dyson_core::measures::{density_of_states, scalar_cauchy_certified, uniform_grid, DataPair, DEFAULT_GRID};
use dyson_core::randmat::{validate_against_dos, KroneckerModel};
use dyson_core::random::{half_plane_point, stream_rng};
use dyson_core::verify::{reports_to_json, run_all, run_suite, Suite, SuiteConfig, VerifyConfig};
use dyson_core::{Complex64, ComplexMatrix, HalfPlanePoint};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::failure::Failure;
use crate::params::{read, Params};

/// Rendered artifact and the file name used when `--out` is absent.
pub struct Artifact {
    pub contents: String,
    pub default_name: &'static str,
    /// Set when the artifact records a failed check.
    pub violation: Option<String>,
}

impl Artifact {
    fn ok(contents: String, default_name: &'static str) -> Self {
        Self { contents, default_name, violation: None }
    }
}

fn load<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{what} {}: {e}", path.display())))
}

fn load_pair(path: &Path) -> Result<DataPair, Failure> {
    DataPair::from_json(&read(path)?).map_err(|e| Failure::Input(format!("data pair {}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

#[derive(Args, Debug)]
pub struct DosArgs {
    /// Data pair JSON: b0, eta and an optional state phi.
    #[arg(long)]
    pub input: PathBuf,
}

pub fn dos(a: &DosArgs, p: &Params) -> Result<Artifact, Failure> {
    let rho = load_pair(&a.input)?;
    let eps = p.epsilon();
    log::info!("density of states at epsilon = {eps}");
    let sd = density_of_states(&rho, eps, p.window, p.grid.unwrap_or(DEFAULT_GRID), &p.solver)?;
    log::info!("window [{}, {}], captured mass {:.6}", sd.support_window.0, sd.support_window.1, sd.mass());
    Ok(Artifact::ok(sd.to_csv(), "dos.csv"))
}

#[derive(Args, Debug)]
pub struct CauchyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Evaluation point re,im; repeatable. Without it the grid t + iε over the window is used.
    #[arg(long = "z", value_parser = parse_complex, allow_hyphen_values = true)]
    pub z: Vec<Complex64>,
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im, got '{s}'"))?;
    let re: f64 = re.trim().parse().map_err(|e| format!("bad real part '{re}': {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("bad imaginary part '{im}': {e}"))?;
    Ok(Complex64::new(re, im))
}

pub fn cauchy(a: &CauchyArgs, p: &Params) -> Result<Artifact, Failure> {
    let rho = load_pair(&a.input)?;
    let points = if a.z.is_empty() {
        let eps = p.epsilon();
        let (lo, hi) = match p.window {
            Some(w) => w,
            None => dyson_core::measures::default_window(&rho, eps)?,
        };
        uniform_grid(lo, hi, p.grid.unwrap_or(201)).into_iter().map(|t| Complex64::new(t, eps)).collect()
    } else {
        a.z.clone()
    };
    let rows = points
        .iter()
        .map(|&z| {
            let c = scalar_cauchy_certified(&rho, z, &p.solver)?;
            Ok(json!({ "z": [z.re, z.im], "value": [c.value.re, c.value.im], "error": c.error, "iterations": c.iterations }))
        })
        .collect::<Result<Vec<_>, dyson_core::Error>>()?;
    Ok(Artifact::ok(pretty(&serde_json::Value::Array(rows)), "cauchy.json"))
}

#[derive(Args, Debug)]
pub struct DerivativeArgs {
    /// Covariance map JSON.
    #[arg(long)]
    pub eta: PathBuf,
    /// Point b in the upper half-plane, matrix JSON.
    #[arg(long)]
    pub b: PathBuf,
    /// Direction h, matrix JSON.
    #[arg(long)]
    pub h: PathBuf,
}

pub fn derivative(a: &DerivativeArgs, p: &Params) -> Result<Artifact, Failure> {
    let eta: CovarianceMap = load(&a.eta, "covariance map")?;
    let b: ComplexMatrix = load(&a.b, "matrix b")?;
    let h: ComplexMatrix = load(&a.h, "matrix h")?;
    let sol = solve(&b, &eta, &p.solver)?;
    let amp = frechet_derivative_certified(&b, &eta, &h, &p.solver)?;
    let lin = frechet_derivative_linear(&b, &eta, &h, &p.solver)?;
    let gap = (&amp.value - &lin).op_norm();
    log::info!("amplified and linearized derivatives differ by {gap:.3e}");
    let out = json!({
        "G": sol.w,
        "residual_norm": sol.residual_norm,
        "derivative": amp.value,
        "error_bound": amp.error_bound,
        "derivative_linear": lin,
        "route_gap": gap,
    });
    Ok(Artifact::ok(pretty(&out), "derivative.json"))
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    /// Covariance at t = 0.
    #[arg(long)]
    pub eta0: PathBuf,
    /// Covariance at t = 1; the path is affine in between.
    #[arg(long)]
    pub eta1: PathBuf,
    /// JSON array of matrices b. Without it, `--points` seeded points with Im(b) ≥ gamma are drawn.
    #[arg(long = "b-grid")]
    pub b_grid: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub points: usize,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Comma-separated times in (0, 1).
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3, 0.5, 0.7, 0.9])]
    pub times: Vec<f64>,
    /// Step of the central difference in t.
    #[arg(long)]
    pub delta: Option<f64>,
}

pub fn evolve(a: &EvolveArgs, p: &Params) -> Result<Artifact, Failure> {
    let eta0: CovarianceMap = load(&a.eta0, "covariance map")?;
    let eta1: CovarianceMap = load(&a.eta1, "covariance map")?;
    let m = eta0.dim();
    let path = CovariancePath::affine(eta0, eta1)?;
    let bs: Vec<ComplexMatrix> = match &a.b_grid {
        Some(f) => load(f, "b grid")?,
        None => {
            if !(a.gamma > 0.0) {
                return Err(Failure::Input(format!("gamma must be positive, got {}", a.gamma)));
            }
            let mut rng = stream_rng(p.seed(), 0);
            (0..a.points).map(|_| Ok(half_plane_point(m, a.gamma, 1.0, &mut rng)?.into_matrix())).collect::<dyson_core::Result<_>>()?
        }
    };
    log::info!("Burgers sweep over {} times and {} points", a.times.len(), bs.len());
    let report = burgers_sweep(&path, &bs, &a.times, a.delta, &p.solver)?;
    log::info!("max difference check {:.3e}, halving ratio {:.3}", report.max_fd_check, report.halving_ratio);
    Ok(Artifact::ok(report.to_json(), "evolve.json"))
}

#[derive(Args, Debug)]
pub struct SubordinateArgs {
    #[arg(long)]
    pub eta0: PathBuf,
    #[arg(long)]
    pub eta1: PathBuf,
    /// Centre b0 of the subordination disc, matrix JSON.
    #[arg(long)]
    pub b0: PathBuf,
    /// Evaluation point; defaults to b0.
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long = "sigma-prime", default_value_t = 0.25)]
    pub sigma_prime: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
}

pub fn subordinate_cmd(a: &SubordinateArgs, p: &Params) -> Result<Artifact, Failure> {
    let eta0: CovarianceMap = load(&a.eta0, "covariance map")?;
    let eta1: CovarianceMap = load(&a.eta1, "covariance map")?;
    let b0 = HalfPlanePoint::new(load(&a.b0, "matrix b0")?)?;
    let b: ComplexMatrix = match &a.b {
        Some(f) => load(f, "matrix b")?,
        None => b0.matrix().clone(),
    };
    let params = SubordinationParams { sigma_prime: a.sigma_prime, sigma: a.sigma };
    let r = subordinate(&b0, &b, &eta0, &eta1, &params, &p.solver)?;
    Ok(Artifact::ok(serde_json::to_string_pretty(&r).expect("results serialize"), "subordinate.json"))
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Suite name, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
}

pub fn verify(a: &VerifyArgs, p: &Params) -> Result<Artifact, Failure> {
    let mut vcfg = VerifyConfig { solver: p.solver.clone(), ..VerifyConfig::default() };
    if let Some(e) = p.epsilon {
        vcfg.eps_grid = vec![e];
    }
    if let Some(k) = p.grid {
        vcfg.grid = k;
    }
    if a.instances == 0 {
        return Err(Failure::Input("instances must be at least 1".into()));
    }
    let sc = SuiteConfig { instances: a.instances, seed: p.seed(), verify: vcfg };
    let reports = if a.suite == "all" {
        run_all(&sc)?
    } else {
        let suite = Suite::parse(&a.suite).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
            Failure::Input(format!("unknown suite '{}', expected one of {} or all", a.suite, names.join(", ")))
        })?;
        run_suite(suite, &sc)?
    };
    for r in &reports {
        log::info!("{:34} {:?} worst margin {:.3e} slack {:.3e}", r.bound_name, r.verdict, r.worst_margin, r.slack_budget);
    }
    let failing: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.bound_name.as_str()).collect();
    Ok(Artifact {
        contents: reports_to_json(&reports),
        default_name: "verify.json",
        violation: (!failing.is_empty()).then(|| format!("bounds violated: {}", failing.join(", "))),
    })
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Fixture {
    Semicircle,
    Pauli,
}

#[derive(Args, Debug)]
pub struct RandmatArgs {
    /// Model JSON with b0, b, N, trials and seed.
    #[arg(long, conflicts_with = "fixture")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub fixture: Option<Fixture>,
    /// Matrix size for fixtures.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Fail with exit 1 if the Lévy distance exceeds this value.
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn randmat(a: &RandmatArgs, p: &Params) -> Result<Artifact, Failure> {
    let mut model = match (&a.model, a.fixture) {
        (Some(f), _) => KroneckerModel::from_json(&read(f)?).map_err(|e| Failure::Input(format!("model {}: {e}", f.display())))?,
        (None, Some(Fixture::Semicircle)) => KroneckerModel::semicircle(a.n.max(1), a.trials.max(1), p.seed()),
        (None, Some(Fixture::Pauli)) => KroneckerModel::pauli(a.n.max(1), a.trials.max(1), p.seed()),
        (None, None) => return Err(Failure::Input("randmat needs --model or --fixture".into())),
    };
    if a.fixture.is_some() && (a.n == 0 || a.trials == 0) {
        return Err(Failure::Input("n and trials must be at least 1".into()));
    }
    if a.model.is_some() {
        if let Some(s) = p.seed {
            model.seed = s;
        }
    }
    log::info!("sampling {} matrices of size {}", model.trials, model.dim() * model.n);
    let r = validate_against_dos(&model, p.epsilon(), p.grid.unwrap_or(DEFAULT_GRID), &p.solver)?;
    log::info!("Lévy distance {:.4e}", r.levy);
    let violation = a.threshold.filter(|&t| r.levy > t).map(|t| format!("Lévy distance {:.4e} exceeds {t}", r.levy));
    Ok(Artifact { contents: r.to_json(), default_name: "randmat.json", violation })
}
