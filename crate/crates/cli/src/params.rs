//! Numerical parameters from flags and an optional JSON config file. A flag
//! always takes precedence over the same key in the file.

use std::path::Path;

use clap::Args;
use dyson_core::dyson::SolverConfig;
use serde::Deserialize;

use crate::failure::Failure;

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// JSON file with any of: epsilon, window, grid, tol, max_iter, seed, threads.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Imaginary offset ε of the evaluation line t + iε.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Evaluation window as lo:hi.
    #[arg(long, global = true, value_parser = parse_window, allow_hyphen_values = true)]
    pub window: Option<(f64, f64)>,
    /// Number of grid points K.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Residual tolerance of the fixed-point solver, relative to γ.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path; each command has its own default file name.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
struct FileParams {
    epsilon: Option<f64>,
    window: Option<(f64, f64)>,
    grid: Option<usize>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
}

/// Parameters after merging flags over the config file.
#[derive(Clone, Debug)]
pub struct Params {
    pub epsilon: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub solver: SolverConfig,
}

impl Params {
    pub fn resolve(flags: &Flags) -> Result<Self, Failure> {
        let file = match &flags.config {
            Some(path) => {
                let text = read(path)?;
                serde_json::from_str::<FileParams>(&text)
                    .map_err(|e| Failure::Input(format!("config {}: {e}", path.display())))?
            }
            None => FileParams::default(),
        };
        let mut solver = SolverConfig::default();
        if let Some(t) = flags.tol.or(file.tol) {
            solver.tol_residual = t;
        }
        if let Some(n) = flags.max_iter.or(file.max_iter) {
            solver.max_iter = n;
        }
        solver.validate().map_err(Failure::from)?;
        let p = Params {
            epsilon: flags.epsilon.or(file.epsilon),
            window: flags.window.or(file.window),
            grid: flags.grid.or(file.grid),
            seed: flags.seed.or(file.seed),
            threads: flags.threads.or(file.threads),
            solver,
        };
        if let Some(e) = p.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Failure::Input(format!("epsilon must be positive, got {e}")));
            }
        }
        if let Some((lo, hi)) = p.window {
            if !(lo < hi) {
                return Err(Failure::Input(format!("window must satisfy lo < hi, got {lo}:{hi}")));
            }
        }
        if p.grid.is_some_and(|k| k < 2) {
            return Err(Failure::Input("grid needs at least 2 points".into()));
        }
        if p.threads == Some(0) {
            return Err(Failure::Input("threads must be at least 1".into()));
        }
        Ok(p)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULT_EPSILON)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower end '{lo}': {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper end '{hi}': {e}"))?;
    Ok((lo, hi))
}

pub fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_syntax() {
        assert_eq!(parse_window("-3:2.5"), Ok((-3.0, 2.5)));
        assert!(parse_window("3").is_err());
        assert!(parse_window("a:1").is_err());
    }
}
