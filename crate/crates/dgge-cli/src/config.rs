use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;
use trotter_dgge::kernels::{make_grid, Domain, Grid};
use trotter_dgge::linsolve::{Method, SolveOptions};
use trotter_dgge::ysystem::BetaLimit;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every numeric knob and output setting. All fields are optional so that a
/// config file can be layered under the command line: flag (or its
/// environment variable) wins, then the file, then the built-in default.
#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Knobs {
    /// Anisotropy Δ
    #[arg(long, global = true, env = "DGGE_DELTA", allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Trotter step τ
    #[arg(long, global = true, env = "DGGE_TAU", allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Number of strings kept in the gapped hierarchy [default: 20]
    #[arg(long, global = true, env = "DGGE_N_MAX")]
    pub n_max: Option<usize>,
    /// Nodes on the gapped rapidity circle [default: 512]
    #[arg(long, global = true, env = "DGGE_GRID")]
    pub grid: Option<usize>,
    /// Nodes on the truncated gapless rapidity line [default: 1024]
    #[arg(long, global = true, env = "DGGE_GRID_LINE")]
    pub grid_line: Option<usize>,
    /// Rapidity cutoff Λ in the gapless regime [default: 20]
    #[arg(long, global = true, env = "DGGE_CUTOFF")]
    pub cutoff: Option<f64>,
    /// Linear solver tolerance [default: 1e-10]
    #[arg(long, global = true, env = "DGGE_TOL")]
    pub tol: Option<f64>,
    /// Linear solver iteration cap [default: 2000]
    #[arg(long, global = true, env = "DGGE_MAX_ITER")]
    pub max_iter: Option<usize>,
    /// GMRES restart length [default: 60]
    #[arg(long, global = true, env = "DGGE_RESTART")]
    pub restart: Option<usize>,
    /// Three decreasing β values for the β → 0 extrapolation [default: 1e-5,1e-6,1e-7]
    #[arg(long, global = true, env = "DGGE_BETAS", value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Agreement required between successive β extrapolants [default: 1e-7]
    #[arg(long, global = true, env = "DGGE_BETA_TOL")]
    pub beta_tol: Option<f64>,
    /// Largest ν₁, ν₂ tried when matching γ to a root of unity [default: 8]
    #[arg(long, global = true, env = "DGGE_MAX_NU")]
    pub max_nu: Option<usize>,
    /// Chain length [default: 10 for ed, 2000 for free]
    #[arg(long, global = true, env = "DGGE_LENGTH")]
    pub length: Option<usize>,
    /// Number of Floquet steps [default: 1000 for ed, 10000 for free]
    #[arg(long, global = true, env = "DGGE_STEPS")]
    pub steps: Option<usize>,
    /// First step of the averaging window [default: steps/10]
    #[arg(long, global = true, env = "DGGE_WINDOW_START")]
    pub window_start: Option<usize>,
    /// Last step of the averaging window [default: steps]
    #[arg(long, global = true, env = "DGGE_WINDOW_END")]
    pub window_end: Option<usize>,
    /// Sweep start [default: 0.05]
    #[arg(long, global = true, env = "DGGE_TAU_MIN")]
    pub tau_min: Option<f64>,
    /// Sweep end [default: 3.0]
    #[arg(long, global = true, env = "DGGE_TAU_MAX")]
    pub tau_max: Option<f64>,
    /// Sweep points [default: 40]
    #[arg(long, global = true, env = "DGGE_TAU_POINTS")]
    pub tau_points: Option<usize>,
    /// Distance in Δτ/2π within which `free` snaps τ onto the nearest
    /// Gaussian line [default: 1e-6]
    #[arg(long, global = true, env = "DGGE_FREE_TOL")]
    pub free_tol: Option<f64>,
    /// Worker threads for sweeps [default: all cores]
    #[arg(long, global = true, env = "DGGE_THREADS")]
    pub threads: Option<usize>,
    /// Output format [default: json for scalar results, csv for tables]
    #[arg(long, global = true, env = "DGGE_FORMAT")]
    pub format: Option<Format>,
    /// Output file (directory for `reproduce`) [default: stdout, `.` for reproduce]
    #[arg(long, global = true, env = "DGGE_OUTPUT")]
    pub output: Option<PathBuf>,
}

macro_rules! layer {
    ($a:ident, $b:ident, $($f:ident),*) => {
        Knobs { $($f: $a.$f.or($b.$f)),* }
    };
}

impl Knobs {
    pub fn load(path: &Path) -> Result<Knobs, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Fields of `self` take precedence over `file`.
    pub fn over(self, file: Knobs) -> Knobs {
        let a = self;
        let b = file;
        layer!(
            a, b, delta, tau, n_max, grid, grid_line, cutoff, tol, max_iter, restart, betas, beta_tol, max_nu,
            length, steps, window_start, window_end, tau_min, tau_max, tau_points, free_tol, threads, format, output
        )
    }

    pub fn delta(&self) -> Result<f64, CliError> {
        self.delta.ok_or_else(|| CliError::Usage("--delta is required".into()))
    }

    pub fn tau(&self) -> Result<f64, CliError> {
        self.tau.ok_or_else(|| CliError::Usage("--tau is required".into()))
    }

    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or(20)
    }

    pub fn max_nu(&self) -> usize {
        self.max_nu.unwrap_or(8)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol.unwrap_or(1e-10),
            max_iter: self.max_iter.unwrap_or(2000),
            method: Method::Gmres { restart: self.restart.unwrap_or(60) },
        }
    }

    pub fn beta_limit(&self) -> Result<BetaLimit, CliError> {
        let mut cfg = BetaLimit::default();
        if let Some(b) = &self.betas {
            if b.len() != 3 || !b.iter().all(|v| *v > 0.0) || !(b[0] > b[1] && b[1] > b[2]) {
                return Err(CliError::Usage("--betas needs three positive decreasing values".into()));
            }
            cfg.betas = [b[0], b[1], b[2]];
        }
        if let Some(t) = self.beta_tol {
            cfg.tol = t;
        }
        Ok(cfg)
    }

    pub fn gapped_grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::periodic_midpoint(self.grid.unwrap_or(512))?)
    }

    pub fn line_grid(&self) -> Result<Grid, CliError> {
        let cutoff = self.cutoff.unwrap_or(20.0);
        if !(cutoff > 0.0) {
            return Err(CliError::Usage("--cutoff must be positive".into()));
        }
        Ok(make_grid(Domain::TruncatedLine { cutoff }, self.grid_line.unwrap_or(1024))?)
    }

    pub fn sweep(&self) -> Result<Vec<f64>, CliError> {
        let lo = self.tau_min.unwrap_or(0.05);
        let hi = self.tau_max.unwrap_or(3.0);
        let n = self.tau_points.unwrap_or(40);
        if n == 0 || !(lo <= hi) {
            return Err(CliError::Usage(format!("empty sweep {lo}..{hi} with {n} points")));
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
    }

    /// (steps, window) with the window clamped to the run.
    pub fn run_length(&self, default_steps: usize) -> Result<(usize, (usize, usize)), CliError> {
        let steps = self.steps.unwrap_or(default_steps);
        let w1 = self.window_end.unwrap_or(steps);
        let w0 = self.window_start.unwrap_or(steps / 10);
        if w0 > w1 || w1 > steps {
            return Err(CliError::Usage(format!("window {w0}..{w1} does not fit in {steps} steps")));
        }
        Ok((steps, (w0, w1)))
    }
}
