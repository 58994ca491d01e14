//! Gapless regime at a root of unity: root densities on the rapidity line.

use serde::Serialize;

use crate::kernels::{build_string_table, BlockConvolver, Grid, KernelFamily, StringTable};
use crate::linsolve::{solve_dressing, SolveOptions};
use crate::params::{detect_root_of_unity, DerivedParams, Regime, RootOfUnityPoint};
use crate::tba_gapped::filling;
use crate::ysystem::{build_y_gapless, eta_gapless, BetaLimit, GaplessEtas};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Serialize)]
pub struct TbaStateGapless {
    pub grid: Grid,
    pub table: StringTable,
    pub rho: Vec<Vec<f64>>,
    pub rho_h: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub params: DerivedParams,
    pub residual: f64,
}

impl TbaStateGapless {
    pub fn gamma(&self) -> f64 {
        self.table.root.gamma()
    }

    pub fn kernels(&self) -> KernelFamily {
        KernelFamily::Gapless { gamma: self.gamma(), table: self.table.clone() }
    }

    /// 1 − 2 Σ n_j ∫ρ_j.
    pub fn sum_rule(&self) -> f64 {
        1.0 - 2.0
            * self
                .rho
                .iter()
                .zip(&self.table.entries)
                .map(|(r, e)| e.length as f64 * self.grid.integrate(r))
                .sum::<f64>()
    }
}

pub fn gapless_convolver(grid: &Grid, fam: &KernelFamily) -> BlockConvolver {
    BlockConvolver::new(grid, fam.count(), |j, k, l| fam.a_pair(j, k, l))
}

/// Root of unity matching the parameters, or an error naming the regime.
pub fn root_for(params: &DerivedParams, max_nu: usize) -> Result<RootOfUnityPoint> {
    if params.regime == Regime::Gapped {
        return Err(Error::WrongRegime { context: "tba_gapless", msg: "parameters are gapped".into() });
    }
    detect_root_of_unity(params.gamma.re, max_nu, 1e-9).ok_or_else(|| Error::WrongRegime {
        context: "tba_gapless",
        msg: format!("gamma/pi = {} is not a supported root of unity", params.gamma.re / std::f64::consts::PI),
    })
}

pub fn solve_rho_gapless(
    etas: &GaplessEtas,
    table: &StringTable,
    params: &DerivedParams,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<TbaStateGapless> {
    solve_rho_gapless_from(etas, table, params, grid, opts, None)
}

/// As [`solve_rho_gapless`] with an explicit starting guess for
/// sign(q_j)(1 + η_j)ρ_j.
pub fn solve_rho_gapless_from(
    etas: &GaplessEtas,
    table: &StringTable,
    params: &DerivedParams,
    grid: &Grid,
    opts: &SolveOptions,
    guess: Option<&[Vec<f64>]>,
) -> Result<TbaStateGapless> {
    if params.regime == Regime::Gapped {
        return Err(Error::WrongRegime { context: "tba_gapless", msg: "parameters are gapped".into() });
    }
    if etas.nodes != grid.nodes {
        return Err(Error::GridMismatch { expected: grid.len(), got: etas.nodes.len() });
    }
    if etas.values.len() != table.len() {
        return Err(Error::InvalidInput { context: "tba_gapless", msg: "eta family does not match string table".into() });
    }
    let fam = KernelFamily::Gapless { gamma: table.root.gamma(), table: table.clone() };
    let conv = gapless_convolver(grid, &fam);
    let s = params.shift / 2.0;
    let source: Vec<Vec<f64>> = (0..table.len())
        .map(|j| grid.nodes.iter().map(|&l| 0.5 * (fam.a(j, l + s) + fam.a(j, l - s))).collect())
        .collect();
    let theta = filling(&etas.values);
    let weights: Vec<Vec<f64>> =
        theta.iter().enumerate().map(|(j, t)| t.iter().map(|v| fam.sign(j) * v).collect()).collect();
    let sol = solve_dressing(&conv, &weights, &source, guess, opts, "tba_gapless")?;
    let rho: Vec<Vec<f64>> = sol.g.iter().zip(&weights).map(|(g, w)| g.iter().zip(w).map(|(a, b)| a * b).collect()).collect();
    let rho_h: Vec<Vec<f64>> = sol
        .g
        .iter()
        .zip(&rho)
        .enumerate()
        .map(|(j, (g, r))| g.iter().zip(r).map(|(a, b)| fam.sign(j) * a - b).collect())
        .collect();
    for (j, (r, rh)) in rho.iter().zip(&rho_h).enumerate() {
        let lo = r.iter().chain(rh).fold(f64::INFINITY, |m, &v| m.min(v));
        if lo < -1e-10 {
            return Err(Error::NegativeDensity { context: "tba_gapless", string: j + 1, value: lo });
        }
    }
    Ok(TbaStateGapless {
        grid: grid.clone(),
        table: table.clone(),
        rho,
        rho_h,
        eta: etas.values.clone(),
        params: *params,
        residual: sol.residual,
    })
}

/// η functions and densities in one go.
pub fn solve_gapless(
    params: &DerivedParams,
    root: RootOfUnityPoint,
    grid: &Grid,
    limit: &BetaLimit,
    opts: &SolveOptions,
) -> Result<TbaStateGapless> {
    let fam = build_y_gapless(root, params, C64::new(limit.betas[0], 0.0))?;
    let etas = eta_gapless(&fam, &grid.nodes, limit)?;
    let table = build_string_table(root);
    solve_rho_gapless(&etas, &table, params, grid, opts)
}
