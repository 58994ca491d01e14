//! Gapped regime: closed-form η₁, the η-recursion and the linear
//! equations for the root densities.

use serde::Serialize;

use crate::kernels::{a_n_gapped_re, BlockConvolver, Grid, KernelFamily};
use crate::linsolve::{solve_dressing, SolveOptions};
use crate::params::DerivedParams;
use crate::{Error, Result, C64};

pub const DEFAULT_N_MAX: usize = 20;

fn gapped_data(params: &DerivedParams, context: &'static str) -> Result<(f64, f64)> {
    match params.eta {
        Some(eta) if params.is_gapped() && eta > 0.0 => Ok((eta, params.x.re)),
        _ => Err(Error::WrongRegime { context, msg: format!("need gapped parameters, got {}", params.regime.name()) }),
    }
}

fn ratio(num: C64, den: C64, at: C64) -> Result<C64> {
    if den.norm() < 1e-14 * num.norm().max(1.0) {
        return Err(Error::PoleProximity { context: "tba_gapped", at: format!("afrak({at})") });
    }
    Ok(num / den)
}

pub fn afrak(lambda: C64, params: &DerivedParams) -> Result<C64> {
    let (eta, x) = gapped_data(params, "tba_gapped")?;
    let ie = C64::new(0.0, eta);
    let f1 = ratio((2.0 * lambda + ie).sin(), (2.0 * lambda - ie).sin(), lambda)?;
    let f2 = ratio((lambda - x / 2.0 - ie).sin(), (lambda + x / 2.0 + ie).sin(), lambda)?;
    let f3 = ratio((lambda - x / 2.0).sin(), (lambda + x / 2.0).sin(), lambda)?;
    Ok(f1 * f2 * f3)
}

pub fn eta1(lambda: C64, params: &DerivedParams) -> Result<C64> {
    let (eta, _) = gapped_data(params, "tba_gapped")?;
    let h = C64::new(0.0, eta / 2.0);
    let lo = afrak(lambda - h, params)?;
    let hi = afrak(lambda + h, params)?;
    if hi.norm() < 1e-300 {
        return Err(Error::PoleProximity { context: "tba_gapped", at: format!("eta1({lambda})") });
    }
    Ok(-1.0 + (1.0 + lo) * (1.0 + 1.0 / hi))
}

/// η_1..η_{n_max} at a complex point, from η₁ on the lattice
/// λ + i m η/2 and the recursion
/// η_{k+1}(λ) = −1 + η_k(λ + iη/2) η_k(λ − iη/2) / (1 + η_{k−1}(λ)).
pub fn eta_all(lambda: C64, n_max: usize, params: &DerivedParams) -> Result<Vec<C64>> {
    let (eta, _) = gapped_data(params, "tba_gapped")?;
    if n_max == 0 {
        return Ok(Vec::new());
    }
    // Layer k holds η_k at offsets m = −s..=s with s = n_max − k.
    let s1 = n_max - 1;
    let mut lower: Vec<C64> = vec![C64::new(0.0, 0.0); 2 * n_max + 1];
    let mut lower_span = n_max;
    let mut cur: Vec<C64> = (0..=2 * s1)
        .map(|i| eta1(lambda + C64::new(0.0, (i as f64 - s1 as f64) * eta / 2.0), params))
        .collect::<Result<_>>()?;
    let mut span = s1;
    let mut out = vec![cur[span]];
    for k in 1..n_max {
        let s = span - 1;
        let mut next = Vec::with_capacity(2 * s + 1);
        for i in 0..=2 * s {
            let m = i as isize - s as isize;
            let d = 1.0 + lower[(m + lower_span as isize) as usize];
            if d.norm() < 1e-300 {
                return Err(Error::RecursionPole { n: k - 1 });
            }
            let up = cur[(m + 1 + span as isize) as usize];
            let dn = cur[(m - 1 + span as isize) as usize];
            next.push(-1.0 + up * dn / d);
        }
        lower = std::mem::replace(&mut cur, next);
        lower_span = span;
        span = s;
        out.push(cur[span]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaFamilyGapped {
    pub n_max: usize,
    pub grid: Grid,
    /// samples[n][i] = η_{n+1}(λ_i).
    pub samples: Vec<Vec<f64>>,
    pub params: DerivedParams,
}

impl EtaFamilyGapped {
    pub fn eval(&self, lambda: C64) -> Result<Vec<C64>> {
        eta_all(lambda, self.n_max, &self.params)
    }
}

pub fn eta_recursion(n_max: usize, params: &DerivedParams, grid: &Grid) -> Result<EtaFamilyGapped> {
    if n_max == 0 {
        return Err(Error::InvalidInput { context: "tba_gapped", msg: "n_max must be >= 1".into() });
    }
    let mut samples = vec![vec![0.0; grid.len()]; n_max];
    for (i, &l) in grid.nodes.iter().enumerate() {
        let e = eta_all(C64::new(l, 0.0), n_max, params)?;
        for (n, v) in e.iter().enumerate() {
            let scale = v.norm().max(1.0);
            if v.im.abs() > 1e-9 * scale || v.re.is_nan() {
                return Err(Error::ComplexResidue { context: "tba_gapped", value: v.im });
            }
            samples[n][i] = v.re;
        }
    }
    Ok(EtaFamilyGapped { n_max, grid: grid.clone(), samples, params: *params })
}

#[derive(Debug, Clone, Serialize)]
pub struct TbaStateGapped {
    pub grid: Grid,
    pub rho: Vec<Vec<f64>>,
    pub rho_h: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub params: DerivedParams,
    pub residual: f64,
}

pub fn filling(eta: &[Vec<f64>]) -> Vec<Vec<f64>> {
    eta.iter().map(|e| e.iter().map(|&v| 1.0 / (1.0 + v)).collect()).collect()
}

impl TbaStateGapped {
    pub fn n_max(&self) -> usize {
        self.rho.len()
    }

    /// 1 − 2 Σ n ∫ρ_n, zero for a state at half filling.
    pub fn sum_rule(&self) -> f64 {
        1.0 - 2.0 * self.rho.iter().enumerate().map(|(n, r)| (n + 1) as f64 * self.grid.integrate(r)).sum::<f64>()
    }

    pub fn kernels(&self) -> KernelFamily {
        KernelFamily::Gapped { eta: self.params.eta.unwrap_or(0.0), n_max: self.n_max() }
    }
}

pub fn gapped_convolver(grid: &Grid, eta: f64, n_max: usize) -> BlockConvolver {
    let fam = KernelFamily::Gapped { eta, n_max };
    BlockConvolver::new(grid, n_max, |j, k, l| fam.a_pair(j, k, l))
}

pub fn solve_rho_gapped(
    family: &EtaFamilyGapped,
    params: &DerivedParams,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<TbaStateGapped> {
    solve_rho_gapped_from(family, params, grid, opts, None)
}

/// As [`solve_rho_gapped`] with an explicit starting guess for (1 + η_n)ρ_n.
pub fn solve_rho_gapped_from(
    family: &EtaFamilyGapped,
    params: &DerivedParams,
    grid: &Grid,
    opts: &SolveOptions,
    guess: Option<&[Vec<f64>]>,
) -> Result<TbaStateGapped> {
    let (eta, x) = gapped_data(params, "tba_gapped")?;
    if family.grid.nodes != grid.nodes {
        return Err(Error::GridMismatch { expected: grid.len(), got: family.grid.len() });
    }
    let n_max = family.n_max;
    let conv = gapped_convolver(grid, eta, n_max);
    let source: Vec<Vec<f64>> = (1..=n_max)
        .map(|n| {
            grid.nodes.iter().map(|&l| 0.5 * (a_n_gapped_re(n, l + x / 2.0, eta) + a_n_gapped_re(n, l - x / 2.0, eta))).collect()
        })
        .collect();
    let theta = filling(&family.samples);
    let sol = solve_dressing(&conv, &theta, &source, guess, opts, "tba_gapped")?;
    let rho: Vec<Vec<f64>> = sol.g.iter().zip(&theta).map(|(g, t)| g.iter().zip(t).map(|(a, b)| a * b).collect()).collect();
    let rho_h: Vec<Vec<f64>> = sol.g.iter().zip(&rho).map(|(g, r)| g.iter().zip(r).map(|(a, b)| a - b).collect()).collect();
    for (n, (r, rh)) in rho.iter().zip(&rho_h).enumerate() {
        let lo = r.iter().chain(rh).fold(f64::INFINITY, |m, &v| m.min(v));
        if lo < -1e-8 {
            return Err(Error::NegativeDensity { context: "tba_gapped", string: n + 1, value: lo });
        }
    }
    Ok(TbaStateGapped {
        grid: grid.clone(),
        rho,
        rho_h,
        eta: family.samples.clone(),
        params: *params,
        residual: sol.residual,
    })
}
