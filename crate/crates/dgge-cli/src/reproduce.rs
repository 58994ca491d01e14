use std::f64::consts::PI;

use rayon::prelude::*;
use trotter_dgge::exact_small::{diagonal_ensemble_sz, evolve_and_average, MAX_DIAG_L};
use trotter_dgge::params::{tau_for_gamma, threshold_tau, Regime, RootOfUnityPoint};
use trotter_dgge::tba_gapped::{eta_recursion, solve_rho_gapped};

use crate::commands::{params_at, stag_point, Outcome};
use crate::config::Knobs;
use crate::output::{Cell, Report};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    #[value(name = "figS4", alias = "figs4")]
    FigS4,
}

impl Figure {
    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::FigS4 => "figS4",
        }
    }
}

pub fn run(fig: Figure, k: &Knobs) -> Result<Outcome, CliError> {
    match fig {
        Figure::Fig1 => fig1(k),
        Figure::Fig2 => fig2(k).map(Outcome::from),
        Figure::Fig3 => fig3(k).map(Outcome::from),
        Figure::FigS4 => fig_s4(k).map(Outcome::from),
    }
}

/// τ above the threshold where γ = π/(ν₁ + 1/ν₂).
fn root_tau(delta: f64, root: RootOfUnityPoint) -> Result<f64, CliError> {
    Ok(tau_for_gamma(delta, root.gamma(), (threshold_tau(delta), 2.0 * PI / delta))?)
}

fn roots(max_nu: usize) -> Vec<RootOfUnityPoint> {
    let mut out = Vec::new();
    for nu1 in 2..=max_nu.max(2) {
        for nu2 in 1..=2 {
            out.extend(RootOfUnityPoint::new(nu1, nu2));
        }
    }
    out
}

/// Staggered magnetization against τ: a gapped sweep below the threshold and
/// the supported roots of unity above it.
fn fig1(k: &Knobs) -> Result<Outcome, CliError> {
    let delta = k.delta.unwrap_or(2.5);
    if delta <= 1.0 {
        return Err(CliError::Usage("fig1 needs delta > 1".into()));
    }
    let th = threshold_tau(delta);
    let n = k.tau_points.unwrap_or(16);
    let mut points: Vec<(f64, Option<RootOfUnityPoint>)> =
        (0..n).map(|i| (th * (i as f64 + 0.5) / n as f64, None)).collect();
    for r in roots(k.max_nu.unwrap_or(4)) {
        points.push((root_tau(delta, r)?, Some(r)));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rows: Vec<(Vec<Cell>, bool)> = points
        .par_iter()
        .map(|&(tau, root)| {
            let (nu1, nu2) = (root.map(|r| r.nu1), root.map(|r| r.nu2));
            let res = params_at(delta, tau).and_then(|p| stag_point(&p, k).map(|s| (p, s)));
            match res {
                Ok((p, s)) => (
                    vec![
                        tau.into(),
                        p.regime.name().into(),
                        (p.gamma.re / PI).into(),
                        nu1.into(),
                        nu2.into(),
                        s.staggered.into(),
                        s.sum_rule.into(),
                        "ok".into(),
                    ],
                    false,
                ),
                Err(e) => (
                    vec![
                        tau.into(),
                        Cell::Empty,
                        Cell::Empty,
                        nu1.into(),
                        nu2.into(),
                        Cell::Empty,
                        Cell::Empty,
                        e.to_string().into(),
                    ],
                    e.is_numerical(),
                ),
            }
        })
        .collect();
    let mut report =
        Report::table(&["tau", "regime", "gamma_over_pi", "nu1", "nu2", "staggered", "sum_rule", "status"])
            .note(&format!("delta={delta} tau_th={th}"));
    let mut failures = 0;
    for (r, f) in rows {
        failures += f as usize;
        report.push(r);
    }
    Ok(Outcome { report, failures })
}

/// ρ₁ and ρ₂ on the rapidity circle for a few gapped τ.
fn fig2(k: &Knobs) -> Result<Report, CliError> {
    let delta = k.delta.unwrap_or(3.0);
    if delta <= 1.0 {
        return Err(CliError::Usage("fig2 needs delta > 1".into()));
    }
    let th = threshold_tau(delta);
    let grid = k.gapped_grid()?;
    let opts = k.solve_options();
    let taus: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|f| f * th).collect();
    let states = taus
        .par_iter()
        .map(|&tau| {
            let p = params_at(delta, tau)?;
            Ok(solve_rho_gapped(&eta_recursion(k.n_max(), &p, &grid)?, &p, &grid, &opts)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut report = Report::table(&["tau", "lambda", "rho_1", "rho_2"]).note(&format!("delta={delta}"));
    for (tau, st) in taus.iter().zip(&states) {
        for (i, &l) in grid.nodes.iter().enumerate() {
            report.push(vec![(*tau).into(), l.into(), st.rho[0][i].into(), st.rho[1][i].into()]);
        }
    }
    Ok(report)
}

/// Staggered magnetization against time from the exact finite-chain evolution.
fn fig3(k: &Knobs) -> Result<Report, CliError> {
    let delta = k.delta.unwrap_or(2.5);
    if delta <= 1.0 {
        return Err(CliError::Usage("fig3 needs delta > 1".into()));
    }
    let l = k.length.unwrap_or(10);
    let steps = k.steps.unwrap_or(200);
    let taus = [
        0.7 * threshold_tau(delta),
        root_tau(delta, RootOfUnityPoint::new(3, 1)?)?,
        root_tau(delta, RootOfUnityPoint::new(2, 1)?)?,
    ];
    let runs = taus
        .par_iter()
        .map(|&tau| {
            let p = params_at(delta, tau)?;
            Ok((p, evolve_and_average(&p, l, steps, (0, steps))?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut report = Report::table(&["tau", "gamma_over_pi", "t", "staggered", "running"]).note(&format!(
        "delta={delta}: exact evolution of a periodic chain of L={l} sites in place of infinite-chain tensor-network data"
    ));
    for (tau, (p, ev)) in taus.iter().zip(&runs) {
        let g = if p.regime == Regime::Gapped { 0.0 } else { p.gamma.re / PI };
        for (t, s) in ev.staggered.iter().enumerate() {
            report.push(vec![(*tau).into(), g.into(), t.into(), (*s).into(), ev.running[t].into()]);
        }
    }
    Ok(report)
}

/// Finite-size diagonal ensemble against the string prediction as a function
/// of the shift, keeping only L divisible by 2k at γ = π/k.
fn fig_s4(k: &Knobs) -> Result<Report, CliError> {
    // Δ = 1.5 puts γ = π/4 at τ = π, where the shift diverges
    let deltas = [2.0, 2.5, 3.0, 4.0];
    let mut jobs = Vec::new();
    for kk in [3usize, 4, 5] {
        for &d in &deltas {
            jobs.push((kk, d));
        }
    }
    let blocks = jobs
        .par_iter()
        .map(|&(kk, d)| {
            let root = RootOfUnityPoint::new(kk - 1, 1)?;
            let tau = root_tau(d, root)?;
            let p = params_at(d, tau)?;
            let tba = stag_point(&p, k)?.staggered;
            let mut rows = Vec::new();
            let mut l = 2 * kk;
            while l <= MAX_DIAG_L {
                let ed = diagonal_ensemble_sz(&p, l)?.staggered;
                rows.push(vec![
                    (1.0 / kk as f64).into(),
                    d.into(),
                    tau.into(),
                    p.shift.into(),
                    l.into(),
                    ed.into(),
                    tba.into(),
                ]);
                l += 2 * kk;
            }
            Ok(rows)
        })
        .collect::<Result<Vec<Vec<Vec<Cell>>>, CliError>>()?;
    let mut report = Report::table(&["gamma_over_pi", "delta", "tau", "x", "l", "staggered_ed", "staggered_tba"]);
    for r in blocks.into_iter().flatten() {
        report.push(r);
    }
    Ok(report)
}
