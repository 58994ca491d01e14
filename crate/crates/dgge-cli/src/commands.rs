use std::f64::consts::PI;

use nalgebra::DMatrix;
use trotter_dgge::exact_small::{
    build_charge_q1, build_floquet, build_transfer_matrix, diagonal_ensemble_sz, evolve_and_average, max_abs,
    normalized_transfer_at_zero, one_magnon_sector, proportionality, Branch,
};
use trotter_dgge::free_fermion::{
    current_asymptotic_neel, current_series, magnetization_asymptotic, magnetization_asymptotic_integral,
    magnetization_series, FreePointSpec,
};
use trotter_dgge::observables::{finite_volume_sz, magnetization_gapless, magnetization_gapped, FiniteVolumeInput};
use trotter_dgge::params::{derive_params, detect_root_of_unity, is_free_point, DerivedParams, ModelParams, Regime};
use trotter_dgge::tba_gapless::{root_for, solve_gapless};
use trotter_dgge::tba_gapped::{eta_all, eta_recursion, solve_rho_gapped};
use trotter_dgge::ysystem::{build_y_gapless, floquet_normalization, y_gapped_limit, QtmData};
use trotter_dgge::C64;

use crate::config::Knobs;
use crate::output::{Cell, Report};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EdMode {
    Dgge,
    Evolve,
    Charges,
    Transfer,
    OneMagnon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FreeMode {
    Evolve,
    Asymptotic,
    Current,
}

/// A report plus the number of points whose solve failed numerically.
pub struct Outcome {
    pub report: Report,
    pub failures: usize,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome { report, failures: 0 }
    }
}

pub fn params_at(delta: f64, tau: f64) -> Result<DerivedParams, CliError> {
    Ok(derive_params(&ModelParams::new(delta, tau))?)
}

fn model(k: &Knobs) -> Result<DerivedParams, CliError> {
    params_at(k.delta()?, k.tau()?)
}

pub fn params(k: &Knobs) -> Result<Report, CliError> {
    let p = model(k)?;
    let root = match p.regime {
        Regime::Gapped => None,
        _ => detect_root_of_unity(p.gamma.re, k.max_nu(), 1e-9),
    };
    Ok(Report::record()
        .field("delta", p.delta)
        .field("tau", p.tau)
        .field("regime", p.regime.name())
        .field("gamma_re", p.gamma.re)
        .field("gamma_im", p.gamma.im)
        .field("gamma_over_pi", p.gamma.re / PI)
        .field("eta", p.eta)
        .field("x_re", p.x.re)
        .field("x_im", p.x.im)
        .field("shift", p.shift)
        .field("tau_th", p.tau_th)
        .field("free_point", if is_free_point(p.delta, p.tau) { "yes" } else { "no" })
        .field("root_of_unity", root.map(|r| format!("{},{}", r.nu1, r.nu2))))
}

pub struct StagPoint {
    pub staggered: f64,
    pub uniform: f64,
    pub m0: f64,
    pub m1: f64,
    pub per_string: Vec<f64>,
    pub sum_rule: Option<f64>,
}

/// Late-time magnetization from whichever description applies at `p`.
pub fn stag_point(p: &DerivedParams, k: &Knobs) -> Result<StagPoint, CliError> {
    let opts = k.solve_options();
    let (m, sum_rule) = match p.regime {
        Regime::Gapped => {
            let grid = k.gapped_grid()?;
            let fam = eta_recursion(k.n_max(), p, &grid)?;
            let st = solve_rho_gapped(&fam, p, &grid, &opts)?;
            (magnetization_gapped(&st, &opts)?, st.sum_rule())
        }
        Regime::Gapless => {
            let root = root_for(p, k.max_nu())?;
            let st = solve_gapless(p, root, &k.line_grid()?, &k.beta_limit()?, &opts)?;
            (magnetization_gapless(&st, &opts)?, st.sum_rule())
        }
        Regime::FreePoint => {
            let a = magnetization_asymptotic(&FreePointSpec::new(p.delta, p.tau)?);
            let (m0, m1) = (a[1], a[0]);
            return Ok(StagPoint {
                staggered: (m0 - m1) / 2.0,
                uniform: (m0 + m1) / 2.0,
                m0,
                m1,
                per_string: Vec::new(),
                sum_rule: None,
            });
        }
    };
    Ok(StagPoint {
        staggered: m.staggered,
        uniform: m.uniform,
        m0: m.m0,
        m1: m.m1,
        per_string: m.per_string,
        sum_rule: Some(sum_rule),
    })
}

pub fn stagmag(k: &Knobs) -> Result<Report, CliError> {
    let p = model(k)?;
    let s = stag_point(&p, k)?;
    Ok(Report::record()
        .field("delta", p.delta)
        .field("tau", p.tau)
        .field("staggered", s.staggered)
        .field("abs", s.staggered.abs())
        .field("uniform", s.uniform)
        .field("m0", s.m0)
        .field("m1", s.m1)
        .field("regime", p.regime.name())
        .field("gamma", p.gamma.re)
        .field("eta", p.eta)
        .field("per_string", s.per_string)
        .field("sum_rule", s.sum_rule))
}

pub fn stagmag_sweep(k: &Knobs) -> Result<Outcome, CliError> {
    use rayon::prelude::*;
    let delta = k.delta()?;
    let taus = k.sweep()?;
    let rows: Vec<(Vec<Cell>, bool)> = taus
        .par_iter()
        .map(|&tau| {
            let p = match params_at(delta, tau) {
                Ok(p) => p,
                Err(e) => return (sweep_row(tau, None, None, &e.to_string()), e.is_numerical()),
            };
            match stag_point(&p, k) {
                Ok(s) => (sweep_row(tau, Some(&p), Some(&s), "ok"), false),
                Err(e) => (sweep_row(tau, Some(&p), None, &e.to_string()), e.is_numerical()),
            }
        })
        .collect();
    let mut report =
        Report::table(&["tau", "regime", "gamma_over_pi", "staggered", "uniform", "sum_rule", "status"]);
    let mut failures = 0;
    for (row, failed) in rows {
        failures += failed as usize;
        report.push(row);
    }
    Ok(Outcome { report, failures })
}

fn sweep_row(tau: f64, p: Option<&DerivedParams>, s: Option<&StagPoint>, status: &str) -> Vec<Cell> {
    vec![
        tau.into(),
        p.map(|p| p.regime.name()).into(),
        p.map(|p| p.gamma.re / PI).into(),
        s.map(|s| s.staggered).into(),
        s.map(|s| s.uniform).into(),
        s.and_then(|s| s.sum_rule).into(),
        status.into(),
    ]
}

pub fn dgge(k: &Knobs) -> Result<Report, CliError> {
    let p = model(k)?;
    let opts = k.solve_options();
    let (nodes, rho, rho_h, eta) = match p.regime {
        Regime::Gapped => {
            let grid = k.gapped_grid()?;
            let st = solve_rho_gapped(&eta_recursion(k.n_max(), &p, &grid)?, &p, &grid, &opts)?;
            (grid.nodes, st.rho, st.rho_h, st.eta)
        }
        Regime::Gapless => {
            let root = root_for(&p, k.max_nu())?;
            let grid = k.line_grid()?;
            let st = solve_gapless(&p, root, &grid, &k.beta_limit()?, &opts)?;
            (grid.nodes, st.rho, st.rho_h, st.eta)
        }
        Regime::FreePoint => {
            return Err(CliError::Usage("free point: no string description, use the `free` command".into()))
        }
    };
    let mut header = vec!["lambda".to_string()];
    for j in 1..=rho.len() {
        header.extend([format!("rho_{j}"), format!("rho_h_{j}"), format!("eta_{j}")]);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut report = Report::table(&header);
    for (i, &l) in nodes.iter().enumerate() {
        let mut row: Vec<Cell> = vec![l.into()];
        for j in 0..rho.len() {
            row.extend([rho[j][i].into(), rho_h[j][i].into(), eta[j][i].into()]);
        }
        report.push(row);
    }
    Ok(report)
}

const PROBES: [C64; 3] = [C64::new(0.31, 0.17), C64::new(-0.42, 0.27), C64::new(0.12, -0.35)];

pub fn ysystem_check(k: &Knobs) -> Result<Outcome, CliError> {
    let p = model(k)?;
    let mut report = Report::table(&["relation", "u_re", "u_im", "residual", "tolerance", "pass"]);
    let mut failures = 0;
    let mut add = |name: String, u: C64, r: f64, tol: f64| {
        let ok = r < tol;
        failures += !ok as usize;
        report.push(vec![name.into(), u.re.into(), u.im.into(), r.into(), tol.into(), if ok { "yes" } else { "no" }.into()]);
    };
    let q = QtmData::from_params(&p, C64::new(0.1, 0.0));
    for &u in &PROBES {
        for (j, m) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
            add(format!("t-system T{j}T{m}"), u, q.t_system_residual(j, m, u)?, 1e-8);
        }
    }
    match p.regime {
        Regime::Gapped => {
            for &u in &PROBES {
                for j in 1..5 {
                    add(format!("y-system Y{j}"), u, q.y_system_residual(j, u)?, 1e-8);
                }
            }
            let cfg = k.beta_limit()?;
            for &l in &[0.05, 0.4, -0.9, 1.2] {
                let closed = eta_all(C64::new(l, 0.0), 2, &p)?;
                for j in 1..=2 {
                    let y = y_gapped_limit(j, l, &p, &cfg)?;
                    let r = (y - closed[j - 1]).norm() / closed[j - 1].norm().max(1.0);
                    add(format!("beta->0 eta_{j}"), C64::new(l, 0.0), r, 1e-6);
                }
            }
        }
        _ => {
            let root = root_for(&p, k.max_nu())?;
            let fam = build_y_gapless(root, &p, C64::new(0.05, 0.0))?;
            for &u in &PROBES {
                for (name, r) in fam.residuals(u)? {
                    add(format!("truncated {name}"), u, r, 1e-7);
                }
            }
        }
    }
    Ok(Outcome { report, failures })
}

pub fn ed(k: &Knobs, mode: EdMode) -> Result<Report, CliError> {
    let p = model(k)?;
    let l = k.length.unwrap_or(10);
    Ok(match mode {
        EdMode::Dgge => {
            let de = diagonal_ensemble_sz(&p, l)?;
            Report::record()
                .field("l", l)
                .field("staggered", de.staggered)
                .field("uniform", de.uniform)
                .field("m0", de.m0)
                .field("m1", de.m1)
                .field("probability", de.probability)
                .field("sector_dim", de.sector_dim)
                .field("clusters", de.clusters)
                .field("largest_cluster", de.largest_cluster)
        }
        EdMode::Evolve => {
            let (steps, window) = k.run_length(1000)?;
            let ev = evolve_and_average(&p, l, steps, window)?;
            let mut r = Report::table(&["t", "staggered", "sz_even", "sz_odd", "running"]).note(&format!(
                "L={l} window {}..{} tail staggered {} antisymmetry {:e}",
                window.0, window.1, ev.tail_staggered, ev.antisymmetry
            ));
            for (t, sz) in ev.sz.iter().enumerate() {
                let run = (t >= window.0 && t <= window.1).then(|| ev.running[t - window.0]);
                r.push(vec![t.into(), ev.staggered[t].into(), sz[0].into(), sz[1].into(), run.into()]);
            }
            r
        }
        EdMode::Charges => {
            let u = build_floquet(&p, l)?;
            let qp = build_charge_q1(&p, l, Branch::Plus)?;
            let qm = build_charge_q1(&p, l, Branch::Minus)?;
            Report::record()
                .field("l", l)
                .field("commutator_plus", qp.commutator_norm(&u))
                .field("commutator_minus", qm.commutator_norm(&u))
                .field("hermiticity_plus", qp.hermiticity_error())
                .field("hermiticity_minus", qm.hermiticity_error())
        }
        EdMode::Transfer => {
            let a = build_transfer_matrix(PROBES[0], &p, l)?;
            let b = build_transfer_matrix(PROBES[1], &p, l)?;
            let xl = p.lattice_shift();
            let t1 = build_transfer_matrix(xl / 2.0, &p, l)?;
            let t2 = build_transfer_matrix(-p.gamma - xl / 2.0, &p, l)?;
            let (c, dev) = proportionality(&build_floquet(&p, l)?.mat, &t1.mul(&t2).mat);
            let c = c / floquet_normalization(p.gamma, xl, l);
            let z = normalized_transfer_at_zero(&p, l)?;
            let dim = z.mat.nrows();
            Report::record()
                .field("l", l)
                .field("commutator", a.commutator_norm(&b))
                .field("floquet_deviation", dev)
                .field("floquet_scalar_re", c.re)
                .field("floquet_scalar_im", c.im)
                .field("identity_at_zero", max_abs(&(z.mat - DMatrix::identity(dim, dim))))
        }
        EdMode::OneMagnon => {
            let mut r = Report::table(&[
                "k", "root_re", "root_im", "phase", "sz_m0", "sz_m1", "gaudin_m0", "gaudin_m1", "residual",
            ]);
            for s in one_magnon_sector(&p, l)? {
                let fv = |m| finite_volume_sz(&FiniteVolumeInput { roots: vec![s.root], l, params: p, parity: m });
                r.push(vec![
                    s.k.into(),
                    s.root.re.into(),
                    s.root.im.into(),
                    s.phase.into(),
                    s.sz_m0.into(),
                    s.sz_m1.into(),
                    fv(0)?.into(),
                    fv(1)?.into(),
                    s.residual.into(),
                ]);
            }
            r
        }
    })
}

/// τ moved onto the nearest Gaussian line when it is within `free_tol`.
fn snap_free(delta: f64, tau: f64, tol: f64) -> f64 {
    if delta.abs() < tol {
        return tau;
    }
    let n = delta * tau / (2.0 * PI);
    if n.round() != 0.0 && (n - n.round()).abs() < tol {
        2.0 * PI * n.round() / delta
    } else {
        tau
    }
}

pub fn free(k: &Knobs, mode: FreeMode) -> Result<Report, CliError> {
    let delta = k.delta()?;
    let delta = if delta.abs() < k.free_tol.unwrap_or(1e-6) { 0.0 } else { delta };
    let tau = snap_free(delta, k.tau()?, k.free_tol.unwrap_or(1e-6));
    let spec = FreePointSpec::new(delta, tau)?;
    let l = k.length.unwrap_or(2000);
    Ok(match mode {
        FreeMode::Evolve => {
            let (steps, _) = k.run_length(10_000)?;
            let mut r = Report::table(&["t", "sz_even", "sz_odd"]);
            for (t, m) in magnetization_series(&spec, l, steps as u64)?.iter().enumerate() {
                r.push(vec![t.into(), m[0].into(), m[1].into()]);
            }
            r
        }
        FreeMode::Asymptotic => {
            let a = magnetization_asymptotic(&spec);
            Report::record()
                .field("delta", delta)
                .field("tau", tau)
                .field("even", a[0])
                .field("odd", a[1])
                .field("magnitude", a[0].abs())
                .field("mode_integral", magnetization_asymptotic_integral(&spec, 10_000))
        }
        FreeMode::Current => {
            let c = current_asymptotic_neel(&spec);
            let (steps, (w0, w1)) = k.run_length(10_000)?;
            let series = current_series(&spec, l, steps as u64)?;
            let avg = series[w0..=w1].iter().sum::<f64>() / (w1 - w0 + 1) as f64;
            Report::record()
                .field("delta", delta)
                .field("tau", tau)
                .field("microscopic", c.microscopic)
                .field("ghd", c.ghd)
                .field("lattice_average", avg)
        }
    })
}
