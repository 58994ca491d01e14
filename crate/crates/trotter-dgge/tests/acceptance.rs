//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use trotter_dgge::exact_small::*;
use trotter_dgge::free_fermion::{magnetization_asymptotic, magnetization_series, FreePointSpec};
use trotter_dgge::kernels::{make_grid, Domain, Grid};
use trotter_dgge::linsolve::SolveOptions;
use trotter_dgge::observables::{
    finite_volume_sz, magnetization_gapless, magnetization_gapped, FiniteVolumeInput,
};
use trotter_dgge::params::{
    derive_params, tau_for_gamma, threshold_tau, DerivedParams, ModelParams, RootOfUnityPoint,
};
use trotter_dgge::tba_gapless::solve_gapless;
use trotter_dgge::tba_gapped::{eta_all, eta_recursion, solve_rho_gapped, TbaStateGapped};
use trotter_dgge::ysystem::{build_y_gapless, floquet_normalization, y_gapped_limit, BetaLimit, QtmData};
use trotter_dgge::{Result, C64};

fn p(delta: f64, tau: f64) -> Result<DerivedParams> {
    derive_params(&ModelParams::new(delta, tau))
}

fn pi3() -> Result<DerivedParams> {
    let root = RootOfUnityPoint::new(2, 1)?;
    p(2.5, tau_for_gamma(2.5, root.gamma(), (threshold_tau(2.5), 3.0))?)
}

fn gapped_state(pr: &DerivedParams, n_max: usize, n: usize) -> Result<TbaStateGapped> {
    let grid = Grid::periodic_midpoint(n)?;
    let fam = eta_recursion(n_max, pr, &grid)?;
    solve_rho_gapped(&fam, pr, &grid, &SolveOptions::default())
}

fn gapless_stag(root: RootOfUnityPoint, pr: &DerivedParams, cutoff: f64, n: usize) -> Result<(f64, f64)> {
    let grid = make_grid(Domain::TruncatedLine { cutoff }, n)?;
    let st = solve_gapless(pr, root, &grid, &BetaLimit::default(), &SolveOptions::default())?;
    let m = magnetization_gapless(&st, &SolveOptions::default())?;
    Ok((m.staggered, st.sum_rule()))
}

type Check = Result<(bool, String)>;

fn c1_threshold() -> Check {
    let t = threshold_tau(2.5);
    let closed = 2.0 * PI / 3.5;
    Ok(((t - 1.7952).abs() <= 1e-4 && (t - closed).abs() < 1e-15, format!("tau_th(2.5) = {t:.6}")))
}

fn c2_free_line() -> Check {
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut worst_closed = 0.0f64;
    for &(d, t) in &[(2.0, PI), (4.0, PI / 2.0), (2.5, 0.8 * PI)] {
        let spec = FreePointSpec::new(d, t)?;
        let ser = magnetization_series(&spec, 2000, 10_000)?;
        let tail = &ser[1000..];
        let n = tail.len() as f64;
        let avg = [tail.iter().map(|m| m[0]).sum::<f64>() / n, tail.iter().map(|m| m[1]).sum::<f64>() / n];
        let c = (t / 2.0).cos().abs() - 1.0;
        let want = [-c, c];
        let asym = magnetization_asymptotic(&spec);
        for s in 0..2 {
            worst = worst.max((avg[s] - want[s]).abs());
            worst_closed = worst_closed.max((asym[s] - want[s]).abs());
        }
    }
    ok &= worst < 1e-3 && worst_closed < 1e-12;
    Ok((ok, format!("time average dev {worst:.2e}, closed form dev {worst_closed:.2e}")))
}

fn c3_gapped_null() -> Check {
    let mut worst = 0.0f64;
    for &(d, t) in &[(3.0, 0.4), (2.5, 1.5), (3.0, 1e-3)] {
        let st = gapped_state(&p(d, t)?, 20, 512)?;
        worst = worst.max(magnetization_gapped(&st, &SolveOptions::default())?.staggered.abs());
    }
    Ok((worst < 1e-5, format!("max |stag| = {worst:.2e}")))
}

fn c4_root_of_unity() -> Check {
    let pr = pi3()?;
    let (inf, _) = gapless_stag(RootOfUnityPoint::new(2, 1)?, &pr, 20.0, 1024)?;
    let s6 = diagonal_ensemble_sz(&pr, 6)?.staggered;
    let s12 = diagonal_ensemble_sz(&pr, 12)?.staggered;
    let ok = inf.abs() > 1e-3 && (s12 - inf).abs() < (s6 - inf).abs();
    Ok((ok, format!("TBA {inf:.8}, ED L=6 {s6:.6}, L=12 {s12:.6}")))
}

fn c5_circuit() -> Check {
    let pr = pi3()?;
    let de = diagonal_ensemble_sz(&pr, 10)?.staggered;
    let ev = evolve_and_average(&pr, 10, 4000, (1000, 4000))?;
    let dev = (ev.tail_staggered - de).abs();
    Ok((
        dev < 5e-2 && ev.antisymmetry < 1e-12,
        format!("tail {:.6} vs DE {de:.6} (dev {dev:.2e}), antisymmetry {:.1e}", ev.tail_staggered, ev.antisymmetry),
    ))
}

fn c6_integrability() -> Check {
    let mut comm = 0.0f64;
    let mut herm = 0.0f64;
    for &(d, t) in &[(3.0, 0.4), (2.5, 2.15), (0.5, 0.7)] {
        let pr = p(d, t)?;
        for l in [6, 8] {
            let u = build_floquet(&pr, l)?;
            for b in [Branch::Plus, Branch::Minus] {
                let q = build_charge_q1(&pr, l, b)?;
                comm = comm.max(q.commutator_norm(&u));
                herm = herm.max(q.hermiticity_error());
            }
        }
    }
    let mut tt = 0.0f64;
    let mut prop = 0.0f64;
    let mut t0 = 0.0f64;
    let mut modulus = 0.0f64;
    for &(d, t) in &[(3.0, 0.4), (2.5, 2.15)] {
        let pr = p(d, t)?;
        let a = build_transfer_matrix(C64::new(0.31, 0.17), &pr, 6)?;
        let b = build_transfer_matrix(C64::new(-0.42, 0.27), &pr, 6)?;
        tt = tt.max(a.commutator_norm(&b));
        let xl = pr.lattice_shift();
        let t1 = build_transfer_matrix(xl / 2.0, &pr, 6)?;
        let t2 = build_transfer_matrix(-pr.gamma - xl / 2.0, &pr, 6)?;
        let (k, dev) = proportionality(&build_floquet(&pr, 6)?.mat, &t1.mul(&t2).mat);
        prop = prop.max(dev);
        // unit modulus once T(x/2)T(-γ-x/2) carries the same prefactor that normalizes T(0)
        let n = floquet_normalization(pr.gamma, xl, 6);
        modulus = modulus.max(((k / n).norm() - 1.0).abs());
        let z = normalized_transfer_at_zero(&pr, 4)?;
        t0 = t0.max(max_abs(&(z.mat - DMatrix::identity(16, 16))));
    }
    let ok = comm < 1e-10 && herm < 1e-10 && tt < 1e-10 && prop < 1e-10 && modulus < 1e-10 && t0 < 1e-10;
    Ok((ok, format!("[Q,U] {comm:.1e}, [T,T] {tt:.1e}, U~TT {prop:.1e} (|k|-1 {modulus:.1e}), T(0)-1 {t0:.1e}")))
}

fn c7_functional_relations() -> Check {
    let pts = [C64::new(0.31, 0.17), C64::new(-0.42, 0.27), C64::new(0.12, -0.35)];
    let mut tsys = 0.0f64;
    let mut ysys = 0.0f64;
    for &(d, t) in &[(3.0, 0.4), (2.5, 1.5)] {
        let pr = p(d, t)?;
        let q = QtmData::from_params(&pr, C64::new(0.1, 0.0));
        for &u in &pts {
            for (j, m) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
                tsys = tsys.max(q.t_system_residual(j, m, u)?);
            }
            for j in 1..5 {
                ysys = ysys.max(q.y_system_residual(j, u)?);
            }
        }
    }
    let mut gl = 0.0f64;
    for (n1, n2) in [(2, 1), (3, 1)] {
        let root = RootOfUnityPoint::new(n1, n2)?;
        let pr = p(2.5, tau_for_gamma(2.5, root.gamma(), (threshold_tau(2.5), 3.0))?)?;
        let fam = build_y_gapless(root, &pr, C64::new(0.05, 0.0))?;
        for &u in &pts {
            for (_, r) in fam.residuals(u)? {
                gl = gl.max(r);
            }
        }
    }
    let pr = p(3.0, 0.4)?;
    let cfg = BetaLimit::default();
    let mut lim = 0.0f64;
    for &l in &[0.05, 0.4, -0.9, 1.2] {
        let closed = eta_all(C64::new(l, 0.0), 2, &pr)?;
        for j in 1..=2 {
            let y = y_gapped_limit(j, l, &pr, &cfg)?;
            lim = lim.max((y - closed[j - 1]).norm() / closed[j - 1].norm().max(1.0));
        }
    }
    let ok = tsys < 1e-8 && ysys < 1e-8 && gl < 1e-7 && lim < 1e-6;
    Ok((ok, format!("T-system {tsys:.1e}, gapped Y {ysys:.1e}, gapless Y {gl:.1e}, beta->0 {lim:.1e}")))
}

fn c8_one_magnon() -> Check {
    let mut worst = 0.0f64;
    let mut count = 0;
    for &(d, t) in &[(3.0, 0.4), (2.5, 2.15), (0.5, 0.7)] {
        let pr = p(d, t)?;
        for s in one_magnon_sector(&pr, 8)? {
            for (m, ed) in [(0, s.sz_m0), (1, s.sz_m1)] {
                let fv = finite_volume_sz(&FiniteVolumeInput { roots: vec![s.root], l: 8, params: pr, parity: m })?;
                worst = worst.max((fv - ed).abs());
            }
            count += 1;
        }
    }
    Ok((worst < 1e-8 && count == 24, format!("{count} states, max dev {worst:.2e}")))
}

fn c9_sum_rules() -> Check {
    let pr = p(2.5, 1.5)?;
    let g_coarse = gapped_state(&pr, 10, 512)?.sum_rule().abs();
    let g_fine = gapped_state(&pr, 20, 512)?.sum_rule().abs();
    let root = RootOfUnityPoint::new(2, 1)?;
    let pr = pi3()?;
    let (_, l_coarse) = gapless_stag(root, &pr, 5.0, 256)?;
    let (_, l_fine) = gapless_stag(root, &pr, 10.0, 512)?;
    let (l_coarse, l_fine) = (l_coarse.abs(), l_fine.abs());
    let ok = g_fine < 2e-4 && l_fine < 1e-3 && g_fine <= 0.5 * g_coarse && l_fine <= 0.5 * l_coarse;
    Ok((ok, format!("gapped {g_coarse:.1e} -> {g_fine:.1e}, gapless {l_coarse:.1e} -> {l_fine:.1e}")))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check); 9] = [
        ("threshold", c1_threshold),
        ("free line", c2_free_line),
        ("gapped null", c3_gapped_null),
        ("root of unity", c4_root_of_unity),
        ("circuit consistency", c5_circuit),
        ("integrability identities", c6_integrability),
        ("functional relations", c7_functional_relations),
        ("finite volume", c8_one_magnon),
        ("sum rules", c9_sum_rules),
    ];
    let mut failed = 0;
    for (i, (name, f)) in checks.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, msg) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({msg}) [{:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/9 passed", 9 - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
