//! Dressing equations, late-time staggered magnetization and the
//! finite-volume Gaudin formula.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::kernels::{BlockConvolver, Grid, KernelFamily};
use crate::linsolve::{solve_dressing, SolveOptions};
use crate::params::{DerivedParams, Regime};
use crate::tba_gapless::{gapless_convolver, TbaStateGapless};
use crate::tba_gapped::{filling, gapped_convolver, TbaStateGapped};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Serialize)]
pub struct DressedFunction {
    /// Sublattice parity m ∈ {0, 1} of the driving term.
    pub parity: usize,
    pub values: Vec<Vec<f64>>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MagnetizationResult {
    /// (m0 − m1)/2.
    pub staggered: f64,
    pub uniform: f64,
    /// ⟨σᶻ⟩ on the m = 0 sublattice, the sites that start down in the Néel
    /// state (odd sites when counting from 0).
    pub m0: f64,
    /// ⟨σᶻ⟩ on the sites that start up.
    pub m1: f64,
    /// Contribution of each string to `staggered`.
    pub per_string: Vec<f64>,
}

fn parity_sign(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn dress(
    conv: &BlockConvolver,
    fam: &KernelFamily,
    theta: &[Vec<f64>],
    source: Vec<Vec<f64>>,
    parity: usize,
    opts: &SolveOptions,
    context: &'static str,
) -> Result<DressedFunction> {
    let weights: Vec<Vec<f64>> =
        theta.iter().enumerate().map(|(j, t)| t.iter().map(|v| fam.sign(j) * v).collect()).collect();
    let sol = solve_dressing(conv, &weights, &source, None, opts, context)?;
    Ok(DressedFunction { parity, values: sol.g, residual: sol.residual })
}

/// b_n^eff + Σ a_nm ∗ (1 + η_m)^{−1} b_m^eff = b_n with b_n(λ) = a_n(λ − (−1)^m x/2).
pub fn dress_gapped(state: &TbaStateGapped, parity: usize, opts: &SolveOptions) -> Result<DressedFunction> {
    let eta = state.params.eta.ok_or(Error::WrongRegime { context: "observables", msg: "need gapped state".into() })?;
    let fam = state.kernels();
    let conv = gapped_convolver(&state.grid, eta, state.n_max());
    dress_gapped_with(&conv, state, &fam, parity, 1.0, opts)
}

fn dress_gapped_with(
    conv: &BlockConvolver,
    state: &TbaStateGapped,
    fam: &KernelFamily,
    parity: usize,
    scale: f64,
    opts: &SolveOptions,
) -> Result<DressedFunction> {
    let shift = parity_sign(parity) * state.params.x.re / 2.0;
    let source = (0..state.n_max())
        .map(|n| state.grid.nodes.iter().map(|&l| scale * fam.a(n, l - shift)).collect())
        .collect();
    dress(conv, fam, &filling(&state.eta), source, parity, opts, "observables")
}

/// f_p^eff + Σ_q a_pq ∗ (ϑ_q σ_q f_q^eff) = f_p with f_p(λ) = a_p(λ − (−1)^m ix/2).
pub fn dress_gapless(state: &TbaStateGapless, parity: usize, opts: &SolveOptions) -> Result<DressedFunction> {
    let fam = state.kernels();
    let conv = gapless_convolver(&state.grid, &fam);
    dress_gapless_with(&conv, state, &fam, parity, opts)
}

fn dress_gapless_with(
    conv: &BlockConvolver,
    state: &TbaStateGapless,
    fam: &KernelFamily,
    parity: usize,
    opts: &SolveOptions,
) -> Result<DressedFunction> {
    // −(−1)^m i x/2 is the real number (−1)^m Im(x)/2.
    let shift = parity_sign(parity) * state.params.shift / 2.0;
    let source = (0..fam.count()).map(|j| state.grid.nodes.iter().map(|&l| fam.a(j, l + shift)).collect()).collect();
    dress(conv, fam, &filling(&state.eta), source, parity, opts, "observables")
}

fn site_values(
    grid: &Grid,
    fam: &KernelFamily,
    theta: &[Vec<f64>],
    d0: &DressedFunction,
    d1: &DressedFunction,
) -> Result<MagnetizationResult> {
    if d0.parity != 0 || d1.parity != 1 {
        return Err(Error::InvalidInput { context: "observables", msg: "need dressings for parities 0 and 1".into() });
    }
    let weight = |j: usize, d: &DressedFunction| {
        let f: Vec<f64> = d.values[j].iter().zip(&theta[j]).map(|(a, t)| a * t).collect();
        fam.length(j) as f64 * fam.sign(j) * grid.integrate(&f)
    };
    let mut m0 = 1.0;
    let mut m1 = 1.0;
    let mut per_string = Vec::with_capacity(fam.count());
    for j in 0..fam.count() {
        let (w0, w1) = (weight(j, d0), weight(j, d1));
        m0 -= 2.0 * w0;
        m1 -= 2.0 * w1;
        per_string.push(-(w0 - w1));
    }
    Ok(MagnetizationResult { staggered: (m0 - m1) / 2.0, uniform: (m0 + m1) / 2.0, m0, m1, per_string })
}

pub fn stag_mag_gapped(
    state: &TbaStateGapped,
    d0: &DressedFunction,
    d1: &DressedFunction,
) -> Result<MagnetizationResult> {
    site_values(&state.grid, &state.kernels(), &filling(&state.eta), d0, d1)
}

pub fn site_mag_gapless(
    state: &TbaStateGapless,
    d0: &DressedFunction,
    d1: &DressedFunction,
) -> Result<MagnetizationResult> {
    site_values(&state.grid, &state.kernels(), &filling(&state.eta), d0, d1)
}

/// Both dressings and the magnetization, sharing one convolver.
pub fn magnetization_gapped(state: &TbaStateGapped, opts: &SolveOptions) -> Result<MagnetizationResult> {
    let eta = state.params.eta.ok_or(Error::WrongRegime { context: "observables", msg: "need gapped state".into() })?;
    let fam = state.kernels();
    let conv = gapped_convolver(&state.grid, eta, state.n_max());
    let d0 = dress_gapped_with(&conv, state, &fam, 0, 1.0, opts)?;
    let d1 = dress_gapped_with(&conv, state, &fam, 1, 1.0, opts)?;
    stag_mag_gapped(state, &d0, &d1)
}

pub fn magnetization_gapless(state: &TbaStateGapless, opts: &SolveOptions) -> Result<MagnetizationResult> {
    let fam = state.kernels();
    let conv = gapless_convolver(&state.grid, &fam);
    let d0 = dress_gapless_with(&conv, state, &fam, 0, opts)?;
    let d1 = dress_gapless_with(&conv, state, &fam, 1, opts)?;
    site_mag_gapless(state, &d0, &d1)
}

/// Gapped dressing with the driving term multiplied by `scale`.
pub fn dress_gapped_scaled(
    state: &TbaStateGapped,
    parity: usize,
    scale: f64,
    opts: &SolveOptions,
) -> Result<DressedFunction> {
    let eta = state.params.eta.ok_or(Error::WrongRegime { context: "observables", msg: "need gapped state".into() })?;
    let fam = state.kernels();
    let conv = gapped_convolver(&state.grid, eta, state.n_max());
    dress_gapped_with(&conv, state, &fam, parity, scale, opts)
}

// ---------------------------------------------------------- finite volume

/// Bethe roots in the additive normalization where the one-magnon
/// quantization reads [sinh(p + ix/2 + iγ/2) sinh(p − ix/2 + iγ/2) /
/// (sinh(p + ix/2 − iγ/2) sinh(p − ix/2 − iγ/2))]^{L/2} = 1 at M = 1.
/// Roots may be complex (negative-parity roots sit on Im p = π/2).
#[derive(Debug, Clone, Serialize)]
pub struct FiniteVolumeInput {
    pub roots: Vec<C64>,
    pub l: usize,
    pub params: DerivedParams,
    /// Sublattice parity m, with the same meaning as in [`MagnetizationResult`].
    pub parity: usize,
}

/// sin 2g / (π (cosh 2z − cos 2g)).
pub fn gaudin_kernel(z: C64, g: C64) -> C64 {
    (2.0 * g).sin() / (PI * ((2.0 * z).cosh() - (2.0 * g).cos()))
}

pub fn gaudin_matrix(input: &FiniteVolumeInput) -> Result<DMatrix<C64>> {
    let m = input.roots.len();
    let g = input.params.gamma;
    let half_x = C64::i() * input.params.bethe_shift() / 2.0;
    let l = input.l as f64;
    let mut mat = DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        let pi = input.roots[i];
        let mut diag = 0.5 * l * (gaudin_kernel(pi + half_x, g / 2.0) + gaudin_kernel(pi - half_x, g / 2.0));
        for k in 0..m {
            diag -= gaudin_kernel(pi - input.roots[k], g);
        }
        for j in 0..m {
            mat[(i, j)] = gaudin_kernel(pi - input.roots[j], g);
        }
        mat[(i, i)] += diag;
    }
    if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularGaudin(f64::INFINITY));
    }
    if m > 0 {
        let sv = mat.clone().singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > 1e12 {
            return Err(Error::SingularGaudin(cond));
        }
    }
    Ok(mat)
}

/// ⟨σ^z⟩ on the sublattice of the given parity, 1 + 2 wᵀ G^{−1} v with
/// w_i = 1 and v_i = −a(p_i − (−1)^m ix/2, γ/2).
pub fn finite_volume_sz(input: &FiniteVolumeInput) -> Result<f64> {
    let m = input.roots.len();
    if m == 0 {
        return Ok(1.0);
    }
    let g = input.params.gamma;
    let s = parity_sign(input.parity) * C64::i() * input.params.bethe_shift() / 2.0;
    let gm = gaudin_matrix(input)?;
    let v = DVector::from_iterator(m, input.roots.iter().map(|&p| -gaudin_kernel(p - s, g / 2.0)));
    let sol = gm.lu().solve(&v).ok_or(Error::SingularGaudin(f64::INFINITY))?;
    Ok((1.0 + 2.0 * sol.iter().sum::<C64>()).re)
}

/// Regime tag used in reports.
pub fn regime_label(p: &DerivedParams) -> &'static str {
    match p.regime {
        Regime::Gapped => "gapped",
        Regime::Gapless => "gapless",
        Regime::FreePoint => "free",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Domain, make_grid};
    use crate::params::{derive_params, tau_for_gamma, ModelParams, RootOfUnityPoint};
    use crate::tba_gapless::solve_gapless;
    use crate::tba_gapped::{eta_recursion, solve_rho_gapped};
    use crate::ysystem::BetaLimit;

    fn pi3_state(n: usize) -> TbaStateGapless {
        let root = RootOfUnityPoint::new(2, 1).unwrap();
        let tau = tau_for_gamma(2.5, root.gamma(), (1.8, 2.5)).unwrap();
        let d = derive_params(&ModelParams::new(2.5, tau)).unwrap();
        let grid = make_grid(Domain::TruncatedLine { cutoff: 20.0 }, n).unwrap();
        solve_gapless(&d, root, &grid, &BetaLimit::default(), &SolveOptions::default()).unwrap()
    }

    #[test]
    fn gapless_pi3_value() {
        let st = pi3_state(1024);
        let m = magnetization_gapless(&st, &SolveOptions::default()).unwrap();
        assert!((m.staggered + 0.43749415362).abs() < 1e-6, "{}", m.staggered);
        assert!(m.uniform.abs() < 1e-6);
        assert!((m.uniform - st.sum_rule()).abs() < 1e-8);
    }

    #[test]
    fn gapless_parity_average_is_total_density() {
        let st = pi3_state(512);
        let opts = SolveOptions::default();
        let d0 = dress_gapless(&st, 0, &opts).unwrap();
        let d1 = dress_gapless(&st, 1, &opts).unwrap();
        let fam = st.kernels();
        for j in 0..fam.count() {
            for i in (0..st.grid.len()).step_by(37) {
                let avg = 0.5 * (d0.values[j][i] + d1.values[j][i]);
                let tot = fam.sign(j) * (st.rho[j][i] + st.rho_h[j][i]);
                assert!((avg - tot).abs() < 1e-9, "j={j} i={i}");
            }
        }
    }

    #[test]
    fn gapped_null_and_linear() {
        let d = derive_params(&ModelParams::new(3.0, 0.4)).unwrap();
        let grid = Grid::periodic_midpoint(256).unwrap();
        let fam = eta_recursion(12, &d, &grid).unwrap();
        let st = solve_rho_gapped(&fam, &d, &grid, &SolveOptions::default()).unwrap();
        let opts = SolveOptions::default();
        let m = magnetization_gapped(&st, &opts).unwrap();
        assert!(m.staggered.abs() < 1e-5, "{}", m.staggered);
        let a = dress_gapped(&st, 0, &opts).unwrap();
        let b = dress_gapped_scaled(&st, 0, 2.5, &opts).unwrap();
        for (x, y) in a.values.iter().flatten().zip(b.values.iter().flatten()) {
            assert!((2.5 * x - y).abs() < 1e-10 * y.abs().max(1.0));
        }
    }

    #[test]
    fn gaudin_single_root() {
        let d = derive_params(&ModelParams::new(2.5, 2.15)).unwrap();
        let p = C64::new(0.3, 0.0);
        let input = FiniteVolumeInput { roots: vec![p], l: 8, params: d, parity: 0 };
        let g = gaudin_matrix(&input).unwrap();
        let hx = C64::i() * d.x / 2.0;
        let want = 4.0 * (gaudin_kernel(p + hx, d.gamma / 2.0) + gaudin_kernel(p - hx, d.gamma / 2.0));
        assert!((g[(0, 0)] - want).norm() < 1e-13);
        let empty = FiniteVolumeInput { roots: vec![], ..input };
        assert_eq!(finite_volume_sz(&empty).unwrap(), 1.0);
    }

    #[test]
    fn gaudin_symmetric() {
        let d = derive_params(&ModelParams::new(2.5, 2.15)).unwrap();
        let roots = vec![C64::new(0.3, 0.0), C64::new(-0.7, 0.0), C64::new(0.1, std::f64::consts::FRAC_PI_2)];
        let g = gaudin_matrix(&FiniteVolumeInput { roots, l: 10, params: d, parity: 0 }).unwrap();
        assert!((g.clone() - g.transpose()).norm() < 1e-12);
    }
}
