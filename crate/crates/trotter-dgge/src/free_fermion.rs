//! Gaussian lines τ = 2πn/Δ and Δ = 0, where the circuit maps to free
//! fermions.
//!
//! On these lines the bond phase e^{iτΔ/2} is ±1 and only contributes a
//! global sign inside each magnon sector, so the dynamics is that of the
//! XX circuit. Down spins are the particles. A cell holds sites (2n, 2n+1)
//! and the single-particle Floquet matrix at cell momentum q is
//! W(q) = W_e W_o with W_e = [[c, −is], [−is, c]] and
//! W_o = [[c, −is e^{−iq}], [−is e^{iq}, c]], c = cos τ/2, s = sin τ/2.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::Serialize;

use crate::params::is_free_point;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreePointSpec {
    pub delta: f64,
    pub tau: f64,
    /// τ = 2πn/Δ; None on the Δ = 0 line.
    pub n: Option<i64>,
    /// i·arcsinh(tan τ/2).
    pub x: C64,
}

impl FreePointSpec {
    pub fn new(delta: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() || !is_free_point(delta, tau) {
            return Err(Error::InvalidFreePoint { delta, tau });
        }
        let n = if delta.abs() < 1e-12 { None } else { Some((delta * tau / (2.0 * PI)).round() as i64) };
        let x = C64::new(0.0, (tau / 2.0).tan().asinh());
        Ok(FreePointSpec { delta, tau, n, x })
    }

    /// sinh(ix) = −tan(τ/2).
    pub fn sinh_ix(&self) -> f64 {
        (C64::i() * self.x).sinh().re
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeModeData {
    pub k: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub phi: Vec<f64>,
    /// Néel occupations of b_k and b_{k−π}.
    pub n_k: Vec<f64>,
    pub n_k_minus_pi: Vec<f64>,
}

/// cos²(τ/2) − cos(2k) sin²(τ/2), sin²(τ/2) sin 2k, cos k sin τ.
pub fn abd(tau: f64, k: f64) -> (f64, f64, f64) {
    let (c, s) = ((tau / 2.0).cos(), (tau / 2.0).sin());
    (c * c - (2.0 * k).cos() * s * s, s * s * (2.0 * k).sin(), k.cos() * tau.sin())
}

/// Quasi-energy on the principal branch, in [0, π].
pub fn epsilon(tau: f64, k: f64) -> f64 {
    let (a, b, d) = abd(tau, k);
    (b * b + d * d).sqrt().atan2(a)
}

pub fn bogoliubov_angle(tau: f64, k: f64) -> f64 {
    (k.sin() * (tau / 2.0).tan()).atan()
}

/// Modes on k ∈ (2π/L)ℤ ∩ (0, π].
pub fn free_modes(spec: &FreePointSpec, l: usize) -> Result<FreeModeData> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::InvalidSize(l));
    }
    let k: Vec<f64> = (1..=l / 2).map(|m| 2.0 * PI * m as f64 / l as f64).collect();
    free_modes_on(spec, &k)
}

pub fn free_modes_on(spec: &FreePointSpec, k: &[f64]) -> Result<FreeModeData> {
    let epsilon: Vec<f64> = k.iter().map(|&k| epsilon(spec.tau, k)).collect();
    let phi: Vec<f64> = k.iter().map(|&k| bogoliubov_angle(spec.tau, k)).collect();
    let n_k = phi.iter().map(|p| 0.5 + 0.5 * p.sin()).collect();
    let n_k_minus_pi = phi.iter().map(|p| 0.5 - 0.5 * p.sin()).collect();
    Ok(FreeModeData { k: k.to_vec(), epsilon, phi, n_k, n_k_minus_pi })
}

/// Cell momenta. The wrap bond picks up the Jordan–Wigner sign
/// −(−1)^{L/2}, so the boundary is antiperiodic when L/2 is even.
pub fn cell_momenta(l: usize) -> Vec<f64> {
    let cells = l / 2;
    let twist = if cells % 2 == 0 { 0.5 } else { 0.0 };
    (0..cells).map(|m| 2.0 * PI * (m as f64 + twist) / cells as f64).collect()
}

pub fn floquet_cell(tau: f64, q: f64) -> Matrix2<C64> {
    let (c, s) = ((tau / 2.0).cos(), (tau / 2.0).sin());
    let c = C64::new(c, 0.0);
    let mis = C64::new(0.0, -s);
    let we = Matrix2::new(c, mis, mis, c);
    let wo = Matrix2::new(c, mis * C64::from_polar(1.0, -q), mis * C64::from_polar(1.0, q), c);
    we * wo
}

fn mat_pow(m: &Matrix2<C64>, mut t: u64) -> Matrix2<C64> {
    let mut out = Matrix2::identity();
    let mut base = *m;
    while t > 0 {
        if t & 1 == 1 {
            out *= base;
        }
        base = base * base;
        t >>= 1;
    }
    out
}

fn site_values(odd_density: f64) -> [f64; 2] {
    // odd sites start full, even sites empty
    [1.0 - 2.0 * (1.0 - odd_density), 1.0 - 2.0 * odd_density]
}

/// ⟨σᶻ_j(t)⟩ for every site after t steps from the Néel state.
pub fn magnetization_time(spec: &FreePointSpec, l: usize, t: u64) -> Result<Vec<f64>> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::InvalidSize(l));
    }
    let qs = cell_momenta(l);
    let dens: f64 = qs
        .iter()
        .map(|&q| {
            let w = mat_pow(&floquet_cell(spec.tau, q), t);
            w[(1, 1)].norm_sqr()
        })
        .sum::<f64>()
        / qs.len() as f64;
    let [e, o] = site_values(dens);
    Ok((0..l).map(|j| if j % 2 == 0 { e } else { o }).collect())
}

/// (even-site, odd-site) values for t = 0..=t_max.
pub fn magnetization_series(spec: &FreePointSpec, l: usize, t_max: u64) -> Result<Vec<[f64; 2]>> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::InvalidSize(l));
    }
    let qs = cell_momenta(l);
    let ws: Vec<Matrix2<C64>> = qs.iter().map(|&q| floquet_cell(spec.tau, q)).collect();
    let mut psi: Vec<[C64; 2]> = vec![[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]; qs.len()];
    let mut out = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max {
        if t > 0 {
            for (p, w) in psi.iter_mut().zip(&ws) {
                *p = [w[(0, 0)] * p[0] + w[(0, 1)] * p[1], w[(1, 0)] * p[0] + w[(1, 1)] * p[1]];
            }
        }
        let dens = psi.iter().map(|p| p[1].norm_sqr()).sum::<f64>() / qs.len() as f64;
        out.push(site_values(dens));
    }
    Ok(out)
}

/// Long-time value (−1)^{j+1}(|cos τ/2| − 1) for 0-based j, as
/// (even site, odd site).
pub fn magnetization_asymptotic(spec: &FreePointSpec) -> [f64; 2] {
    let m = (spec.tau / 2.0).cos().abs() - 1.0;
    [-m, m]
}

/// The same limit from the mode integral
/// (1/π)∫₀^π sin²k S² / (1 + sin²k S²) dk with S = sinh(ix).
pub fn magnetization_asymptotic_integral(spec: &FreePointSpec, points: usize) -> f64 {
    let s2 = spec.sinh_ix().powi(2);
    let h = PI / points as f64;
    (0..points)
        .map(|i| {
            let k = (i as f64 + 0.5) * h;
            let v = k.sin().powi(2) * s2;
            v / (1.0 + v)
        })
        .sum::<f64>()
        * h
        / PI
}

/// sin k · S / sqrt(1 + sin²k S²).
fn s_of_k(spec: &FreePointSpec, k: f64) -> f64 {
    let sh = spec.sinh_ix();
    k.sin() * sh / (1.0 + (k.sin() * sh).powi(2)).sqrt()
}

/// Néel root density (1/2π)(1/2 + sin φ_k /2).
pub fn neel_density(spec: &FreePointSpec, k: f64) -> f64 {
    (0.5 + 0.5 * bogoliubov_angle(spec.tau, k).sin()) / (2.0 * PI)
}

/// Velocity ε̃'_k of the branch ε̃_k = −sgn(cos k) ε_k, from
/// cos ε_k = a(k).
pub fn group_velocity(spec: &FreePointSpec, k: f64) -> f64 {
    let s2 = (spec.tau / 2.0).sin().powi(2);
    let da = 2.0 * s2 * (2.0 * k).sin();
    let eps = epsilon(spec.tau, k);
    -k.cos().signum() * (-da / eps.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentResult {
    /// ∫ −4 s(k) ρ(k) dk from the expectation value of the current.
    pub microscopic: f64,
    /// ∫ 2 ε̃'_k ρ(k) dk.
    pub ghd: f64,
}

/// Late-time magnetization current for a root density ρ on (−π, π].
/// Midpoint rule with `points` nodes.
pub fn current_asymptotic<F: Fn(f64) -> f64>(spec: &FreePointSpec, rho: F, points: usize) -> CurrentResult {
    let h = 2.0 * PI / points as f64;
    let (mut mic, mut ghd) = (0.0, 0.0);
    for i in 0..points {
        let k = -PI + (i as f64 + 0.5) * h;
        let r = rho(k);
        mic += -4.0 * s_of_k(spec, k) * r;
        ghd += 2.0 * group_velocity(spec, k) * r;
    }
    CurrentResult { microscopic: mic * h, ghd: ghd * h }
}

pub fn current_asymptotic_neel(spec: &FreePointSpec) -> CurrentResult {
    current_asymptotic(spec, |k| neel_density(spec, k), 10_000)
}

/// ⟨Ĵ⟩ on the cell (0, 1) after t steps, from the one-body density matrix:
/// Ĵ = (S/(1+S²)) [4 Im⟨d†₁d₀⟩ + S(σᶻ₀ − σᶻ₁)], S = sinh(ix).
pub fn current_series(spec: &FreePointSpec, l: usize, t_max: u64) -> Result<Vec<f64>> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::InvalidSize(l));
    }
    let sh = spec.sinh_ix();
    let pref = sh / (1.0 + sh * sh);
    let qs = cell_momenta(l);
    let ws: Vec<Matrix2<C64>> = qs.iter().map(|&q| floquet_cell(spec.tau, q)).collect();
    let mut psi: Vec<[C64; 2]> = vec![[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]; qs.len()];
    let mut out = Vec::with_capacity(t_max as usize + 1);
    let cells = qs.len() as f64;
    for t in 0..=t_max {
        if t > 0 {
            for (p, w) in psi.iter_mut().zip(&ws) {
                *p = [w[(0, 0)] * p[0] + w[(0, 1)] * p[1], w[(1, 0)] * p[0] + w[(1, 1)] * p[1]];
            }
        }
        let g: C64 = psi.iter().map(|p| p[1].conj() * p[0]).sum::<C64>() / cells;
        let dens = psi.iter().map(|p| p[1].norm_sqr()).sum::<f64>() / cells;
        let [e, o] = site_values(dens);
        out.push(pref * (4.0 * g.im + sh * (e - o)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_membership() {
        assert!(FreePointSpec::new(2.0, PI).is_ok());
        assert!(FreePointSpec::new(0.0, 0.7).unwrap().n.is_none());
        assert!(matches!(FreePointSpec::new(2.5, 2.15), Err(Error::InvalidFreePoint { .. })));
    }

    #[test]
    fn k_zero_mode() {
        for &tau in &[0.3, 1.2, 2.9] {
            assert!((epsilon(tau, 0.0) - tau).abs() < 1e-14);
            assert_eq!(bogoliubov_angle(tau, 0.0), 0.0);
        }
    }

    #[test]
    fn cell_matrix_spectrum_is_dispersion() {
        for &tau in &[0.4, 1.7, PI] {
            for i in 1..20 {
                let k = i as f64 * 0.15;
                let w = floquet_cell(tau, 2.0 * k);
                let half_trace = (w[(0, 0)] + w[(1, 1)]) / 2.0;
                assert!((half_trace.re - epsilon(tau, k).cos()).abs() < 1e-13);
                assert!(half_trace.im.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn occupations_complementary() {
        let spec = FreePointSpec::new(4.0, PI / 2.0).unwrap();
        let m = free_modes(&spec, 40).unwrap();
        for (a, b) in m.n_k.iter().zip(&m.n_k_minus_pi) {
            assert!((a + b - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn asymptotic_closed_form() {
        let s = FreePointSpec::new(2.0, PI).unwrap();
        assert!((magnetization_asymptotic(&s)[0] - 1.0).abs() < 1e-12);
        let s = FreePointSpec::new(4.0, PI / 2.0).unwrap();
        assert!((magnetization_asymptotic(&s)[0] - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert!((magnetization_asymptotic_integral(&s, 10_000) - magnetization_asymptotic(&s)[0]).abs() < 1e-8);
    }

    #[test]
    fn current_forms_agree() {
        let spec = FreePointSpec::new(0.0, 0.9).unwrap();
        let j = current_asymptotic_neel(&spec);
        assert!((j.microscopic - j.ghd).abs() < 1e-10);
        let flat = current_asymptotic(&spec, |_| 0.1, 10_000);
        assert!(flat.ghd.abs() < 1e-12 && flat.microscopic.abs() < 1e-12);
    }
}
