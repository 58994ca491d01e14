//! Bare parameters (Δ, τ) to integrability data (γ, x) and regime.

use std::f64::consts::PI;

use serde::Serialize;

use crate::{Error, Result, C64};

const BRANCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub delta: f64,
    pub tau: f64,
    pub l: Option<usize>,
}

impl ModelParams {
    pub fn new(delta: f64, tau: f64) -> Self {
        ModelParams { delta, tau, l: None }
    }

    pub fn with_length(mut self, l: usize) -> Self {
        self.l = Some(l);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() || !self.delta.is_finite() {
            return Err(Error::InvalidInput {
                context: "params",
                msg: format!("need finite delta and tau > 0, got ({}, {})", self.delta, self.tau),
            });
        }
        if let Some(l) = self.l {
            if l < 4 || l % 2 != 0 {
                return Err(Error::InvalidInput {
                    context: "params",
                    msg: format!("L must be even and >= 4, got {l}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Gapped,
    Gapless,
    /// Gaussian lines Δ = 0 or τ = 2πn/Δ; γ = π/2 there.
    FreePoint,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Gapped => "gapped",
            Regime::Gapless => "gapless",
            Regime::FreePoint => "free",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub delta: f64,
    pub tau: f64,
    pub gamma: C64,
    /// Defined only in the gapped regime.
    pub eta: Option<f64>,
    pub x: C64,
    /// x itself when gapped, Im(x) when gapless.
    pub shift: f64,
    pub regime: Regime,
    pub tau_th: f64,
}

impl DerivedParams {
    pub fn is_gapped(&self) -> bool {
        self.regime == Regime::Gapped
    }

    /// Real γ of the gapless regime (free points included).
    pub fn gamma_real(&self) -> f64 {
        self.gamma.re
    }

    /// Residuals of the two defining relations for γ and x.
    pub fn residuals(&self) -> (f64, f64) {
        let half = self.tau / 2.0;
        let r1 = (self.gamma.cos() * half.sin() - (self.delta * half).sin()).norm();
        let r2 = ((self.x / C64::i()).sinh() - self.gamma.sin() * half.tan()).norm();
        (r1, r2)
    }

    /// Spectral parameter shift entering the lattice transfer matrix. It
    /// equals −x or π + x depending on the sign of cos(Δτ/2)/cos(τ/2).
    pub fn lattice_shift(&self) -> C64 {
        let half = self.tau / 2.0;
        let c = (self.delta * half).cos() / half.cos();
        let arg = C64::new(c, 0.0) + half.tan() * self.gamma.sin();
        let v = -C64::i() * arg.ln();
        clean(v)
    }
}

impl DerivedParams {
    /// Shift seen by single Bethe eigenstates of the circuit: x on the
    /// branch where the lattice shift is −x, and −x on the π + x branch,
    /// where the two sublattices trade places.
    pub fn bethe_shift(&self) -> C64 {
        if (self.lattice_shift() + self.x).norm() < 1e-8 {
            self.x
        } else {
            -self.x
        }
    }
}

fn clean(z: C64) -> C64 {
    let re = if z.re.abs() < 1e-15 { 0.0 } else { z.re };
    let im = if z.im.abs() < 1e-15 { 0.0 } else { z.im };
    C64::new(re, im)
}

pub fn threshold_tau(delta: f64) -> f64 {
    2.0 * PI / (delta + 1.0)
}

pub fn is_free_point(delta: f64, tau: f64) -> bool {
    if delta.abs() < BRANCH_TOL {
        return true;
    }
    let n = delta * tau / (2.0 * PI);
    n.round() != 0.0 && (n - n.round()).abs() < BRANCH_TOL * n.abs().max(1.0)
}

pub fn derive_params(p: &ModelParams) -> Result<DerivedParams> {
    p.validate()?;
    let half = p.tau / 2.0;
    if half.sin().abs() < 1e-14 {
        return Err(Error::DegenerateParams(p.tau));
    }
    let r = (p.delta * half).sin() / half.sin();
    let tan = half.tan();
    let tau_th = threshold_tau(p.delta);
    let (gamma, eta, regime) = if r.abs() > 1.0 + 1e-14 {
        let eta = r.abs().acosh();
        // r < -1 is the sublattice-rotated image of |r|; keep Re γ = π there
        // so that cos γ = r still holds.
        let gamma = if r > 0.0 { C64::new(0.0, eta) } else { C64::new(PI, eta) };
        (gamma, Some(eta), Regime::Gapped)
    } else {
        let regime = if is_free_point(p.delta, p.tau) { Regime::FreePoint } else { Regime::Gapless };
        (C64::new(r.clamp(-1.0, 1.0).acos(), 0.0), None, regime)
    };
    let x = clean(C64::i() * (gamma.sin() * tan).asinh());
    let x = match regime {
        Regime::Gapped => C64::new(x.re, 0.0),
        _ => C64::new(0.0, x.im),
    };
    let shift = if regime == Regime::Gapped { x.re } else { x.im };
    Ok(DerivedParams { delta: p.delta, tau: p.tau, gamma, eta, x, shift, regime, tau_th })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RootOfUnityPoint {
    pub nu1: usize,
    pub nu2: usize,
}

impl RootOfUnityPoint {
    pub fn new(nu1: usize, nu2: usize) -> Result<Self> {
        if nu1 == 0 || nu2 == 0 {
            return Err(Error::InvalidInput {
                context: "params",
                msg: format!("root of unity needs nu1, nu2 >= 1, got ({nu1}, {nu2})"),
            });
        }
        Ok(RootOfUnityPoint { nu1, nu2 })
    }

    /// p₀ = ν₁ + 1/ν₂.
    pub fn p0(&self) -> f64 {
        self.nu1 as f64 + 1.0 / self.nu2 as f64
    }

    pub fn gamma(&self) -> f64 {
        PI / self.p0()
    }

    pub fn n_strings(&self) -> usize {
        self.nu1 + self.nu2
    }
}

pub fn detect_root_of_unity(gamma: f64, max_nu: usize, tol: f64) -> Option<RootOfUnityPoint> {
    if !(gamma > 0.0 && gamma < PI) {
        return None;
    }
    let mut best: Option<(f64, RootOfUnityPoint)> = None;
    for nu1 in 1..=max_nu {
        for nu2 in 1..=max_nu {
            let r = RootOfUnityPoint { nu1, nu2 };
            let d = (gamma - r.gamma()).abs();
            if d < tol && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, r));
            }
        }
    }
    best.map(|(_, r)| r)
}

/// γ(τ) continued across the gapped side as 0, which is where the
/// bisection needs it.
fn gamma_of_tau(delta: f64, tau: f64) -> f64 {
    let half = tau / 2.0;
    let r = (delta * half).sin() / half.sin();
    r.clamp(-1.0, 1.0).acos()
}

pub fn tau_for_gamma(delta: f64, gamma_target: f64, bracket: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let no_bracket = Error::NoBracket { target: gamma_target, lo, hi };
    if !(lo < hi) || (lo / 2.0).sin().abs() < 1e-14 || (hi / 2.0).sin().abs() < 1e-14 {
        return Err(no_bracket);
    }
    let f = |t: f64| gamma_of_tau(delta, t) - gamma_target;
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(no_bracket);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < 1e-16 * mid.abs().max(1.0) {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    if f(t).abs() > 1e-12 {
        return Err(no_bracket);
    }
    Ok(t)
}
