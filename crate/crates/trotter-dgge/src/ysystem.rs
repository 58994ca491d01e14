//! Boundary quantum transfer matrix eigenvalue, T-system and Y-systems.
//!
//! Shifts are written f^{[k]}(u) = f(u + kγ/2). All products are
//! accumulated as complex logarithms, since the individual factors grow like
//! e^{|Im u|} and overflow long before the ratios that matter do.

use std::f64::consts::PI;

use serde::Serialize;

use crate::params::{DerivedParams, Regime, RootOfUnityPoint};
use crate::{Error, Result, C64};

const DEN_TOL: f64 = 1e-12;

fn lsin(z: C64) -> C64 {
    z.sin().ln()
}

/// ln sin z for a factor sitting in a denominator.
fn lsin_den(z: C64) -> Result<C64> {
    let s = z.sin();
    if s.norm() < DEN_TOL {
        return Err(Error::PoleProximity { context: "ysystem", at: format!("{z}") });
    }
    Ok(s.ln())
}

/// ln Σ exp(l_k), stable against overflow.
fn log_sum(terms: &[C64]) -> C64 {
    let m = terms.iter().fold(f64::NEG_INFINITY, |a, t| a.max(t.re));
    if !m.is_finite() {
        return C64::new(f64::NEG_INFINITY, 0.0);
    }
    let s: C64 = terms.iter().map(|t| (t - m).exp()).sum();
    s.ln() + m
}

fn finite(z: C64, what: &str) -> Result<C64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::PoleProximity { context: "ysystem", at: what.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QtmData {
    pub gamma: C64,
    pub x: C64,
    pub beta: C64,
    pub xi1: C64,
    pub xi2: C64,
    pub xi_plus: C64,
    pub xi_minus: C64,
}

impl QtmData {
    pub fn new(gamma: C64, x: C64, beta: C64) -> Self {
        QtmData {
            gamma,
            x,
            beta,
            xi1: beta + x / 2.0 + gamma,
            xi2: beta + x / 2.0,
            xi_plus: x / 2.0 + gamma / 2.0,
            xi_minus: x / 2.0 - gamma / 2.0,
        }
    }

    pub fn from_params(p: &DerivedParams, beta: C64) -> Self {
        QtmData::new(p.gamma, p.x, beta)
    }

    fn sh(&self, u: C64, k: f64) -> C64 {
        u + k * self.gamma / 2.0
    }

    fn lq(&self, u: C64) -> C64 {
        let b = self.beta + self.x / 2.0;
        lsin(u - b) + lsin(u + b)
    }

    fn lq_den(&self, u: C64) -> Result<C64> {
        let b = self.beta + self.x / 2.0;
        Ok(lsin_den(u - b)? + lsin_den(u + b)?)
    }

    fn lphi(&self, u: C64) -> C64 {
        let g2 = self.gamma / 2.0;
        [self.xi1, self.xi2].iter().map(|&xk| lsin(u - g2 + xk) + lsin(u + g2 - xk)).sum()
    }

    fn lw1(&self, u: C64) -> Result<C64> {
        let g = self.gamma;
        Ok(lsin(2.0 * u + g) + lsin(u + self.xi_plus - g / 2.0) + lsin(u + self.xi_minus - g / 2.0) - lsin_den(2.0 * u)?)
    }

    fn lw2(&self, u: C64) -> Result<C64> {
        let g = self.gamma;
        Ok(lsin(2.0 * u - g) + lsin(u - self.xi_plus + g / 2.0) + lsin(u - self.xi_minus + g / 2.0) - lsin_den(2.0 * u)?)
    }

    pub fn q(&self, u: C64) -> C64 {
        self.lq(u).exp()
    }

    pub fn phi(&self, u: C64) -> C64 {
        self.lphi(u).exp()
    }

    pub fn omega1(&self, u: C64) -> Result<C64> {
        Ok(self.lw1(u)?.exp())
    }

    pub fn omega2(&self, u: C64) -> Result<C64> {
        Ok(self.lw2(u)?.exp())
    }

    /// f(u) = φ(u + 3γ/2) φ(u − γ/2) ω₁(u + γ) ω₂(u).
    pub fn f(&self, u: C64) -> Result<C64> {
        let g = self.gamma;
        let l = self.lphi(u + 1.5 * g) + self.lphi(u - g / 2.0) + self.lw1(u + g)? + self.lw2(u)?;
        finite(l.exp(), "f")
    }

    pub fn lambda_beta(&self, u: C64) -> Result<C64> {
        let g = self.gamma;
        let lq = self.lq_den(u)?;
        let a = self.lw1(u)? + self.lphi(u + g / 2.0) + self.lq(u - g) - lq;
        let b = self.lw2(u)? + self.lphi(u - g / 2.0) + self.lq(u + g) - lq;
        finite(log_sum(&[a, b]).exp(), "lambda_beta")
    }

    /// ln t_j(u), the rescaled T_j with the φ prefactor removed.
    fn lt(&self, j: usize, u: C64) -> Result<C64> {
        if j == 0 {
            return Ok(self.lphi(u));
        }
        let jf = j as f64;
        let qq = self.lq(self.sh(u, jf + 1.0)) + self.lq(self.sh(u, -jf - 1.0));
        let mut terms = Vec::with_capacity(j + 1);
        for k in 1..=j + 1 {
            let kf = k as f64;
            let mut l = self.lphi(self.sh(u, 2.0 * kf - jf - 2.0));
            for m in 1..k {
                l += self.lw1(self.sh(u, 2.0 * m as f64 - jf - 1.0))?;
            }
            for m in k..=j {
                l += self.lw2(self.sh(u, 2.0 * m as f64 - jf - 1.0))?;
            }
            l += qq - self.lq_den(self.sh(u, 2.0 * kf - jf - 3.0))? - self.lq_den(self.sh(u, 2.0 * kf - jf - 1.0))?;
            terms.push(l);
        }
        Ok(log_sum(&terms))
    }

    fn lpsi(&self, j: usize, u: C64) -> Result<C64> {
        let jf = j as f64;
        let mut l = C64::new(0.0, 0.0);
        for m in 1..=j {
            let mf = m as f64;
            l += self.lw1(self.sh(u, 2.0 * mf - jf))? + self.lw2(self.sh(u, 2.0 * mf - jf - 2.0))?;
        }
        Ok(l)
    }

    pub fn t_function(&self, j: usize, u: C64) -> Result<C64> {
        finite(self.lt(j, u)?.exp(), "t_function")
    }

    /// Unscaled T_j, which satisfies the three-term recursion.
    pub fn big_t(&self, j: usize, u: C64) -> Result<C64> {
        if j == 0 {
            return Ok(C64::new(1.0, 0.0));
        }
        let jf = j as f64;
        let pre: C64 = (1..j).map(|l| self.lphi(self.sh(u, 2.0 * l as f64 - jf))).sum();
        finite((pre + self.lt(j, u)?).exp(), "big_t")
    }

    pub fn psi(&self, j: usize, u: C64) -> Result<C64> {
        finite(self.lpsi(j, u)?.exp(), "psi")
    }

    fn ly_gapped(&self, j: usize, u: C64) -> Result<C64> {
        let jf = j as f64;
        Ok(self.lt(j - 1, u)? + self.lt(j + 1, u)?
            - self.lpsi(j, u)?
            - self.lphi(self.sh(u, jf + 1.0))
            - self.lphi(self.sh(u, -jf - 1.0)))
    }

    /// Y_j = t_{j−1} t_{j+1} / (Ψ_j φ^{[j+1]} φ^{[−j−1]}), Y₀ = 0.
    pub fn y_gapped(&self, j: usize, u: C64) -> Result<C64> {
        if j == 0 {
            return Ok(C64::new(0.0, 0.0));
        }
        finite(self.ly_gapped(j, u)?.exp(), "y_gapped")
    }

    pub fn afrak_beta(&self, u: C64) -> Result<C64> {
        let g = self.gamma;
        let l = self.lw1(u)? - self.lw2(u)? + self.lphi(u + g / 2.0) - self.lphi(u - g / 2.0) + self.lq(u - g)
            - self.lq_den(u + g)?;
        finite(l.exp(), "afrak_beta")
    }

    /// 1 + Y₁ from the eigenvalue, Λ(u + γ/2) Λ(u − γ/2) / f(u − γ/2).
    pub fn one_plus_y1_from_lambda(&self, u: C64) -> Result<C64> {
        let g = self.gamma;
        Ok(self.lambda_beta(u + g / 2.0)? * self.lambda_beta(u - g / 2.0)? / self.f(u - g / 2.0)?)
    }

    /// Relative residual of t_j^{[m]} t_j^{[−m]} = t_{j+m} t_{j−m} + Ψ_{j−m+1} t_{m−1}^{[j+1]} t_{m−1}^{[−j−1]}.
    pub fn t_system_residual(&self, j: usize, m: usize, u: C64) -> Result<f64> {
        let (jf, mf) = (j as f64, m as f64);
        let lhs = (self.lt(j, self.sh(u, mf))? + self.lt(j, self.sh(u, -mf))?).exp();
        let r1 = (self.lt(j + m, u)? + self.lt(j - m, u)?).exp();
        let r2 = (self.lpsi(j - m + 1, u)? + self.lt(m - 1, self.sh(u, jf + 1.0))? + self.lt(m - 1, self.sh(u, -jf - 1.0))?).exp();
        Ok((lhs - r1 - r2).norm() / lhs.norm())
    }

    /// Relative residual of T_j = T_{j−1}(u − γ/2) T₁(u + (j−1)γ/2) − f(u + (j−3)γ/2) T_{j−2}(u − γ).
    pub fn recursion_residual(&self, j: usize, u: C64) -> Result<f64> {
        let jf = j as f64;
        let tj = self.big_t(j, u)?;
        let rec = self.big_t(j - 1, self.sh(u, -1.0))? * self.big_t(1, self.sh(u, jf - 1.0))?
            - self.f(self.sh(u, jf - 3.0))? * self.big_t(j - 2, self.sh(u, -2.0))?;
        Ok((tj - rec).norm() / tj.norm())
    }

    /// Relative residual of Y_j^{[1]} Y_j^{[−1]} = (1 + Y_{j+1})(1 + Y_{j−1}).
    pub fn y_system_residual(&self, j: usize, u: C64) -> Result<f64> {
        let lhs = self.y_gapped(j, self.sh(u, 1.0))? * self.y_gapped(j, self.sh(u, -1.0))?;
        let rhs = (1.0 + self.y_gapped(j + 1, u)?) * (1.0 + self.y_gapped(j - 1, u)?);
        Ok((lhs - rhs).norm() / lhs.norm())
    }
}

/// β → 0 limit of 𝔞_β.
pub fn afrak_limit(u: C64, gamma: C64, x: C64) -> C64 {
    (2.0 * u + gamma).sin() / (2.0 * u - gamma).sin() * (u - x / 2.0 - gamma).sin() / (u + x / 2.0 + gamma).sin()
        * (u - x / 2.0).sin()
        / (u + x / 2.0).sin()
}

/// Scalar making T(x/2)T(x/2 − γ) the identity on L sites.
pub fn floquet_normalization(gamma: C64, x: C64, l: usize) -> C64 {
    let s = gamma.sin();
    (s * s / ((gamma + x).sin() * (gamma - x).sin())).powf(l as f64 / 2.0)
}

// ---------------------------------------------------------- β → 0 limit

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaLimit {
    pub betas: [f64; 3],
    pub tol: f64,
}

impl Default for BetaLimit {
    fn default() -> Self {
        BetaLimit { betas: [1e-5, 1e-6, 1e-7], tol: 1e-7 }
    }
}

impl BetaLimit {
    /// One Richardson step on each consecutive pair, assuming a linear
    /// leading correction in β; returns the last extrapolant.
    pub fn extrapolate<F: Fn(f64) -> Result<C64>>(&self, f: F) -> Result<C64> {
        let v: Vec<C64> = self.betas.iter().map(|&b| f(b)).collect::<Result<_>>()?;
        let rich = |a: C64, b: C64, ba: f64, bb: f64| (ba * b - bb * a) / (ba - bb);
        let r1 = rich(v[0], v[1], self.betas[0], self.betas[1]);
        let r2 = rich(v[1], v[2], self.betas[1], self.betas[2]);
        let spread = (r1 - r2).norm() / r2.norm().max(1.0);
        if !(spread < self.tol) {
            return Err(Error::LimitNotConverged(spread));
        }
        Ok(r2)
    }
}

/// Evaluate with the small real nudge when u sits on a pole.
fn nudged<F: Fn(C64) -> Result<C64>>(u: C64, f: F) -> Result<C64> {
    match f(u) {
        Err(Error::PoleProximity { .. }) => f(u + 1e-9),
        r => r,
    }
}

/// lim_{β→0} Y_j(λ) in the gapped regime, which is η_j(λ).
pub fn y_gapped_limit(j: usize, lambda: f64, params: &DerivedParams, cfg: &BetaLimit) -> Result<C64> {
    if params.regime != Regime::Gapped {
        return Err(Error::WrongRegime { context: "ysystem", msg: "gapped Y-functions need gapped parameters".into() });
    }
    let u = C64::new(lambda, 0.0);
    cfg.extrapolate(|b| nudged(u, |v| QtmData::from_params(params, C64::new(b, 0.0)).y_gapped(j, v)))
}

// ------------------------------------------------------- gapless family

pub const DEFAULT_NU2_MAX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YFamilyGapless {
    pub root: RootOfUnityPoint,
    pub qtm: QtmData,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

pub fn build_y_gapless(root: RootOfUnityPoint, params: &DerivedParams, beta: C64) -> Result<YFamilyGapless> {
    build_y_gapless_with(root, params, beta, DEFAULT_NU2_MAX)
}

pub fn build_y_gapless_with(
    root: RootOfUnityPoint,
    params: &DerivedParams,
    beta: C64,
    nu2_max: usize,
) -> Result<YFamilyGapless> {
    if root.nu2 > nu2_max {
        return Err(Error::UnsupportedRoot { nu1: root.nu1, nu2: root.nu2 });
    }
    if params.regime == Regime::Gapped || (params.gamma.re - root.gamma()).abs() > 1e-9 {
        return Err(Error::WrongRegime {
            context: "ysystem",
            msg: format!("parameters (gamma = {}) are not at gamma = pi/{}", params.gamma, root.p0()),
        });
    }
    Ok(YFamilyGapless {
        root,
        qtm: QtmData::new(C64::new(root.gamma(), 0.0), params.x, beta),
        p0: root.p0(),
        p1: 1.0,
        p2: 1.0 / root.nu2 as f64,
    })
}

impl YFamilyGapless {
    pub fn with_beta(&self, beta: C64) -> Self {
        let mut out = *self;
        out.qtm = QtmData::new(self.qtm.gamma, self.qtm.x, beta);
        out
    }

    fn big_p(&self) -> f64 {
        (1 + self.root.nu1 * self.root.nu2) as f64
    }

    fn sh(&self, u: C64, k: f64) -> C64 {
        self.qtm.sh(u, k)
    }

    /// Shift weight of Y_j for j ≥ ν₁: 1 when j − ν₁ is even, 0 otherwise.
    pub fn w(&self, j: usize) -> f64 {
        if (j - self.root.nu1) % 2 == 0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn y(&self, j: usize, u: C64) -> Result<C64> {
        let n1 = self.root.nu1;
        if j == 0 {
            return Ok(C64::new(0.0, 0.0));
        }
        if j < n1 {
            return self.qtm.y_gapped(j, u);
        }
        let q = &self.qtm;
        let v = self.sh(u, self.w(j) * self.p0);
        let a = n1 * (j + 2 - n1);
        let b = n1 * (j - n1);
        let c = n1 * (j - n1) + 1;
        let e = (n1 * (j + 1 - n1) + 1) as f64;
        let l = q.lt(a, v)? + q.lt(b, v)? - q.lpsi(c, v)? - q.lt(n1 - 1, self.sh(v, e))? - q.lt(n1 - 1, self.sh(v, -e))?;
        finite(l.exp(), "gapless Y")
    }

    pub fn omega(&self, u: C64) -> Result<C64> {
        let (p, g) = (self.big_p(), self.qtm.gamma);
        let h = C64::new(PI / 2.0, 0.0);
        let l = lsin(p * (u + g / 2.0)) + lsin(p * (u + g / 2.0 + h)) - lsin_den(p * u)? - lsin_den(p * (u + h))?;
        finite(l.exp(), "Omega")
    }

    fn scale(&self) -> f64 {
        2f64.powi(-((self.root.nu1 * self.root.nu2) as i32))
    }

    pub fn omega1(&self, u: C64) -> C64 {
        self.scale() * (self.big_p() * (u + self.qtm.x / 2.0)).sin()
    }

    pub fn omega2(&self, u: C64) -> C64 {
        self.scale() * (self.big_p() * (u - self.qtm.x / 2.0)).sin()
    }

    pub fn k(&self, u: C64) -> Result<C64> {
        let (n1, n2) = (self.root.nu1, self.root.nu2);
        let q = &self.qtm;
        let s = (n2 as f64 - 2.0) * self.p0;
        let nn = (n1 * n2) as f64;
        let at = |k: f64| self.sh(u, k);
        let num = q.lt(n1 * (n2 - 1), at(s))? - q.lt(n1 - 1, at(1.0 + nn + s))? + q.lpsi(n1, at(-(1.0 + nn) + s))?;
        let v = at(1.0 + s);
        let den = self.omega(v)? * self.omega1(v) * self.omega2(v);
        if den.norm() < DEN_TOL {
            return Err(Error::PoleProximity { context: "ysystem", at: format!("K({u})") });
        }
        finite(num.exp() / den, "K")
    }

    pub fn bfrak(&self, u: C64) -> Result<C64> {
        let p = self.big_p();
        let n = (self.root.nu1 * self.root.nu2) as f64;
        let x = self.qtm.x;
        let sign = if self.root.nu2 % 2 == 0 { 1.0 } else { -1.0 };
        let den = (p * (u - x / 2.0) + n * PI / 2.0).sin();
        if den.norm() < DEN_TOL {
            return Err(Error::PoleProximity { context: "ysystem", at: format!("b({u})") });
        }
        Ok(sign * (p * (u + x / 2.0) + n * PI / 2.0).sin() / den)
    }

    /// Relative residuals of every truncated Y-system relation at u.
    pub fn residuals(&self, u: C64) -> Result<Vec<(String, f64)>> {
        let (n1, n2) = (self.root.nu1, self.root.nu2);
        let nb = n1 + n2;
        let (p1, p2) = (self.p1, self.p2);
        let y = |j: usize, k: f64| self.y(j, self.sh(u, k));
        let rel = |l: C64, r: C64| (l - r).norm() / l.norm();
        let mut out = Vec::new();
        for j in 1..n1.saturating_sub(1) {
            let l = y(j, p1)? * y(j, -p1)?;
            let r = (1.0 + y(j + 1, 0.0)?) * (1.0 + y(j - 1, 0.0)?);
            out.push((format!("Y{j}"), rel(l, r)));
        }
        if n1 >= 2 {
            let j = n1 - 1;
            let l = y(j, p1 + p2)? * y(j, -p1 - p2)? * y(j, p1 - p2)? * y(j, -p1 + p2)?;
            let r = (1.0 + y(n1 - 2, p2)?) * (1.0 + y(n1 - 2, -p2)?)
                * (1.0 + y(n1, p1)?)
                * (1.0 + y(n1, -p1)?)
                * (1.0 + y(n1 - 1, p1 - p2)?)
                * (1.0 + y(n1 - 1, -p1 + p2)?);
            out.push((format!("Y{j}"), rel(l, r)));
        }
        for j in n1..nb - 1 {
            let l = y(j, p2)? * y(j, -p2)?;
            let lower = 1.0 + y(j - 1, 0.0)?;
            let lower = if j == n1 { 1.0 / lower } else { lower };
            let r = (1.0 + y(j + 1, 0.0)?) * lower;
            out.push((format!("Y{j}"), rel(l, r)));
        }
        let k = self.k(u)?;
        let b = self.bfrak(u)?;
        out.push(("last".into(), rel(1.0 + y(nb - 1, 0.0)?, 1.0 + (b + 1.0 / b) * k + k * k)));
        let kk = self.k(self.sh(u, p2))? * self.k(self.sh(u, -p2))?;
        let base = 1.0 + y(nb - 2, 0.0)?;
        let rhs = if n2 == 1 { 1.0 / base } else { base };
        out.push(("K".into(), rel(kk, rhs)));
        Ok(out)
    }
}

/// η_j(λ) for j = 1..ν₁+ν₂ on the given nodes; rows are strings.
#[derive(Debug, Clone, Serialize)]
pub struct GaplessEtas {
    pub root: RootOfUnityPoint,
    pub nodes: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// All η_j at one rapidity, each through the β → 0 procedure.
pub fn eta_gapless_at(fam: &YFamilyGapless, lambda: f64, cfg: &BetaLimit) -> Result<Vec<C64>> {
    let nb = fam.root.n_strings();
    let u = C64::new(0.0, lambda);
    let mut out = Vec::with_capacity(nb);
    for j in 1..nb.saturating_sub(1) {
        out.push(cfg.extrapolate(|b| nudged(u, |v| fam.with_beta(C64::new(b, 0.0)).y(j, v)))?);
    }
    let bk = |b: f64, inv: bool| {
        nudged(u, |v| {
            let f = fam.with_beta(C64::new(b, 0.0));
            let k = f.k(v)?;
            let bb = f.bfrak(v)?;
            Ok(if inv { bb / k } else { bb * k })
        })
    };
    out.push(cfg.extrapolate(|b| bk(b, false))?);
    out.push(cfg.extrapolate(|b| bk(b, true))?);
    Ok(out)
}

pub fn eta_gapless(fam: &YFamilyGapless, nodes: &[f64], cfg: &BetaLimit) -> Result<GaplessEtas> {
    let nb = fam.root.n_strings();
    let mut values = vec![vec![0.0; nodes.len()]; nb];
    for (i, &l) in nodes.iter().enumerate() {
        let e = eta_gapless_at(fam, l, cfg)?;
        for (j, v) in e.iter().enumerate() {
            if v.im.abs() > 1e-7 * v.norm().max(1.0) {
                return Err(Error::ComplexResidue { context: "ysystem", value: v.im });
            }
            values[j][i] = v.re;
        }
    }
    Ok(GaplessEtas { root: fam.root, nodes: nodes.to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<C64> {
        vec![C64::new(0.31, 0.17), C64::new(-0.42, 0.27), C64::new(0.12, -0.35)]
    }

    #[test]
    fn t1_is_lambda_and_recursion_holds() {
        for (g, x) in [(C64::new(0.0, 1.7), C64::new(0.57, 0.0)), (C64::new(PI / 3.0, 0.0), C64::new(0.0, 1.25))] {
            let q = QtmData::new(g, x, C64::new(0.1, 0.0));
            for u in pts() {
                let t1 = q.big_t(1, u).unwrap();
                assert!((t1 - q.lambda_beta(u).unwrap()).norm() < 1e-10 * t1.norm());
                for j in 2..=6 {
                    assert!(q.recursion_residual(j, u).unwrap() < 1e-9);
                }
                for (j, m) in [(2, 1), (3, 1), (3, 2)] {
                    assert!(q.t_system_residual(j, m, u).unwrap() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn y1_two_ways() {
        let q = QtmData::new(C64::new(0.0, 1.3), C64::new(0.4, 0.0), C64::new(0.1, 0.0));
        let g = q.gamma;
        for u in pts() {
            let y1 = q.y_gapped(1, u).unwrap();
            let a = q.one_plus_y1_from_lambda(u).unwrap() - 1.0;
            let b = (1.0 + q.afrak_beta(u - g / 2.0).unwrap()) * (1.0 + 1.0 / q.afrak_beta(u + g / 2.0).unwrap()) - 1.0;
            assert!((a - y1).norm() < 1e-9 * y1.norm().max(1.0));
            assert!((b - y1).norm() < 1e-9 * y1.norm().max(1.0));
        }
    }

    #[test]
    fn gapped_y_system() {
        let q = QtmData::new(C64::new(0.0, 1.3), C64::new(0.4, 0.0), C64::new(0.1, 0.0));
        for u in pts() {
            for j in 1..5 {
                assert!(q.y_system_residual(j, u).unwrap() < 1e-8);
            }
        }
    }

    fn gapless_params(root: RootOfUnityPoint) -> DerivedParams {
        use crate::params::{derive_params, tau_for_gamma, threshold_tau, ModelParams};
        let t = tau_for_gamma(2.5, root.gamma(), (threshold_tau(2.5), 3.0)).unwrap();
        derive_params(&ModelParams::new(2.5, t)).unwrap()
    }

    #[test]
    fn truncated_y_system() {
        for (n1, n2) in [(2, 1), (3, 1), (4, 1), (2, 2)] {
            let root = RootOfUnityPoint::new(n1, n2).unwrap();
            let p = gapless_params(root);
            let fam = build_y_gapless(root, &p, C64::new(0.05, 0.0)).unwrap();
            for u in pts() {
                for (name, r) in fam.residuals(u).unwrap() {
                    assert!(r < 1e-7, "({n1},{n2}) {name}: {r:e}");
                }
            }
        }
    }

    #[test]
    fn gapped_limit_matches_closed_form() {
        use crate::params::{derive_params, ModelParams};
        use crate::tba_gapped::eta_all;
        let p = derive_params(&ModelParams::new(3.0, 0.4)).unwrap();
        let cfg = BetaLimit::default();
        for &l in &[0.05, 0.4, -0.9, 1.2] {
            let closed = eta_all(C64::new(l, 0.0), 3, &p).unwrap();
            for j in 1..=3 {
                let y = y_gapped_limit(j, l, &p, &cfg).unwrap();
                assert!((y - closed[j - 1]).norm() < 1e-6 * closed[j - 1].norm().max(1.0), "j={j} {y} {}", closed[j - 1]);
            }
        }
    }

    #[test]
    fn gapless_etas_real_and_positive() {
        let root = RootOfUnityPoint::new(2, 1).unwrap();
        let p = gapless_params(root);
        let fam = build_y_gapless(root, &p, C64::new(1e-6, 0.0)).unwrap();
        let nodes: Vec<f64> = (0..21).map(|i| -10.0 + i as f64 + 0.013).collect();
        let e = eta_gapless(&fam, &nodes, &BetaLimit::default()).unwrap();
        assert!(e.values.iter().flatten().all(|&v| v > 0.0));
        for i in 0..nodes.len() {
            let b = fam.bfrak(C64::new(0.0, nodes[i])).unwrap();
            let prod = e.values[1][i] * e.values[2][i];
            assert!((prod - (b * b).re).abs() < 1e-7 * prod.abs().max(1.0));
        }
    }
}
