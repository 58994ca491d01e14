//! Rapidity grids, string data and scattering kernels for both regimes,
//! plus the convolution engine used by every integral equation.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::params::RootOfUnityPoint;
use crate::{Error, Result, C64};

pub const DEFAULT_PERIODIC_N: usize = 512;
pub const DEFAULT_LINE_N: usize = 1024;
pub const DEFAULT_CUTOFF: f64 = 20.0;

const POLE_TOL: f64 = 1e-14;
/// Below this |sin(γn)| the string kernel is identically zero.
const NULL_KERNEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Domain {
    /// [−π/2, π/2) with periodic wrap.
    PeriodicBrillouin,
    /// [−Λ, Λ].
    TruncatedLine { cutoff: f64 },
}

impl Domain {
    pub fn length(&self) -> f64 {
        match self {
            Domain::PeriodicBrillouin => PI,
            Domain::TruncatedLine { cutoff } => 2.0 * cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub domain: Domain,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn check_size(n: usize) -> Result<()> {
    if n < 8 {
        return Err(Error::InvalidSize(n));
    }
    Ok(())
}

/// Uniform grid with nodes at the left edge of each cell on the periodic
/// domain and at cell midpoints on the line.
pub fn make_grid(domain: Domain, n: usize) -> Result<Grid> {
    check_size(n)?;
    match domain {
        Domain::PeriodicBrillouin => {
            let h = PI / n as f64;
            let nodes = (0..n).map(|k| -PI / 2.0 + k as f64 * h).collect();
            Ok(Grid { domain, nodes, weights: vec![h; n] })
        }
        Domain::TruncatedLine { cutoff } => Grid::line(cutoff, n),
    }
}

impl Grid {
    /// Periodic grid shifted by half a spacing, so that λ = 0 is never a node.
    pub fn periodic_midpoint(n: usize) -> Result<Grid> {
        check_size(n)?;
        let h = PI / n as f64;
        let nodes = (0..n).map(|k| -PI / 2.0 + (k as f64 + 0.5) * h).collect();
        Ok(Grid { domain: Domain::PeriodicBrillouin, nodes, weights: vec![h; n] })
    }

    pub fn line(cutoff: f64, n: usize) -> Result<Grid> {
        check_size(n)?;
        if !(cutoff > 0.0) {
            return Err(Error::InvalidInput { context: "kernels", msg: format!("cutoff {cutoff}") });
        }
        let h = 2.0 * cutoff / n as f64;
        let nodes = (0..n).map(|k| -cutoff + (k as f64 + 0.5) * h).collect();
        Ok(Grid { domain: Domain::TruncatedLine { cutoff }, nodes, weights: vec![h; n] })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.weights[0]
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.domain, Domain::PeriodicBrillouin)
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::GridMismatch { expected: self.len(), got: f.len() });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- gapped

pub fn a_n_gapped(n: usize, lambda: C64, eta: f64) -> Result<C64> {
    let ne = n as f64 * eta;
    let den = C64::new(ne.cosh(), 0.0) - (2.0 * lambda).cos();
    if den.norm() < POLE_TOL {
        return Err(Error::PoleProximity { context: "kernels", at: format!("a_{n}({lambda})") });
    }
    Ok(ne.sinh() / (PI * den))
}

/// Real-axis version for hot loops; callers keep η > 0.
#[inline]
pub fn a_n_gapped_re(n: usize, lambda: f64, eta: f64) -> f64 {
    let ne = n as f64 * eta;
    ne.sinh() / (PI * (ne.cosh() - (2.0 * lambda).cos()))
}

/// Indices k and multiplicities of the a_k making up a_{nm}.
fn pair_terms(n: usize, m: usize) -> Vec<(usize, f64)> {
    let d = n.abs_diff(m);
    let mut out = Vec::new();
    if d != 0 {
        out.push((d, 1.0));
    }
    let mut k = d + 2;
    while k < n + m {
        out.push((k, 2.0));
        k += 2;
    }
    out.push((n + m, 1.0));
    out
}

pub fn a_nm_gapped(n: usize, m: usize, lambda: C64, eta: f64) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for (k, c) in pair_terms(n, m) {
        acc += c * a_n_gapped(k, lambda, eta)?;
    }
    Ok(acc)
}

pub fn a_nm_gapped_re(n: usize, m: usize, lambda: f64, eta: f64) -> f64 {
    pair_terms(n, m).into_iter().map(|(k, c)| c * a_n_gapped_re(k, lambda, eta)).sum()
}

// --------------------------------------------------------------- strings

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StringEntry {
    pub length: usize,
    pub parity: i32,
    pub q: f64,
    pub sign: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StringTable {
    pub root: RootOfUnityPoint,
    pub entries: Vec<StringEntry>,
    /// p₀, p₁, p₂.
    pub p: [f64; 3],
    /// m₀, m₁, m₂.
    pub m: [usize; 3],
}

impl StringTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// String content at γ = π/(ν₁ + 1/ν₂). Parities follow the
/// Takahashi-Suzuki rule υ_j = (−1)^⌊(n_j − 1)/p₀⌋, with the (1, −)
/// string at position ν₁.
pub fn build_string_table(root: RootOfUnityPoint) -> StringTable {
    let (nu1, nu2) = (root.nu1, root.nu2);
    let nb = nu1 + nu2;
    let p0 = root.p0();
    let p = [p0, 1.0, 1.0 / nu2 as f64];
    let m = [0, nu1, nb];
    let entries = (1..=nb)
        .map(|j| {
            let length = if j < nu1 {
                j
            } else if j == nu1 {
                1
            } else if j < nb {
                1 + (j - nu1) * nu1
            } else {
                nu1
            };
            let parity = if j == nu1 {
                -1
            } else if ((length as f64 - 1.0) / p0 + 1e-12).floor() as i64 % 2 == 0 {
                1
            } else {
                -1
            };
            let i = if j < m[1] { 0 } else if j < m[2] { 1 } else { 2 };
            let next = if i < 2 { p[i + 1] } else { 0.0 };
            let q = (-1f64).powi(i as i32) * (p[i] - (j - m[i]) as f64 * next);
            StringEntry { length, parity, q, sign: if q > 0.0 { 1 } else { -1 } }
        })
        .collect();
    StringTable { root, entries, p, m }
}

// -------------------------------------------------------------- gapless

/// a_n^υ(λ) = (υ/π) sin(γn)/(cosh 2λ − υ cos γn).
pub fn a_string(n: usize, parity: i32, lambda: C64, gamma: f64) -> Result<C64> {
    let th = gamma * n as f64;
    if th.sin().abs() < NULL_KERNEL_TOL {
        return Ok(C64::new(0.0, 0.0));
    }
    let v = parity as f64;
    let den = (2.0 * lambda).cosh() - v * th.cos();
    if den.norm() < POLE_TOL {
        return Err(Error::PoleProximity { context: "kernels", at: format!("a_{n}^{parity}({lambda})") });
    }
    Ok(v * th.sin() / (PI * den))
}

#[inline]
pub fn a_string_re(n: usize, parity: i32, lambda: f64, gamma: f64) -> f64 {
    let th = gamma * n as f64;
    if th.sin().abs() < NULL_KERNEL_TOL {
        return 0.0;
    }
    let v = parity as f64;
    v * th.sin() / (PI * ((2.0 * lambda).cosh() - v * th.cos()))
}

pub fn a_j_gapless(j: usize, lambda: C64, table: &StringTable, gamma: f64) -> Result<C64> {
    let e = &table.entries[j];
    a_string(e.length, e.parity, lambda, gamma)
}

pub fn a_jk_gapless(j: usize, k: usize, lambda: C64, table: &StringTable, gamma: f64) -> Result<C64> {
    let (ej, ek) = (&table.entries[j], &table.entries[k]);
    let v = ej.parity * ek.parity;
    let mut acc = C64::new(0.0, 0.0);
    for (n, c) in pair_terms(ej.length, ek.length) {
        acc += c * a_string(n, v, lambda, gamma)?;
    }
    Ok(acc)
}

pub fn a_jk_gapless_re(j: usize, k: usize, lambda: f64, table: &StringTable, gamma: f64) -> f64 {
    let (ej, ek) = (&table.entries[j], &table.entries[k]);
    let v = ej.parity * ek.parity;
    pair_terms(ej.length, ek.length).into_iter().map(|(n, c)| c * a_string_re(n, v, lambda, gamma)).sum()
}

/// Kernel set of one regime, indexed by string number starting at 0.
#[derive(Debug, Clone)]
pub enum KernelFamily {
    Gapped { eta: f64, n_max: usize },
    Gapless { gamma: f64, table: StringTable },
}

impl KernelFamily {
    pub fn count(&self) -> usize {
        match self {
            KernelFamily::Gapped { n_max, .. } => *n_max,
            KernelFamily::Gapless { table, .. } => table.len(),
        }
    }

    /// Number of magnons carried by string j.
    pub fn length(&self, j: usize) -> usize {
        match self {
            KernelFamily::Gapped { .. } => j + 1,
            KernelFamily::Gapless { table, .. } => table.entries[j].length,
        }
    }

    pub fn sign(&self, j: usize) -> f64 {
        match self {
            KernelFamily::Gapped { .. } => 1.0,
            KernelFamily::Gapless { table, .. } => table.entries[j].sign as f64,
        }
    }

    pub fn a(&self, j: usize, lambda: f64) -> f64 {
        match self {
            KernelFamily::Gapped { eta, .. } => a_n_gapped_re(j + 1, lambda, *eta),
            KernelFamily::Gapless { gamma, table } => {
                let e = &table.entries[j];
                a_string_re(e.length, e.parity, lambda, *gamma)
            }
        }
    }

    pub fn a_pair(&self, j: usize, k: usize, lambda: f64) -> f64 {
        match self {
            KernelFamily::Gapped { eta, .. } => a_nm_gapped_re(j + 1, k + 1, lambda, *eta),
            KernelFamily::Gapless { gamma, table } => a_jk_gapless_re(j, k, lambda, table, *gamma),
        }
    }
}

pub fn shifted_average<F: Fn(f64) -> f64>(f: F, s: f64, lambda: f64) -> f64 {
    0.5 * (f(lambda + s) + f(lambda - s))
}

// ---------------------------------------------------------- convolution

/// Reference quadrature of ∫ K(μ − λ) g(μ) dμ by a dense sum.
pub fn convolve<K: Fn(f64) -> f64>(grid: &Grid, kernel: K, g: &[f64]) -> Result<Vec<f64>> {
    grid.check(g)?;
    Ok(grid
        .nodes
        .iter()
        .map(|&l| grid.nodes.iter().zip(&grid.weights).zip(g).map(|((&m, &w), &gv)| kernel(m - l) * w * gv).sum())
        .collect())
}

/// Matrix of convolution operators (K_jk ∗ ·) on a uniform grid, applied
/// through FFTs. The periodic domain is circulant; the line is Toeplitz and
/// is embedded in a circulant of twice the size. Kernels must be even.
pub struct BlockConvolver {
    n: usize,
    size: usize,
    blocks: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    spectra: Vec<Vec<C64>>,
}

impl BlockConvolver {
    pub fn new<K: Fn(usize, usize, f64) -> f64>(grid: &Grid, blocks: usize, kernel: K) -> Self {
        let n = grid.len();
        let h = grid.spacing();
        let size = if grid.is_periodic() { n } else { 2 * n };
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut spectra: Vec<Vec<C64>> = Vec::with_capacity(blocks * blocks);
        for j in 0..blocks {
            for k in 0..blocks {
                if k < j {
                    let s: Vec<C64> = spectra[k * blocks + j].clone();
                    spectra.push(s);
                    continue;
                }
                let mut c = vec![C64::new(0.0, 0.0); size];
                for (d, slot) in c.iter_mut().enumerate() {
                    let lag = if grid.is_periodic() {
                        d as f64
                    } else if d < n {
                        d as f64
                    } else if d == n {
                        continue;
                    } else {
                        d as f64 - size as f64
                    };
                    *slot = C64::new(h * kernel(j, k, lag * h), 0.0);
                }
                fwd.process(&mut c);
                spectra.push(c);
            }
        }
        BlockConvolver { n, size, blocks, fwd, inv, spectra }
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn grid_len(&self) -> usize {
        self.n
    }

    /// out_j = Σ_k K_jk ∗ input_k.
    pub fn apply(&self, input: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut hat: Vec<Vec<C64>> = Vec::with_capacity(self.blocks);
        for g in input {
            let mut v = vec![C64::new(0.0, 0.0); self.size];
            for (slot, &x) in v.iter_mut().zip(g) {
                slot.re = x;
            }
            self.fwd.process(&mut v);
            hat.push(v);
        }
        let scale = 1.0 / self.size as f64;
        (0..self.blocks)
            .map(|j| {
                let mut acc = vec![C64::new(0.0, 0.0); self.size];
                for (k, gk) in hat.iter().enumerate() {
                    let s = &self.spectra[j * self.blocks + k];
                    for ((a, x), y) in acc.iter_mut().zip(s).zip(gk) {
                        *a += x * y;
                    }
                }
                self.inv.process(&mut acc);
                acc[..self.n].iter().map(|z| z.re * scale).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RootOfUnityPoint;

    #[test]
    fn grid_examples() {
        let g = make_grid(Domain::PeriodicBrillouin, 8).unwrap();
        for (k, &x) in g.nodes.iter().enumerate() {
            assert!((x - (-PI / 2.0 + k as f64 * PI / 8.0)).abs() < 1e-15);
        }
        assert!(g.weights.iter().all(|&w| (w - PI / 8.0).abs() < 1e-15));
        let l = make_grid(Domain::TruncatedLine { cutoff: 20.0 }, 64).unwrap();
        assert!((l.weights.iter().sum::<f64>() - 40.0).abs() < 1e-12);
        let p = make_grid(Domain::PeriodicBrillouin, 512).unwrap();
        let c: Vec<f64> = p.nodes.iter().map(|x| (2.0 * x).cos()).collect();
        assert!(p.integrate(&c).abs() < 1e-14);
        assert!(make_grid(Domain::PeriodicBrillouin, 4).is_err());
    }

    #[test]
    fn gapped_kernel_closed_forms() {
        let eta = 1.3;
        let a0 = a_n_gapped(1, C64::new(0.0, 0.0), eta).unwrap().re;
        assert!((a0 - 1.0 / ((eta / 2.0).tanh() * PI)).abs() < 1e-13);
        let ah = a_n_gapped(1, C64::new(PI / 2.0, 0.0), eta).unwrap().re;
        assert!((ah - (eta / 2.0).tanh() / PI).abs() < 1e-13);
        let g = Grid::periodic_midpoint(1024).unwrap();
        for n in 1..=5 {
            let v: Vec<f64> = g.nodes.iter().map(|&l| a_n_gapped_re(n, l, 1.7627)).collect();
            assert!((g.integrate(&v) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pair_expansions() {
        let (eta, l) = (0.9, C64::new(0.3, 0.0));
        let a = |k| a_n_gapped(k, l, eta).unwrap();
        assert!((a_nm_gapped(1, 1, l, eta).unwrap() - a(2)).norm() < 1e-15);
        assert!((a_nm_gapped(1, 2, l, eta).unwrap() - a(1) - a(3)).norm() < 1e-15);
        assert!((a_nm_gapped(2, 3, l, eta).unwrap() - a(1) - 2.0 * a(3) - a(5)).norm() < 1e-14);
    }

    #[test]
    fn string_table_pi_over_3() {
        let t = build_string_table(RootOfUnityPoint::new(2, 1).unwrap());
        let got: Vec<(usize, i32)> = t.entries.iter().map(|e| (e.length, e.parity)).collect();
        assert_eq!(got, vec![(1, 1), (1, -1), (2, 1)]);
        let q: Vec<f64> = t.entries.iter().map(|e| e.q).collect();
        assert_eq!(q, vec![2.0, -1.0, 1.0]);
        let s: Vec<i32> = t.entries.iter().map(|e| e.sign).collect();
        assert_eq!(s, vec![1, -1, 1]);
    }

    #[test]
    fn string_table_pi_over_4() {
        let t = build_string_table(RootOfUnityPoint::new(3, 1).unwrap());
        let got: Vec<(usize, i32)> = t.entries.iter().map(|e| (e.length, e.parity)).collect();
        assert_eq!(got, vec![(1, 1), (2, 1), (1, -1), (3, 1)]);
    }

    #[test]
    fn gapless_kernel_value() {
        let t = build_string_table(RootOfUnityPoint::new(2, 1).unwrap());
        let v = a_j_gapless(0, C64::new(0.0, 0.0), &t, PI / 3.0).unwrap().re;
        assert!((v - 3f64.sqrt() / PI).abs() < 1e-14);
        assert!(a_j_gapless(1, C64::new(0.0, 0.0), &t, PI / 3.0).unwrap().re < 0.0);
    }

    #[test]
    fn fft_matches_dense() {
        for grid in [Grid::periodic_midpoint(64).unwrap(), Grid::line(6.0, 64).unwrap()] {
            let k = |l: f64| a_n_gapped_re(2, l, 0.8) + 0.3 * a_n_gapped_re(1, l, 0.4);
            let g: Vec<f64> = grid.nodes.iter().map(|x| (x * 1.3).cos() + 0.2 * x).collect();
            let dense = convolve(&grid, k, &g).unwrap();
            let bc = BlockConvolver::new(&grid, 1, |_, _, l| k(l));
            let fast = bc.apply(&[g.clone()]);
            for (a, b) in dense.iter().zip(&fast[0]) {
                assert!((a - b).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn unit_mass_convolution() {
        let grid = Grid::periodic_midpoint(256).unwrap();
        let one = vec![1.0; 256];
        let out = convolve(&grid, |l| a_n_gapped_re(1, l, 1.1), &one).unwrap();
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(convolve(&grid, |_| 0.0, &one).unwrap().iter().all(|&v| v == 0.0));
        assert!(convolve(&grid, |_| 0.0, &one[..10]).is_err());
    }
}
