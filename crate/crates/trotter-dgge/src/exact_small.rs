//! Dense finite-size oracle: circuit, Hamiltonian, charges, transfer
//! matrices, time evolution, diagonal ensemble and the one-magnon sector.
//!
//! Sites are 0-based and site i lives on bit L−1−i of a basis index, so
//! operators agree with the Kronecker-product ordering. Bit 0 is spin up.
//! The Néel state has site 0 up.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use serde::Serialize;

use crate::params::DerivedParams;
use crate::{Error, Result, C64};

/// Largest chain for dense 2^L operators and state vectors.
pub const MAX_DENSE_L: usize = 14;
/// Largest chain for the diagonal ensemble.
pub const MAX_DIAG_L: usize = 12;
/// Largest chain for the one-magnon sector.
pub const MAX_MAGNON_L: usize = 24;

const CLUSTER_TOL: f64 = 1e-9;

fn check_l(l: usize, max: usize) -> Result<()> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::InvalidSize(l));
    }
    if l > max {
        return Err(Error::SizeBudgetExceeded { l, max });
    }
    Ok(())
}

#[inline]
fn mask(l: usize, i: usize) -> usize {
    1 << (l - 1 - i)
}

#[inline]
fn bit(s: usize, l: usize, i: usize) -> usize {
    (s >> (l - 1 - i)) & 1
}

/// Moves every spin from site i to site i + shift (periodic).
pub fn translate_index(s: usize, l: usize, shift: usize) -> usize {
    let mut t = 0;
    for i in 0..l {
        if bit(s, l, i) == 1 {
            t |= mask(l, (i + shift) % l);
        }
    }
    t
}

#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub l: usize,
    pub label: String,
    pub mat: DMatrix<C64>,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn identity(l: usize) -> Self {
        DenseOperator { l, label: "1".into(), mat: DMatrix::identity(1 << l, 1 << l) }
    }

    /// max |U†U − 1|.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.mat.adjoint() * &self.mat;
        max_abs(&(p - DMatrix::<C64>::identity(self.dim(), self.dim())))
    }

    /// max |A − A†|.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.mat - self.mat.adjoint()))
    }

    /// max |[A, B]|.
    pub fn commutator_norm(&self, other: &DenseOperator) -> f64 {
        max_abs(&(&self.mat * &other.mat - &other.mat * &self.mat))
    }

    pub fn mul(&self, other: &DenseOperator) -> DenseOperator {
        DenseOperator { l: self.l, label: format!("{}*{}", self.label, other.label), mat: &self.mat * &other.mat }
    }
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Best scalar k with a ≈ k b and the relative deviation max|a − k b| / |k|.
pub fn proportionality(a: &DMatrix<C64>, b: &DMatrix<C64>) -> (C64, f64) {
    let num: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let den: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    let k = num / den;
    let dev = max_abs(&(a - b * k)) / k.norm().max(1e-300);
    (k, dev)
}

#[derive(Debug, Clone)]
pub struct DenseState {
    pub l: usize,
    pub amps: Vec<C64>,
}

impl DenseState {
    pub fn neel(l: usize) -> Result<Self> {
        check_l(l, MAX_DENSE_L)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << l];
        amps[neel_index(l)] = C64::new(1.0, 0.0);
        Ok(DenseState { l, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨σ^z_i⟩ for every site.
    pub fn sz(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.l];
        for (s, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += if bit(s, self.l, i) == 0 { p } else { -p };
            }
        }
        out
    }
}

/// Odd sites down.
pub fn neel_index(l: usize) -> usize {
    (0..l).filter(|i| i % 2 == 1).map(|i| mask(l, i)).sum()
}

// ---------------------------------------------------------- circuit

/// Two-site gate exp(−iτ/4 [σˣσˣ + σʸσʸ + Δ(σᶻσᶻ − 1)]) in the basis
/// (↑↑, ↑↓, ↓↑, ↓↓).
pub fn gate_matrix(params: &DerivedParams) -> Matrix4<C64> {
    let (c, s) = ((params.tau / 2.0).cos(), (params.tau / 2.0).sin());
    let ph = C64::from_polar(1.0, params.tau * params.delta / 2.0);
    let one = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    let a = ph * c;
    let b = ph * C64::new(0.0, -s);
    Matrix4::new(one, z, z, z, z, a, b, z, z, b, a, z, z, z, z, one)
}

pub fn build_gate(params: &DerivedParams) -> DenseOperator {
    let g = gate_matrix(params);
    DenseOperator { l: 2, label: "V".into(), mat: DMatrix::from_fn(4, 4, |i, j| g[(i, j)]) }
}

fn apply_gate(psi: &mut [C64], l: usize, i: usize, j: usize, g: &Matrix4<C64>) {
    let (mi, mj) = (mask(l, i), mask(l, j));
    for s in 0..psi.len() {
        if s & (mi | mj) != 0 {
            continue;
        }
        let idx = [s, s | mj, s | mi, s | mi | mj];
        let v = [psi[idx[0]], psi[idx[1]], psi[idx[2]], psi[idx[3]]];
        for (r, &t) in idx.iter().enumerate() {
            psi[t] = (0..4).map(|c| g[(r, c)] * v[c]).sum();
        }
    }
}

/// Bonds of U_o: (1,2), (3,4), …, (L−1, 0), the last one wrapping.
fn odd_bonds(l: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..l / 2).map(move |n| (2 * n + 1, (2 * n + 2) % l))
}

/// Bonds of U_e: (0,1), (2,3), …
fn even_bonds(l: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..l / 2).map(|n| (2 * n, 2 * n + 1))
}

/// ψ ← U_e U_o ψ.
pub fn apply_floquet(psi: &mut [C64], l: usize, g: &Matrix4<C64>) {
    for (i, j) in odd_bonds(l) {
        apply_gate(psi, l, i, j, g);
    }
    for (i, j) in even_bonds(l) {
        apply_gate(psi, l, i, j, g);
    }
}

fn from_columns<F: Fn(&mut Vec<C64>)>(l: usize, label: &str, f: F) -> DenseOperator {
    let d = 1 << l;
    let mut mat = DMatrix::<C64>::zeros(d, d);
    let mut col = vec![C64::new(0.0, 0.0); d];
    for s in 0..d {
        col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        col[s] = C64::new(1.0, 0.0);
        f(&mut col);
        mat.column_mut(s).iter_mut().zip(&col).for_each(|(m, v)| *m = *v);
    }
    DenseOperator { l, label: label.into(), mat }
}

pub fn build_floquet(params: &DerivedParams, l: usize) -> Result<DenseOperator> {
    check_l(l, MAX_DENSE_L)?;
    let g = gate_matrix(params);
    Ok(from_columns(l, "U", |c| apply_floquet(c, l, &g)))
}

/// One-site translation 𝒯 moving site i to i + 1.
pub fn build_translation(l: usize) -> Result<DenseOperator> {
    check_l(l, MAX_DENSE_L)?;
    let d = 1 << l;
    let mut mat = DMatrix::<C64>::zeros(d, d);
    for s in 0..d {
        mat[(translate_index(s, l, 1), s)] = C64::new(1.0, 0.0);
    }
    Ok(DenseOperator { l, label: "T".into(), mat })
}

/// M̂ = Σ_j (1 − σᶻ_j)/2.
pub fn build_magnon_number(l: usize) -> Result<DenseOperator> {
    check_l(l, MAX_DENSE_L)?;
    let d = 1 << l;
    let diag = DVector::from_iterator(d, (0..d).map(|s| C64::new(s.count_ones() as f64, 0.0)));
    Ok(DenseOperator { l, label: "M".into(), mat: DMatrix::from_diagonal(&diag) })
}

// ---------------------------------------------------------- local operators

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// mat += coeff · Π σ^{p}_{site}.
pub fn add_pauli_term(mat: &mut DMatrix<C64>, l: usize, coeff: C64, ops: &[(usize, Pauli)]) {
    for s in 0..(1 << l) {
        let mut t = s;
        let mut amp = coeff;
        for &(site, p) in ops {
            let b = bit(s, l, site);
            match p {
                Pauli::X => t ^= mask(l, site),
                Pauli::Y => {
                    t ^= mask(l, site);
                    amp *= if b == 0 { C64::i() } else { -C64::i() };
                }
                Pauli::Z => {
                    if b == 1 {
                        amp = -amp;
                    }
                }
            }
        }
        mat[(t, s)] += amp;
    }
}

/// H = ¼ Σ_j [σˣσˣ + σʸσʸ + Δ(σᶻσᶻ − 1)], periodic.
pub fn build_hamiltonian(params: &DerivedParams, l: usize) -> Result<DenseOperator> {
    check_l(l, MAX_DENSE_L)?;
    let d = 1 << l;
    let mut mat = DMatrix::<C64>::zeros(d, d);
    let q = C64::new(0.25, 0.0);
    for j in 0..l {
        let k = (j + 1) % l;
        add_pauli_term(&mut mat, l, q, &[(j, Pauli::X), (k, Pauli::X)]);
        add_pauli_term(&mut mat, l, q, &[(j, Pauli::Y), (k, Pauli::Y)]);
        add_pauli_term(&mut mat, l, q * params.delta, &[(j, Pauli::Z), (k, Pauli::Z)]);
        add_pauli_term(&mut mat, l, -q * params.delta, &[]);
    }
    Ok(DenseOperator { l, label: "H".into(), mat })
}

/// max |U(t/M)^M − e^{−iHt}| at fixed Δ.
pub fn trotter_error(params: &DerivedParams, l: usize, t: f64, m: usize) -> Result<f64> {
    let h = build_hamiltonian(params, l)?;
    let eig = h.mat.clone().symmetric_eigen();
    let phases = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * t)));
    let exact = &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
    let mut step = *params;
    step.tau = t / m as f64;
    let g = gate_matrix(&step);
    let trot = from_columns(l, "U^M", |c| {
        for _ in 0..m {
            apply_floquet(c, l, &g);
        }
    });
    Ok(max_abs(&(trot.mat - exact)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

/// First local charge Q₁^± at spectral shift x = lattice_shift(). The three-
/// site terms sit on triples starting at even sites for Q₁⁺ and odd sites
/// for Q₁⁻. In the gapped regime the overall factor is rotated so that the
/// charge is Hermitian.
pub fn build_charge_q1(params: &DerivedParams, l: usize, branch: Branch) -> Result<DenseOperator> {
    build_charge_q1_with(params.gamma, params.lattice_shift(), params.is_gapped(), l, branch)
}

/// Q₁^± for explicit γ and x.
pub fn build_charge_q1_with(g: C64, x: C64, gapped: bool, l: usize, branch: Branch) -> Result<DenseOperator> {
    check_l(l, MAX_DENSE_L)?;
    if l < 4 {
        return Err(Error::InvalidSize(l));
    }
    let (start, s1, s2) = match branch {
        Branch::Plus => (0, 1.0, -1.0),
        Branch::Minus => (1, -1.0, 1.0),
    };
    let den = (2.0 * x).cos() - (2.0 * g).cos();
    let d = 1 << l;
    let mut mat = DMatrix::<C64>::zeros(d, d);
    let two = g.sin() / den;
    for j in 0..l {
        let k = (j + 1) % l;
        add_pauli_term(&mut mat, l, two * x.cos(), &[(j, Pauli::X), (k, Pauli::X)]);
        add_pauli_term(&mut mat, l, two * x.cos(), &[(j, Pauli::Y), (k, Pauli::Y)]);
        add_pauli_term(&mut mat, l, two * g.cos(), &[(j, Pauli::Z), (k, Pauli::Z)]);
        add_pauli_term(&mut mat, l, -two * g.cos(), &[]);
    }
    let c_heis = -g.cos() / g.sin() * x.sin() * x.sin() / den;
    let c_dm = C64::i() * x.sin() / den;
    for a in (start..l).step_by(2) {
        let (b, c) = ((a + 1) % l, (a + 2) % l);
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            add_pauli_term(&mut mat, l, c_heis, &[(a, p), (c, p)]);
        }
        let k1 = c_dm * s1 * x.cos();
        add_pauli_term(&mut mat, l, k1, &[(b, Pauli::Z), (a, Pauli::X), (c, Pauli::Y)]);
        add_pauli_term(&mut mat, l, -k1, &[(b, Pauli::Z), (a, Pauli::Y), (c, Pauli::X)]);
        let k2 = c_dm * s2 * g.cos();
        add_pauli_term(&mut mat, l, k2, &[(a, Pauli::Z), (b, Pauli::X), (c, Pauli::Y)]);
        add_pauli_term(&mut mat, l, -k2, &[(a, Pauli::Z), (b, Pauli::Y), (c, Pauli::X)]);
        add_pauli_term(&mut mat, l, k2, &[(a, Pauli::X), (b, Pauli::Y), (c, Pauli::Z)]);
        add_pauli_term(&mut mat, l, -k2, &[(a, Pauli::Y), (b, Pauli::X), (c, Pauli::Z)]);
    }
    if gapped {
        let s = g.sin();
        mat *= s.conj() / s.norm();
    }
    let label = match branch {
        Branch::Plus => "Q1+",
        Branch::Minus => "Q1-",
    };
    Ok(DenseOperator { l, label: label.into(), mat })
}

// ---------------------------------------------------------- transfer matrix

/// R in the |aux, phys⟩ basis: R₀₀ = R₃₃ = sin(u+γ)/sin γ,
/// R₁₁ = R₂₂ = sin u / sin γ, R₁₂ = R₂₁ = 1.
fn r_matrix(u: C64, gamma: C64) -> Matrix4<C64> {
    let a = (u + gamma).sin() / gamma.sin();
    let b = u.sin() / gamma.sin();
    let one = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    Matrix4::new(a, z, z, z, z, b, one, z, z, one, b, z, z, z, z, a)
}

/// Row-to-row transfer matrix tr_aux(R_L(u − x/2) ⋯ R_1(u + x/2)) on a
/// sparse vector. 1-based odd sites carry u + x/2.
pub fn apply_transfer_sparse(
    u: C64,
    gamma: C64,
    x: C64,
    l: usize,
    input: &HashMap<usize, C64>,
) -> HashMap<usize, C64> {
    let rs = [r_matrix(u + x / 2.0, gamma), r_matrix(u - x / 2.0, gamma)];
    let mut out: HashMap<usize, C64> = HashMap::new();
    for a0 in 0..2 {
        let mut cur: [HashMap<usize, C64>; 2] = [HashMap::new(), HashMap::new()];
        cur[a0] = input.clone();
        for i in 0..l {
            let r = &rs[i % 2];
            let mut next: [HashMap<usize, C64>; 2] = [HashMap::new(), HashMap::new()];
            for (beta, states) in cur.iter().enumerate() {
                for (&s, &amp) in states {
                    let si = bit(s, l, i);
                    for alpha in 0..2 {
                        for ti in 0..2 {
                            let rv = r[(alpha * 2 + ti, beta * 2 + si)];
                            if rv == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let t = if ti == si { s } else { s ^ mask(l, i) };
                            *next[alpha].entry(t).or_insert(C64::new(0.0, 0.0)) += rv * amp;
                        }
                    }
                }
            }
            cur = next;
        }
        for (s, v) in cur[a0].drain() {
            *out.entry(s).or_insert(C64::new(0.0, 0.0)) += v;
        }
    }
    out
}

/// T(u) with the lattice shift of `params` as inhomogeneity.
pub fn build_transfer_matrix(u: C64, params: &DerivedParams, l: usize) -> Result<DenseOperator> {
    build_transfer_with(u, params.gamma, params.lattice_shift(), l)
}

pub fn build_transfer_with(u: C64, gamma: C64, x: C64, l: usize) -> Result<DenseOperator> {
    check_l(l, MAX_DENSE_L)?;
    let d = 1 << l;
    let mut mat = DMatrix::<C64>::zeros(d, d);
    for s in 0..d {
        let e: HashMap<usize, C64> = [(s, C64::new(1.0, 0.0))].into_iter().collect();
        for (t, v) in apply_transfer_sparse(u, gamma, x, l, &e) {
            mat[(t, s)] = v;
        }
    }
    Ok(DenseOperator { l, label: format!("T({u})"), mat })
}

/// 𝕋(0) = N · T(x/2) T(x/2 − γ) with N from the y-system normalization.
pub fn normalized_transfer_at_zero(params: &DerivedParams, l: usize) -> Result<DenseOperator> {
    let x = params.lattice_shift();
    let g = params.gamma;
    let a = build_transfer_with(x / 2.0, g, x, l)?;
    let b = build_transfer_with(x / 2.0 - g, g, x, l)?;
    let n = crate::ysystem::floquet_normalization(g, x, l);
    let mut p = a.mul(&b);
    p.mat *= n;
    p.label = "T(0)".into();
    Ok(p)
}

// ---------------------------------------------------------- time evolution

#[derive(Debug, Clone, Serialize)]
pub struct Evolution {
    pub l: usize,
    /// sz[t][i] = ⟨σᶻ_i⟩ after t steps, t = 0..=steps.
    pub sz: Vec<Vec<f64>>,
    /// (mean over odd sites − mean over even sites)/2; −1 at t = 0.
    pub staggered: Vec<f64>,
    pub window: (usize, usize),
    /// Per-site average over the window.
    pub tail: Vec<f64>,
    pub tail_staggered: f64,
    /// Running average of `staggered` from the window start.
    pub running: Vec<f64>,
    /// max over t and j of |⟨σᶻ_{2j}⟩ + ⟨σᶻ_{2j+1}⟩|.
    pub antisymmetry: f64,
}

pub fn staggered_of(sz: &[f64]) -> f64 {
    let h = sz.len() as f64 / 2.0;
    let odd: f64 = sz.iter().skip(1).step_by(2).sum::<f64>() / h;
    let even: f64 = sz.iter().step_by(2).sum::<f64>() / h;
    (odd - even) / 2.0
}

pub fn evolve_and_average(params: &DerivedParams, l: usize, steps: usize, window: (usize, usize)) -> Result<Evolution> {
    check_l(l, MAX_DENSE_L)?;
    if steps > 100_000 {
        return Err(Error::InvalidInput { context: "exact_small", msg: format!("steps {steps} above 1e5") });
    }
    let (w0, w1) = window;
    if w0 > w1 || w1 > steps {
        return Err(Error::InvalidInput { context: "exact_small", msg: format!("bad window {w0}..={w1} for {steps} steps") });
    }
    let g = gate_matrix(params);
    let mut state = DenseState::neel(l)?;
    let mut sz = Vec::with_capacity(steps + 1);
    sz.push(state.sz());
    for _ in 0..steps {
        apply_floquet(&mut state.amps, l, &g);
        sz.push(state.sz());
    }
    let staggered: Vec<f64> = sz.iter().map(|s| staggered_of(s)).collect();
    let n = (w1 - w0 + 1) as f64;
    let tail: Vec<f64> = (0..l).map(|i| sz[w0..=w1].iter().map(|s| s[i]).sum::<f64>() / n).collect();
    let mut acc = 0.0;
    let running: Vec<f64> = staggered[w0..=w1]
        .iter()
        .enumerate()
        .map(|(k, v)| {
            acc += v;
            acc / (k + 1) as f64
        })
        .collect();
    let antisymmetry = sz
        .iter()
        .flat_map(|s| s.chunks(2).map(|p| (p[0] + p[1]).abs()))
        .fold(0.0, f64::max);
    Ok(Evolution {
        l,
        tail_staggered: staggered_of(&tail),
        sz,
        staggered,
        window,
        tail,
        running,
        antisymmetry,
    })
}

// ---------------------------------------------------------- sectors

/// Fixed magnon number and, optionally, two-site momentum K with
/// 𝒯² = e^{2πiK/(L/2)}.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub l: usize,
    pub m: usize,
    pub k: Option<usize>,
    /// Basis vectors as (full index, amplitude) lists.
    pub vectors: Vec<Vec<(usize, C64)>>,
}

impl SectorBasis {
    pub fn new(l: usize, m: usize, k: Option<usize>) -> Result<Self> {
        check_l(l, MAX_DENSE_L)?;
        let cells = l / 2;
        let mut vectors = Vec::new();
        for s in 0..(1usize << l) {
            if s.count_ones() as usize != m {
                continue;
            }
            let Some(k) = k else {
                vectors.push(vec![(s, C64::new(1.0, 0.0))]);
                continue;
            };
            let orbit: Vec<usize> = (0..cells).map(|n| translate_index(s, l, 2 * n)).collect();
            if orbit.iter().any(|&t| t < s) {
                continue;
            }
            let mut amps: Vec<(usize, C64)> = Vec::new();
            for (n, &t) in orbit.iter().enumerate() {
                let ph = C64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / cells as f64);
                match amps.iter_mut().find(|(u, _)| *u == t) {
                    Some(e) => e.1 += ph,
                    None => amps.push((t, ph)),
                }
            }
            let nrm = amps.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
            if nrm < 1e-10 {
                continue;
            }
            amps.iter_mut().for_each(|(_, a)| *a /= nrm);
            vectors.push(amps);
        }
        Ok(SectorBasis { l, m, k, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn embed(&self, j: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); 1 << self.l];
        for &(s, a) in &self.vectors[j] {
            v[s] = a;
        }
        v
    }

    /// ⟨b_i | v⟩ for every basis vector.
    pub fn project(&self, v: &[C64]) -> DVector<C64> {
        DVector::from_iterator(self.dim(), self.vectors.iter().map(|b| b.iter().map(|&(s, a)| a.conj() * v[s]).sum()))
    }

    /// Restriction of the Floquet operator.
    pub fn floquet_block(&self, params: &DerivedParams) -> DMatrix<C64> {
        let g = gate_matrix(params);
        let mut out = DMatrix::<C64>::zeros(self.dim(), self.dim());
        for j in 0..self.dim() {
            let mut v = self.embed(j);
            apply_floquet(&mut v, self.l, &g);
            out.set_column(j, &self.project(&v));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagonalEnsemble {
    pub l: usize,
    /// Average ⟨σᶻ⟩ on odd sites (initially down).
    pub m0: f64,
    /// Average ⟨σᶻ⟩ on even sites.
    pub m1: f64,
    pub staggered: f64,
    pub uniform: f64,
    pub probability: f64,
    pub sector_dim: usize,
    pub clusters: usize,
    pub largest_cluster: usize,
}

/// Groups eigenphases closer than `tol`, including across ±π.
fn cluster_phases(phases: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..phases.len()).collect();
    idx.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &i in &idx {
        match out.last_mut() {
            Some(c) if phases[i] - phases[*c.last().unwrap()] < tol => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    if out.len() > 1 {
        let first = phases[out[0][0]];
        let last = phases[*out.last().unwrap().last().unwrap()];
        if first + 2.0 * PI - last < tol {
            let tail = out.pop().unwrap();
            out[0].extend(tail);
        }
    }
    out
}

/// Infinite-time average of the sublattice magnetizations from the Néel
/// state, Σ_c ⟨ψ|P_c σᶻ P_c|ψ⟩ over eigenphase clusters c. The projector
/// form is exact for degenerate quasi-energies.
pub fn diagonal_ensemble_sz(params: &DerivedParams, l: usize) -> Result<DiagonalEnsemble> {
    check_l(l, MAX_DIAG_L)?;
    let basis = SectorBasis::new(l, l / 2, Some(0))?;
    let u = basis.floquet_block(params);
    let neel = neel_index(l);
    let mut psi = DVector::<C64>::zeros(basis.dim());
    let pos = basis.vectors.iter().position(|b| b.iter().any(|&(s, _)| s == neel)).ok_or(Error::InvalidInput {
        context: "exact_small",
        msg: "Néel state missing from its sector".into(),
    })?;
    psi[pos] = basis.vectors[pos][0].1.conj();
    let sub = |s: usize, parity: usize| -> f64 {
        (0..l).filter(|i| i % 2 == parity).map(|i| 1.0 - 2.0 * bit(s, l, i) as f64).sum::<f64>() / (l / 2) as f64
    };
    let o0: Vec<f64> = basis.vectors.iter().map(|b| sub(b[0].0, 1)).collect();
    let o1: Vec<f64> = basis.vectors.iter().map(|b| sub(b[0].0, 0)).collect();

    let (q, t) = u.schur().unpack();
    let n = t.nrows();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            off = off.max(t[(i, j)].norm());
        }
    }
    if off > 1e-8 {
        return Err(Error::DegeneracyUnresolved(off));
    }
    let phases: Vec<f64> = (0..n).map(|i| t[(i, i)].arg()).collect();
    let clusters = cluster_phases(&phases, CLUSTER_TOL);
    let w = q.adjoint() * &psi;
    let (mut m0, mut m1, mut prob) = (0.0, 0.0, 0.0);
    for c in &clusters {
        let mut pv = DVector::<C64>::zeros(n);
        for &k in c {
            pv += q.column(k) * w[k];
            prob += w[k].norm_sqr();
        }
        for (i, z) in pv.iter().enumerate() {
            m0 += o0[i] * z.norm_sqr();
            m1 += o1[i] * z.norm_sqr();
        }
    }
    Ok(DiagonalEnsemble {
        l,
        m0,
        m1,
        staggered: (m0 - m1) / 2.0,
        uniform: (m0 + m1) / 2.0,
        probability: prob,
        sector_dim: n,
        clusters: clusters.len(),
        largest_cluster: clusters.iter().map(|c| c.len()).max().unwrap_or(0),
    })
}

// ---------------------------------------------------------- one magnon

#[derive(Debug, Clone, Serialize)]
pub struct OneMagnonState {
    pub k: usize,
    pub root: C64,
    /// arg of the Floquet eigenvalue.
    pub phase: f64,
    /// Amplitudes on even and odd sites within a cell.
    pub vector: [C64; 2],
    /// ⟨σᶻ⟩ on odd sites, the m = 0 sublattice.
    pub sz_m0: f64,
    pub sz_m1: f64,
    pub residual: f64,
}

fn f_pm(p: C64, g: C64, x: C64) -> (C64, C64) {
    let i = C64::i();
    let fp = (p + i * x / 2.0 + i * g / 2.0).sinh() * (p - i * x / 2.0 + i * g / 2.0).sinh();
    let fm = (p + i * x / 2.0 - i * g / 2.0).sinh() * (p - i * x / 2.0 - i * g / 2.0).sinh();
    (fp, fm)
}

fn dlog_ratio(p: C64, g: C64, x: C64) -> C64 {
    let i = C64::i();
    let coth = |z: C64| z.cosh() / z.sinh();
    coth(p + i * x / 2.0 + i * g / 2.0) + coth(p - i * x / 2.0 + i * g / 2.0)
        - coth(p + i * x / 2.0 - i * g / 2.0)
        - coth(p - i * x / 2.0 - i * g / 2.0)
}

fn wrap_root(p: C64) -> C64 {
    let mut im = (p.im + PI / 2.0).rem_euclid(PI) - PI / 2.0;
    if (im + PI / 2.0).abs() < 1e-12 {
        im = PI / 2.0;
    }
    C64::new(p.re, im)
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Log-residual of [f⁺(p_j)/f⁻(p_j)]^{L/2} Π_{k≠j} sinh(p_j − p_k − iγ)/sinh(p_j − p_k + iγ) = 1.
pub fn bethe_residual(roots: &[C64], params: &DerivedParams, l: usize) -> Vec<f64> {
    let g = params.gamma;
    let x = params.x;
    let i = C64::i();
    roots
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let (fp, fm) = f_pm(p, g, x);
            let mut z = (l as f64 / 2.0) * (fp / fm).ln();
            for (k, &q) in roots.iter().enumerate() {
                if k != j {
                    z += ((p - q - i * g).sinh() / (p - q + i * g).sinh()).ln();
                }
            }
            C64::new(z.re, wrap_angle(z.im)).norm()
        })
        .collect()
}

fn newton_root(mut p: C64, target: C64, g: C64, x: C64) -> Result<C64> {
    for _ in 0..60 {
        let (fp, fm) = f_pm(p, g, x);
        let r = fp / fm / target;
        let f = r - 1.0;
        if f.norm() < 1e-15 {
            break;
        }
        let step = f / (r * dlog_ratio(p, g, x));
        p -= step;
        if !p.re.is_finite() || p.re.abs() > 30.0 {
            return Err(Error::RootMatchFailed(f64::INFINITY));
        }
    }
    let (fp, fm) = f_pm(p, g, x);
    let res = (fp / fm / target - 1.0).norm();
    if res > 1e-12 {
        return Err(Error::RootMatchFailed(res));
    }
    Ok(p)
}

/// The two one-magnon roots at two-site momentum K, continued in x from
/// the plane-wave solutions at x = 0.
pub fn one_magnon_roots(params: &DerivedParams, l: usize, k: usize) -> Result<[C64; 2]> {
    check_l(l, MAX_MAGNON_L)?;
    let cells = l / 2;
    let g = params.gamma;
    let target = C64::from_polar(1.0, 2.0 * PI * k as f64 / cells as f64);
    let a = C64::i() * g / 2.0;
    let half = C64::from_polar(1.0, PI * k as f64 / cells as f64);
    let mut out = [C64::new(0.0, 0.0); 2];
    for (n, r) in [half, -half].into_iter().enumerate() {
        let num = (-a).exp() - r * a.exp();
        let den = a.exp() - r * (-a).exp();
        if num.norm() < 1e-12 || den.norm() < 1e-12 {
            return Err(Error::RootMatchFailed(f64::INFINITY));
        }
        let mut p = (num / den).ln() / 2.0;
        let steps = 64;
        for s in 1..=steps {
            let xs = params.x * (s as f64 / steps as f64);
            p = newton_root(p, target, g, xs)?;
        }
        out[n] = wrap_root(p);
    }
    if (out[0] - out[1]).norm() < 1e-8 {
        return Err(Error::RootMatchFailed((out[0] - out[1]).norm()));
    }
    Ok(out)
}

/// ψ ← U ψ on the L-dimensional one-magnon space (ψ_i: magnon at site i).
fn floquet_one_magnon(psi: &mut [C64], params: &DerivedParams) {
    let l = psi.len();
    let (c, s) = ((params.tau / 2.0).cos(), (params.tau / 2.0).sin());
    let ph = C64::from_polar(1.0, params.tau * params.delta / 2.0);
    let mut gate = |i: usize, j: usize| {
        let (a, b) = (psi[i], psi[j]);
        psi[i] = ph * (c * a - C64::i() * s * b);
        psi[j] = ph * (c * b - C64::i() * s * a);
    };
    for (i, j) in odd_bonds(l) {
        gate(i, j);
    }
    for (i, j) in even_bonds(l) {
        gate(i, j);
    }
}

fn cell_vector(l: usize, k: usize, sub: usize) -> Vec<C64> {
    let cells = l / 2;
    let mut v = vec![C64::new(0.0, 0.0); l];
    for n in 0..cells {
        v[2 * n + sub] = C64::from_polar(1.0 / (cells as f64).sqrt(), 2.0 * PI * (k * n) as f64 / cells as f64);
    }
    v
}

fn eigen2(m: &Matrix2<C64>) -> [(C64, [C64; 2]); 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr / 4.0 - det).sqrt();
    let mut out = [(C64::new(0.0, 0.0), [C64::new(0.0, 0.0); 2]); 2];
    for (n, lam) in [tr / 2.0 + disc, tr / 2.0 - disc].into_iter().enumerate() {
        let v = if m[(0, 1)].norm() >= m[(1, 0)].norm() && m[(0, 1)].norm() > 1e-14 {
            [m[(0, 1)], lam - m[(0, 0)]]
        } else if m[(1, 0)].norm() > 1e-14 {
            [lam - m[(1, 1)], m[(1, 0)]]
        } else if n == 0 {
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        } else {
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
        };
        let nrm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        out[n] = (lam, [v[0] / nrm, v[1] / nrm]);
    }
    out
}

/// Transfer-matrix eigenvalue of a one-magnon state with root p.
fn transfer_eigenvalue(p: C64, u0: C64, params: &DerivedParams, l: usize) -> C64 {
    let g = params.gamma;
    let xl = params.lattice_shift();
    let (mut a, mut b) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    for i in 0..l {
        let ui = if i % 2 == 0 { u0 + xl / 2.0 } else { u0 - xl / 2.0 };
        a *= (ui + g).sin() / g.sin();
        b *= ui.sin() / g.sin();
    }
    // x_lat is −x or π + x; the second case moves the root by π/2.
    let delta = if (xl + params.x).norm() < 1e-8 { 0.0 } else { PI / 2.0 };
    let v = C64::i() * p - g / 2.0 + delta;
    let w = u0 - v;
    a * (w - g).sin() / w.sin() + b * (w + g).sin() / w.sin()
}

/// All L one-magnon Floquet eigenstates with their Bethe roots. Roots are
/// paired to eigenvectors through the eigenvalue of T(u₀) at a generic u₀,
/// which is non-degenerate inside each momentum block.
pub fn one_magnon_sector(params: &DerivedParams, l: usize) -> Result<Vec<OneMagnonState>> {
    check_l(l, MAX_MAGNON_L)?;
    let u0 = C64::new(0.37, 0.21);
    let cells = l / 2;
    let mut out = Vec::with_capacity(l);
    for k in 0..cells {
        let basis = [cell_vector(l, k, 0), cell_vector(l, k, 1)];
        let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>();
        let mut uk = Matrix2::<C64>::zeros();
        let mut tk = Matrix2::<C64>::zeros();
        for (j, bj) in basis.iter().enumerate() {
            let mut v = bj.clone();
            floquet_one_magnon(&mut v, params);
            let sparse: HashMap<usize, C64> = bj.iter().enumerate().map(|(i, &a)| (mask(l, i), a)).collect();
            let tv = apply_transfer_sparse(u0, params.gamma, params.lattice_shift(), l, &sparse);
            let mut tvec = vec![C64::new(0.0, 0.0); l];
            for (s, a) in tv {
                if s.count_ones() == 1 {
                    tvec[l - 1 - s.trailing_zeros() as usize] = a;
                }
            }
            for (i, bi) in basis.iter().enumerate() {
                uk[(i, j)] = dot(bi, &v);
                tk[(i, j)] = dot(bi, &tvec);
            }
        }
        let eig = eigen2(&tk);
        if (eig[0].0 - eig[1].0).norm() < 1e-8 * eig[0].0.norm().max(1.0) {
            return Err(Error::RootMatchFailed((eig[0].0 - eig[1].0).norm()));
        }
        let roots = one_magnon_roots(params, l, k)?;
        let mut used = [false; 2];
        for p in roots {
            let lam = transfer_eigenvalue(p, u0, params, l);
            let (n, d) = (0..2)
                .map(|n| (n, (eig[n].0 - lam).norm() / lam.norm().max(1e-300)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if d > 1e-8 || used[n] {
                return Err(Error::RootMatchFailed(d));
            }
            used[n] = true;
            let v = eig[n].1;
            let uv = [uk[(0, 0)] * v[0] + uk[(0, 1)] * v[1], uk[(1, 0)] * v[0] + uk[(1, 1)] * v[1]];
            let mu = v[0].conj() * uv[0] + v[1].conj() * uv[1];
            let eres = ((uv[0] - mu * v[0]).norm_sqr() + (uv[1] - mu * v[1]).norm_sqr()).sqrt();
            if eres > 1e-8 {
                return Err(Error::RootMatchFailed(eres));
            }
            let residual = bethe_residual(&[p], params, l)[0];
            out.push(OneMagnonState {
                k,
                root: p,
                phase: mu.arg(),
                vector: v,
                sz_m0: 1.0 - 2.0 * v[1].norm_sqr() / cells as f64,
                sz_m1: 1.0 - 2.0 * v[0].norm_sqr() / cells as f64,
                residual,
            });
        }
    }
    Ok(out)
}
