//! Linear solvers for the second-kind integral equations
//! g_j + Σ_k K_jk ∗ (w_k g_k) = s_j.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::kernels::BlockConvolver;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Method {
    /// Restarted GMRES.
    Gmres { restart: usize },
    /// g ← (1 − α)g + α(s − K∗(w g)).
    Damped { alpha: f64 },
    /// Assemble the full matrix and LU-solve; small grids only.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 2000, method: Method::Gmres { restart: 60 } }
    }
}

pub struct Solution {
    pub g: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
}

fn flatten(v: &[Vec<f64>]) -> Vec<f64> {
    v.iter().flatten().copied().collect()
}

fn unflatten(v: &[f64], n: usize) -> Vec<Vec<f64>> {
    v.chunks(n).map(|c| c.to_vec()).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Apply (1 + K w) to a flattened block vector.
fn apply_op(conv: &BlockConvolver, w: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let n = conv.grid_len();
    let wg: Vec<Vec<f64>> =
        g.chunks(n).zip(w).map(|(gk, wk)| gk.iter().zip(wk).map(|(a, b)| a * b).collect()).collect();
    let kg = conv.apply(&wg);
    g.iter().zip(kg.iter().flatten()).map(|(a, b)| a + b).collect()
}

pub fn solve_dressing(
    conv: &BlockConvolver,
    weights: &[Vec<f64>],
    source: &[Vec<f64>],
    guess: Option<&[Vec<f64>]>,
    opts: &SolveOptions,
    context: &'static str,
) -> Result<Solution> {
    let n = conv.grid_len();
    if weights.len() != conv.blocks() || source.len() != conv.blocks() {
        return Err(Error::InvalidInput { context, msg: "block count mismatch".into() });
    }
    for v in weights.iter().chain(source) {
        if v.len() != n {
            return Err(Error::GridMismatch { expected: n, got: v.len() });
        }
    }
    let b = flatten(source);
    let x0 = guess.map(flatten).unwrap_or_else(|| vec![0.0; b.len()]);
    let op = |g: &[f64]| apply_op(conv, weights, g);
    let (x, iterations) = match opts.method {
        Method::Gmres { restart } => gmres(&op, &b, x0, opts.tol, restart, opts.max_iter, context)?,
        Method::Damped { alpha } => damped(&op, &b, x0, alpha, opts.tol, opts.max_iter, context)?,
        Method::Dense => (dense(&op, &b, context)?, 1),
    };
    let r: Vec<f64> = op(&x).iter().zip(&b).map(|(a, c)| a - c).collect();
    let residual = sup(&r);
    if !(residual < opts.tol) {
        return Err(Error::NoConvergence { context, iters: iterations, residual });
    }
    Ok(Solution { g: unflatten(&x, n), residual, iterations })
}

fn damped<F: Fn(&[f64]) -> Vec<f64>>(
    op: &F,
    b: &[f64],
    mut x: Vec<f64>,
    alpha: f64,
    tol: f64,
    max_iter: usize,
    context: &'static str,
) -> Result<(Vec<f64>, usize)> {
    let mut res = f64::INFINITY;
    for it in 0..max_iter {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        res = sup(&r);
        if res < tol {
            return Ok((x, it));
        }
        if !res.is_finite() {
            break;
        }
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += alpha * ri;
        }
    }
    Err(Error::NoConvergence { context, iters: max_iter, residual: res })
}

fn dense<F: Fn(&[f64]) -> Vec<f64>>(op: &F, b: &[f64], context: &'static str) -> Result<Vec<f64>> {
    let m = b.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut e = vec![0.0; m];
    for j in 0..m {
        e[j] = 1.0;
        let col = op(&e);
        e[j] = 0.0;
        a.set_column(j, &DVector::from_vec(col));
    }
    a.lu()
        .solve(&DVector::from_column_slice(b))
        .map(|v| v.as_slice().to_vec())
        .ok_or(Error::NoConvergence { context, iters: 1, residual: f64::INFINITY })
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
/// Stops once the 2-norm residual falls below `tol`, which bounds the
/// sup-norm as well.
pub fn gmres<F: Fn(&[f64]) -> Vec<f64>>(
    op: &F,
    b: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    restart: usize,
    max_iter: usize,
    context: &'static str,
) -> Result<(Vec<f64>, usize)> {
    let m = restart.max(1);
    let target = 0.25 * tol;
    let mut total = 0;
    let mut res = f64::INFINITY;
    while total < max_iter {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        res = beta;
        if beta < target {
            return Ok((x, total));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|q| q / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut s = vec![0.0; m + 1];
        s[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            let mut w = op(&v[k]);
            for (i, vi) in v.iter().enumerate() {
                let hik: f64 = w.iter().zip(vi).map(|(a, c)| a * c).sum();
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            s[k + 1] = -sn[k] * s[k];
            s[k] *= cs[k];
            k_used = k + 1;
            res = s[k + 1].abs();
            if res < target || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|q| q / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = s[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
        if !res.is_finite() {
            break;
        }
    }
    let ax = op(&x);
    let final_res = norm2(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>());
    if final_res < tol {
        return Ok((x, total));
    }
    Err(Error::NoConvergence { context, iters: total, residual: final_res.min(res) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{a_n_gapped_re, Grid};

    #[test]
    fn methods_agree() {
        let grid = Grid::periodic_midpoint(32).unwrap();
        let conv = BlockConvolver::new(&grid, 2, |j, k, l| a_n_gapped_re(j + k + 1, l, 0.9));
        let w: Vec<Vec<f64>> = (0..2).map(|j| grid.nodes.iter().map(|x| 0.3 + 0.1 * j as f64 + 0.1 * x.cos()).collect()).collect();
        let s: Vec<Vec<f64>> = (0..2).map(|j| grid.nodes.iter().map(|x| a_n_gapped_re(j + 1, x - 0.2, 0.9)).collect()).collect();
        let mk = |method| SolveOptions { tol: 1e-12, max_iter: 5000, method };
        let a = solve_dressing(&conv, &w, &s, None, &mk(Method::Gmres { restart: 20 }), "t").unwrap();
        let b = solve_dressing(&conv, &w, &s, None, &mk(Method::Dense), "t").unwrap();
        let c = solve_dressing(&conv, &w, &s, None, &mk(Method::Damped { alpha: 0.5 }), "t").unwrap();
        for ((x, y), z) in a.g.iter().flatten().zip(b.g.iter().flatten()).zip(c.g.iter().flatten()) {
            assert!((x - y).abs() < 1e-10 && (x - z).abs() < 1e-10);
        }
    }
}
