//! Left-preconditioned full GMRES.
//!
//! The Arnoldi basis is built with modified Gram-Schmidt followed by a
//! second orthogonalization pass; the least-squares problem is updated with
//! Givens rotations. Iteration stops once `||P(b - A x)|| <= tol ||P b||`,
//! using the residual estimate carried by the rotations.

use crate::linalg::{axpy, dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub tol: f64,
    /// Defaults to the system dimension.
    pub max_iters: Option<usize>,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { tol: 1e-11, max_iters: None }
    }
}

#[derive(Debug, Clone)]
pub struct GmresReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Preconditioned residual norms, starting with `||P b||`.
    pub history: Vec<f64>,
    /// `||b - A x|| / ||b||`, recomputed from the returned iterate.
    pub true_residual: f64,
    /// The Krylov space became invariant before reaching the tolerance test.
    pub breakdown: bool,
    /// `max |V^T V - I|` over the Arnoldi basis.
    pub orthogonality_loss: f64,
}

impl GmresReport {
    /// `||P r_0|| / ||P r_final||`.
    pub fn reduction(&self) -> f64 {
        match (self.history.first(), self.history.last()) {
            (Some(a), Some(b)) if *b > 0.0 => a / b,
            _ => f64::INFINITY,
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Solves `A x = b` from a zero initial guess.
pub fn gmres<A, P>(apply_a: A, apply_p: P, b: &[f64], cfg: &GmresConfig) -> GmresReport
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let max_iters = cfg.max_iters.unwrap_or(n);
    let pb = apply_p(b);
    let beta = norm2(&pb);
    let mut history = vec![beta];
    if beta == 0.0 {
        return GmresReport {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            history,
            true_residual: 0.0,
            breakdown: false,
            orthogonality_loss: 0.0,
        };
    }

    let mut v: Vec<Vec<f64>> = vec![pb.iter().map(|x| x / beta).collect()];
    // column j of the Hessenberg matrix, already rotated
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut rot: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut converged = false;
    let mut breakdown = false;

    for j in 0..max_iters {
        let mut w = apply_p(&apply_a(&v[j]));
        let w_norm = norm2(&w);
        let mut col = vec![0.0; j + 2];
        for _pass in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = dot(&w, vi);
                col[i] += c;
                axpy(-c, vi, &mut w);
            }
        }
        let hn = norm2(&w);
        col[j + 1] = hn;
        for (i, &(c, s)) in rot.iter().enumerate() {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = c * a + s * b;
            col[i + 1] = -s * a + c * b;
        }
        let (c, s) = givens(col[j], col[j + 1]);
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = 0.0;
        rot.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);
        let res = g[j + 1].abs();
        history.push(res);
        if res <= cfg.tol * beta {
            converged = true;
            break;
        }
        if hn <= 1e-14 * w_norm.max(f64::MIN_POSITIVE) {
            breakdown = true;
            break;
        }
        v.push(w.iter().map(|x| x / hn).collect());
    }

    let m = h.len();
    let mut y = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for jj in i + 1..m {
            s -= h[jj][i] * y[jj];
        }
        y[i] = s / h[i][i];
    }
    let mut x = vec![0.0; n];
    for (yi, vi) in y.iter().zip(&v) {
        axpy(*yi, vi, &mut x);
    }

    let ax = apply_a(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let bn = norm2(b);
    let true_residual = if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) };

    let mut orthogonality_loss = 0.0f64;
    for i in 0..v.len() {
        for k in i..v.len() {
            let target = if i == k { 1.0 } else { 0.0 };
            orthogonality_loss = orthogonality_loss.max((dot(&v[i], &v[k]) - target).abs());
        }
    }

    GmresReport {
        x,
        iterations: history.len() - 1,
        converged,
        history,
        true_residual,
        breakdown,
        orthogonality_loss,
    }
}
