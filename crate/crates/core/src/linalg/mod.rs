//! Small linear-algebra toolkit: vector kernels, a CSR matrix, reverse
//! Cuthill-McKee ordering and a banded LU with partial pivoting used as the
//! sparse direct solver for subdomain and coarse problems.

mod banded;
mod csr;
mod rcm;

pub use banded::{BandedLu, SparseLu};
pub use csr::{CsrMatrix, TripletBuilder};
pub use rcm::reverse_cuthill_mckee;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Relative 2-norm difference `|a - b| / max(|b|, floor)`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / norm2(b).max(1e-14)
}
