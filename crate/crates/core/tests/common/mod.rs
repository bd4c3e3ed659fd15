//! Dense monolithic solve of the uncondensed element-plus-trace system.

#![allow(dead_code)]

use hdg_bddc::fespace::{FeConfig, TraceSpace};
use hdg_bddc::hdg::{assemble_load, assemble_local, LocalLayout, ProblemConfig, Stabilizers};
use hdg_bddc::mesh::Mesh;
use nalgebra::{DMatrix, DVector};

pub struct Monolithic {
    pub lambda: Vec<f64>,
    /// Interior `(q, u)` coefficients per element.
    pub interior: Vec<DVector<f64>>,
}

/// Assembles every element's full local matrix into one dense system with
/// unknowns `[X_1, ..., X_T, lambda]` and solves it by LU.
pub fn monolithic_solve(
    mesh: &Mesh,
    space: &TraceSpace,
    fe: FeConfig,
    prob: &ProblemConfig,
    stab: &Stabilizers,
) -> Monolithic {
    let lay = LocalLayout::new(fe.degree);
    let nx = lay.nx();
    let nt = mesh.triangles.len();
    let n = nt * nx + space.num_dofs;
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for t in 0..nt {
        let blocks = assemble_local(mesh, t, fe, prob, stab);
        let load = assemble_load(mesh, t, fe, prob);
        let traces = space.element_dofs(mesh, t);
        let map = |i: usize| -> Option<usize> {
            if i < nx {
                Some(t * nx + i)
            } else {
                traces[i - nx].map(|d| nt * nx + d)
            }
        };
        let size = blocks.matrix.nrows();
        for r in 0..size {
            let Some(gr) = map(r) else { continue };
            rhs[gr] += load[r];
            for c in 0..size {
                if let Some(gc) = map(c) {
                    a[(gr, gc)] += blocks.matrix[(r, c)];
                }
            }
        }
    }
    let x = a.lu().solve(&rhs).expect("monolithic system is nonsingular");
    Monolithic {
        lambda: x.rows(nt * nx, space.num_dofs).iter().copied().collect(),
        interior: (0..nt).map(|t| x.rows(t * nx, nx).into_owned()).collect(),
    }
}

/// Concatenated scalar `(y, p)` coefficients of every element.
pub fn scalar_fields(lay: LocalLayout, interior: &[DVector<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for x in interior {
        for f in 0..2 {
            out.extend(x.rows(lay.u(f, 0), lay.np).iter());
        }
    }
    out
}
