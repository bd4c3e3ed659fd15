//! Subdomain interface operators.
//!
//! Subdomain `i` owns the trace dofs on its interior edges (`I`) and sees the
//! dofs on its interface edges (`Gamma`). Its local matrix `A^(i)` is
//! assembled from its own elements plus a Robin term on its interface edges,
//! `+1/2 s <zeta.n_i lambda, mu>` on state traces and `-1/2 s <zeta.n_i lambda, mu>`
//! on adjoint traces with `n_i` the subdomain's outward normal. The Robin
//! terms make the symmetric part of every local Schur complement positive
//! and cancel in the assembled interface operator.

use rayon::prelude::*;

use crate::condensation::TraceSystem;
use crate::fespace::{EdgeBasis, Quadrature, TraceSpace};
use crate::hdg::ProblemConfig;
use crate::linalg::{CsrMatrix, SparseLu, TripletBuilder};
use crate::mesh::{EdgeClass, Mesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchurOptions {
    /// Add the Robin interface terms to the local matrices.
    pub robin: bool,
}

impl Default for SchurOptions {
    fn default() -> Self {
        Self { robin: true }
    }
}

/// Local problem of one subdomain, ordered `[I, Gamma]`.
#[derive(Debug)]
pub struct SubdomainOperator {
    pub id: usize,
    /// Global trace dofs of the local `I` block.
    pub interior: Vec<usize>,
    /// Interface indices of the local `Gamma` block (restriction `R^(i)`).
    pub gamma: Vec<usize>,
    pub a_ii: SparseLu,
    pub a_ig: CsrMatrix,
    pub a_gi: CsrMatrix,
    /// Includes the Robin term.
    pub a_gg: CsrMatrix,
    /// The Robin term alone, on `Gamma x Gamma`.
    pub robin: CsrMatrix,
    /// The full local matrix `A^(i)` including the Robin term.
    pub local: CsrMatrix,
}

impl SubdomainOperator {
    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn num_gamma(&self) -> usize {
        self.gamma.len()
    }

    /// `A_II^{-1} x`.
    pub fn solve_interior(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        self.a_ii.solve(x)
    }
}

/// Elements of each subdomain in ascending order.
pub fn elements_by_subdomain(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); mesh.num_subdomains()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        out[tri.subdomain].push(t);
    }
    out
}

/// Robin correction of subdomain `sd` as triplets over its local `Gamma`
/// positions.
fn robin_terms(
    mesh: &Mesh,
    space: &TraceSpace,
    prob: &ProblemConfig,
    sd: usize,
    gamma_pos: impl Fn(usize) -> usize,
) -> Vec<(usize, usize, f64)> {
    let k = space.degree;
    let rule = Quadrature::for_degree(k).edge;
    let basis = EdgeBasis::new(k);
    let s = prob.sqrt_beta();
    let mut psi = vec![0.0; k + 1];
    let mut out = Vec::new();
    for side in &mesh.subdomain_boundaries[sd] {
        for &e in side {
            let edge = &mesh.edges[e];
            if edge.class != EdgeClass::Interface {
                continue;
            }
            let t = *edge
                .triangles
                .iter()
                .find(|&&t| mesh.triangles[t].subdomain == sd)
                .expect("interface edge touches the subdomain");
            let n = mesh.outward_normal(t, e);
            let [a, b] = edge.vertices.map(|v| mesh.vertices[v]);
            let len = mesh.edge_length(e);
            let mut block = vec![vec![0.0; k + 1]; k + 1];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let x = [a[0] + p[0] * (b[0] - a[0]), a[1] + p[0] * (b[1] - a[1])];
                let z = prob.velocity.eval(x);
                let zn = z[0] * n[0] + z[1] * n[1];
                basis.eval(p[0], &mut psi);
                for i in 0..=k {
                    for j in 0..=k {
                        block[i][j] += 0.5 * s * w * len * zn * psi[i] * psi[j];
                    }
                }
            }
            for field in 0..2 {
                let sign = if field == 0 { 1.0 } else { -1.0 };
                for i in 0..=k {
                    let gi = gamma_pos(space.dof(e, i, field).unwrap());
                    for j in 0..=k {
                        let gj = gamma_pos(space.dof(e, j, field).unwrap());
                        out.push((gi, gj, sign * block[i][j]));
                    }
                }
            }
        }
    }
    out
}

/// Builds and factors the local problems of all subdomains.
pub fn build_subdomain_ops(
    mesh: &Mesh,
    space: &TraceSpace,
    sys: &TraceSystem,
    prob: &ProblemConfig,
    opts: SchurOptions,
) -> Result<Vec<SubdomainOperator>> {
    let by_sd = elements_by_subdomain(mesh);
    (0..mesh.num_subdomains())
        .into_par_iter()
        .map(|sd| {
            let dofs = &space.subdomains[sd];
            let n_i = dofs.interior.len();
            let n_g = dofs.gamma.len();
            let gamma_pos = |d: usize| {
                let g = space.gamma_index[d].expect("dof on the interface");
                dofs.gamma.binary_search(&g).expect("interface dof of this subdomain")
            };
            let local_of = |d: usize| match space.gamma_index[d] {
                Some(_) => n_i + gamma_pos(d),
                None => dofs.interior.binary_search(&d).expect("interior dof of this subdomain"),
            };
            let mut trip = TripletBuilder::new(n_i + n_g, n_i + n_g);
            for &t in &by_sd[sd] {
                let el = &sys.elements[t];
                let local: Vec<Option<usize>> = el.dofs.iter().map(|d| d.map(local_of)).collect();
                for (r, lr) in local.iter().enumerate() {
                    let Some(lr) = *lr else { continue };
                    for (c, lc) in local.iter().enumerate() {
                        if let Some(lc) = *lc {
                            trip.add(lr, lc, el.a_k[(r, c)]);
                        }
                    }
                }
            }
            let mut robin = TripletBuilder::new(n_g, n_g);
            if opts.robin {
                for (r, c, v) in robin_terms(mesh, space, prob, sd, gamma_pos) {
                    trip.add(n_i + r, n_i + c, v);
                    robin.add(r, c, v);
                }
            }
            let local = trip.build();
            let rows_i: Vec<usize> = (0..n_i).collect();
            let rows_g: Vec<usize> = (n_i..n_i + n_g).collect();
            let cols_i: Vec<Option<usize>> = (0..n_i + n_g).map(|c| (c < n_i).then_some(c)).collect();
            let cols_g: Vec<Option<usize>> = (0..n_i + n_g).map(|c| c.checked_sub(n_i)).collect();
            let a_ii = local.extract(&rows_i, &cols_i, n_i);
            let a_ii = SparseLu::factor(&a_ii, &format!("interior block of subdomain {sd}"))
                .map_err(|e| e.in_stage("subdomain factorization"))?;
            Ok(SubdomainOperator {
                id: sd,
                interior: dofs.interior.clone(),
                gamma: dofs.gamma.clone(),
                a_ii,
                a_ig: local.extract(&rows_i, &cols_g, n_g),
                a_gi: local.extract(&rows_g, &cols_i, n_i),
                a_gg: local.extract(&rows_g, &cols_g, n_g),
                robin: robin.build(),
                local,
            })
        })
        .collect()
}

/// `S^(i) v = A_GG v - A_GI A_II^{-1} A_IG v` over the subdomain's `Gamma`.
pub fn apply_local_schur(op: &SubdomainOperator, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; op.num_gamma()];
    op.a_gg.mul_vec(v, &mut out);
    if op.num_interior() > 0 {
        let mut t = vec![0.0; op.num_interior()];
        op.a_ig.mul_vec(v, &mut t);
        let t = op.solve_interior(&t);
        op.a_gi.mul_vec_add(-1.0, &t, &mut out);
    }
    out
}

/// Transposed local Schur complement `S^(i)^T v`.
pub fn apply_local_schur_transpose(op: &SubdomainOperator, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; op.num_gamma()];
    op.a_gg.mul_transpose_vec(v, &mut out);
    if op.num_interior() > 0 {
        let mut t = vec![0.0; op.num_interior()];
        op.a_gi.mul_transpose_vec(v, &mut t);
        let t = op.a_ii.solve_transpose(&t);
        let mut corr = vec![0.0; op.num_gamma()];
        op.a_ig.mul_transpose_vec(&t, &mut corr);
        out.iter_mut().zip(&corr).for_each(|(o, c)| *o -= c);
    }
    out
}

/// Sums per-subdomain `Gamma` vectors into a global interface vector in
/// subdomain order.
pub fn assemble_interface(ops: &[SubdomainOperator], parts: &[Vec<f64>], n_gamma: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_gamma];
    for (op, part) in ops.iter().zip(parts) {
        for (&g, v) in op.gamma.iter().zip(part) {
            out[g] += v;
        }
    }
    out
}

/// Assembled interface operator `S_hat = sum_i R^(i)^T S^(i) R^(i)`.
pub fn apply_interface(ops: &[SubdomainOperator], v: &[f64]) -> Vec<f64> {
    let parts: Vec<Vec<f64>> = ops
        .par_iter()
        .map(|op| {
            let local: Vec<f64> = op.gamma.iter().map(|&g| v[g]).collect();
            apply_local_schur(op, &local)
        })
        .collect();
    assemble_interface(ops, &parts, v.len())
}

/// `g_Gamma = b_Gamma - sum_i R^(i)^T A_GI A_II^{-1} b_I^(i)`.
pub fn interface_rhs(ops: &[SubdomainOperator], space: &TraceSpace, b: &[f64]) -> Vec<f64> {
    let parts: Vec<Vec<f64>> = ops
        .par_iter()
        .map(|op| {
            let mut out = vec![0.0; op.num_gamma()];
            if op.num_interior() > 0 {
                let b_i: Vec<f64> = op.interior.iter().map(|&d| b[d]).collect();
                let t = op.solve_interior(&b_i);
                op.a_gi.mul_vec_add(-1.0, &t, &mut out);
            }
            out
        })
        .collect();
    let mut g = assemble_interface(ops, &parts, space.num_gamma());
    for (gi, &d) in g.iter_mut().zip(&space.gamma_dofs) {
        *gi += b[d];
    }
    g
}

/// Full trace vector from interface values: `lambda_I = A_II^{-1}(b_I - A_IG lambda_Gamma)`
/// per subdomain.
pub fn backsolve_interior(ops: &[SubdomainOperator], space: &TraceSpace, lambda_gamma: &[f64], b: &[f64]) -> Vec<f64> {
    let parts: Vec<Vec<f64>> = ops
        .par_iter()
        .map(|op| {
            if op.num_interior() == 0 {
                return Vec::new();
            }
            let mut rhs: Vec<f64> = op.interior.iter().map(|&d| b[d]).collect();
            let local: Vec<f64> = op.gamma.iter().map(|&g| lambda_gamma[g]).collect();
            op.a_ig.mul_vec_add(-1.0, &local, &mut rhs);
            op.solve_interior(&rhs)
        })
        .collect();
    let mut lambda = vec![0.0; space.num_dofs];
    for (g, &d) in space.gamma_dofs.iter().enumerate() {
        lambda[d] = lambda_gamma[g];
    }
    for (op, part) in ops.iter().zip(&parts) {
        for (&d, v) in op.interior.iter().zip(part) {
            lambda[d] = *v;
        }
    }
    lambda
}

/// Dense local Schur complement, built column by column.
pub fn dense_local_schur(op: &SubdomainOperator) -> nalgebra::DMatrix<f64> {
    let n = op.num_gamma();
    let mut s = nalgebra::DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply_local_schur(op, &e);
        e[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            s[(i, j)] = *v;
        }
    }
    s
}

/// Checks that every subdomain has trace unknowns to work with.
pub fn validate_ops(ops: &[SubdomainOperator]) -> Result<()> {
    if let Some(op) = ops.iter().find(|op| op.num_interior() + op.num_gamma() == 0) {
        return Err(Error::Config(format!("subdomain {} has no trace unknowns", op.id)));
    }
    Ok(())
}
