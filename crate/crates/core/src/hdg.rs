//! Element matrices of the coupled state/adjoint HDG system.
//!
//! Per element the unknowns are ordered
//! `[q_1 (x, y), y, q_2 (x, y), p | traces]`, each flux component and scalar
//! block holding `dim P^k` nodal coefficients, and traces ordered
//! `l * 2(k+1) + 2 j + field` over local edges `l`. With `s = beta^{1/2}`,
//! field `f` carries the advection sign `sigma_f = +1` (state) or `-1`
//! (adjoint) and stabilizer `tau_f`, and its rows are
//!
//! ```text
//! r:  -s (q, r) + s (u, div r) - s <lambda, r.n>
//! w:   s (div q, w) - s (u, sigma zeta.grad w) + s <tau u, w>
//!        + s <(sigma zeta.n - tau) lambda, w>  -+ (u_other, w)
//! mu: -s <q.n, mu> - s <tau u, mu> - s <(sigma zeta.n - tau) lambda, mu>
//! ```
//!
//! where the zero-order coupling is `-(p, w_1)` in the state row and
//! `+(y, w_2)` in the adjoint row.

use nalgebra::{DMatrix, DVector};

use crate::experiments::manufactured;
use crate::fespace::{EdgeBasis, FeConfig, Quadrature, TriangleBasis};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Divergence-free advection field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Velocity {
    Uniform([f64; 2]),
    /// `zeta(x) = (x_2, -x_1)`.
    Rotation,
}

impl Velocity {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Velocity::Uniform(z) => z,
            Velocity::Rotation => [x[1], -x[0]],
        }
    }

    /// Constant Jacobian `d zeta_i / d x_j`.
    pub fn jacobian(&self) -> [[f64; 2]; 2] {
        match self {
            Velocity::Uniform(_) => [[0.0; 2]; 2],
            Velocity::Rotation => [[0.0, 1.0], [-1.0, 0.0]],
        }
    }

    pub fn divergence(&self) -> f64 {
        let j = self.jacobian();
        j[0][0] + j[1][1]
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Velocity::Uniform([a, b]) if *a == 0.0 && *b == 0.0)
    }
}

/// Right-hand sides `(f, g)` of the state and adjoint equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Zero,
    Constant { f: f64, g: f64 },
    /// Loads generated by the manufactured exact solution.
    Manufactured,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig {
    pub beta: f64,
    pub velocity: Velocity,
    pub source: Source,
}

impl ProblemConfig {
    pub fn new(beta: f64, velocity: Velocity, source: Source) -> Self {
        Self { beta, velocity, source }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive and finite, got {}", self.beta)));
        }
        if self.velocity.divergence() != 0.0 {
            return Err(Error::Config("velocity field must be divergence-free".into()));
        }
        Ok(())
    }

    pub fn sqrt_beta(&self) -> f64 {
        self.beta.sqrt()
    }

    pub fn rhs(&self, x: [f64; 2]) -> (f64, f64) {
        match self.source {
            Source::Zero => (0.0, 0.0),
            Source::Constant { f, g } => (f, g),
            Source::Manufactured => manufactured::rhs(x, self.beta, &self.velocity),
        }
    }
}

/// Stabilization parameters: `tau_1` constant per element edge,
/// `tau_2 = tau_1 - zeta.n` pointwise.
#[derive(Debug, Clone)]
pub struct Stabilizers {
    tau1: Vec<[f64; 3]>,
}

impl Stabilizers {
    /// Wraps per-element-edge `tau_1` values after checking
    /// `tau_1 - zeta.n / 2 > 0` at both endpoints of every element edge.
    pub fn from_tau1(mesh: &Mesh, velocity: &Velocity, tau1: Vec<[f64; 3]>) -> Result<Self> {
        if tau1.len() != mesh.triangles.len() {
            return Err(Error::Config("one tau_1 triple per element is required".into()));
        }
        for (t, taus) in tau1.iter().enumerate() {
            for l in 0..3 {
                let (lo, hi) = edge_flux_range(mesh, velocity, t, l);
                let value = taus[l] - 0.5 * hi.max(lo);
                if value.is_nan() || value <= 0.0 {
                    return Err(Error::Stabilizer { element: t, edge: l, value });
                }
            }
        }
        Ok(Self { tau1 })
    }

    pub fn tau1(&self, t: usize, l: usize) -> f64 {
        self.tau1[t][l]
    }

    /// `tau_2` at a point where the outward flux is `zeta_n`.
    pub fn tau2(&self, t: usize, l: usize, zeta_n: f64) -> f64 {
        self.tau1[t][l] - zeta_n
    }

    /// Stabilizer of `field` at a point with outward flux `zeta_n`.
    pub fn tau(&self, field: usize, t: usize, l: usize, zeta_n: f64) -> f64 {
        if field == 0 {
            self.tau1(t, l)
        } else {
            self.tau2(t, l, zeta_n)
        }
    }
}

/// Endpoint values `(zeta.n(a), zeta.n(b))` on local edge `l` of `t`; exact
/// bounds for affine `zeta`.
fn edge_flux_range(mesh: &Mesh, velocity: &Velocity, t: usize, l: usize) -> (f64, f64) {
    let e = mesh.triangles[t].edges[l];
    let n = mesh.outward_normal(t, e);
    let [a, b] = mesh.edges[e].vertices.map(|v| velocity.eval(mesh.vertices[v]));
    (a[0] * n[0] + a[1] * n[1], b[0] * n[0] + b[1] * n[1])
}

/// `tau_1 = max(sup_E zeta.n, 0) + 1` per element edge, `tau_2 = tau_1 - zeta.n`.
pub fn stabilizers_for(mesh: &Mesh, velocity: &Velocity) -> Result<Stabilizers> {
    let tau1 = (0..mesh.triangles.len())
        .map(|t| {
            [0, 1, 2].map(|l| {
                let (a, b) = edge_flux_range(mesh, velocity, t, l);
                a.max(b).max(0.0) + 1.0
            })
        })
        .collect();
    Stabilizers::from_tau1(mesh, velocity, tau1)
}

/// Index layout of the element-local system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalLayout {
    pub degree: usize,
    /// `dim P^k` on the triangle.
    pub np: usize,
}

impl LocalLayout {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            np: (degree + 1) * (degree + 2) / 2,
        }
    }

    /// Interior unknowns `(q, u)` of both fields.
    pub fn nx(&self) -> usize {
        6 * self.np
    }

    /// Trace unknowns on the three element edges, both fields.
    pub fn nt(&self) -> usize {
        6 * (self.degree + 1)
    }

    pub fn size(&self) -> usize {
        self.nx() + self.nt()
    }

    pub fn q(&self, field: usize, comp: usize, i: usize) -> usize {
        3 * self.np * field + comp * self.np + i
    }

    pub fn u(&self, field: usize, i: usize) -> usize {
        3 * self.np * field + 2 * self.np + i
    }

    /// Position within the trace block.
    pub fn trace(&self, l: usize, j: usize, field: usize) -> usize {
        l * 2 * (self.degree + 1) + 2 * j + field
    }

    /// Local indices of field `f` in `(q, u, lambda)` order.
    pub fn field_indices(&self, field: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..3 * self.np).map(|i| 3 * self.np * field + i).collect();
        for l in 0..3 {
            for j in 0..=self.degree {
                out.push(self.nx() + self.trace(l, j, field));
            }
        }
        out
    }
}

/// Dense element matrix of the coupled system.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    pub layout: LocalLayout,
    /// `[[M, C], [D, E]]` with `M` on interior and `E` on trace unknowns.
    pub matrix: DMatrix<f64>,
}

impl LocalBlocks {
    /// Interior block `[[A_GG, A_uG^T], [A_uG, A_uu]]` of both fields.
    pub fn interior(&self) -> DMatrix<f64> {
        let nx = self.layout.nx();
        self.matrix.view((0, 0), (nx, nx)).into_owned()
    }

    /// Interior rows, trace columns.
    pub fn interior_trace(&self) -> DMatrix<f64> {
        let (nx, nt) = (self.layout.nx(), self.layout.nt());
        self.matrix.view((0, nx), (nx, nt)).into_owned()
    }

    /// Trace rows, interior columns.
    pub fn trace_interior(&self) -> DMatrix<f64> {
        let (nx, nt) = (self.layout.nx(), self.layout.nt());
        self.matrix.view((nx, 0), (nt, nx)).into_owned()
    }

    /// Trace block `A_lambda_lambda`.
    pub fn trace(&self) -> DMatrix<f64> {
        let (nx, nt) = (self.layout.nx(), self.layout.nt());
        self.matrix.view((nx, nx), (nt, nt)).into_owned()
    }

    /// Block of field rows `rf`, field columns `cf`, each in
    /// `(q, u, lambda)` order: the `(rf, cf)` block of the 2x2 outer structure.
    pub fn field_block(&self, rf: usize, cf: usize) -> DMatrix<f64> {
        let rows = self.layout.field_indices(rf);
        let cols = self.layout.field_indices(cf);
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.matrix[(rows[r], cols[c])])
    }
}

/// Affine map from the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub origin: [f64; 2],
    /// Columns `v1 - v0`, `v2 - v0`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// `J^{-1}`.
    pub inv: [[f64; 2]; 2],
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let [a, b, c] = mesh.triangles[t].vertices.map(|v| mesh.vertices[v]);
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self {
            origin: a,
            jac,
            det,
            inv,
        }
    }

    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient `J^{-T} g`.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }
}

/// A point on an element edge with everything the edge integrals need.
#[derive(Debug, Clone)]
pub struct EdgePoint {
    pub x: [f64; 2],
    /// Physical weight (`|e|` included).
    pub weight: f64,
    pub normal: [f64; 2],
    /// Element basis values.
    pub phi: Vec<f64>,
    /// Edge basis values in the global edge orientation.
    pub psi: Vec<f64>,
}

/// Reusable per-degree assembly data.
#[derive(Debug, Clone)]
pub struct LocalAssembler {
    pub fe: FeConfig,
    pub layout: LocalLayout,
    pub quad: Quadrature,
    pub tri_basis: TriangleBasis,
    pub edge_basis: EdgeBasis,
    tri_values: Vec<Vec<f64>>,
    tri_grads: Vec<Vec<[f64; 2]>>,
    fine_values: Vec<Vec<f64>>,
}

impl LocalAssembler {
    pub fn new(fe: FeConfig) -> Self {
        let k = fe.degree;
        let quad = Quadrature::for_degree(k);
        let tri_basis = TriangleBasis::new(k);
        let np = tri_basis.dim();
        let mut tri_values = Vec::with_capacity(quad.triangle.len());
        let mut tri_grads = Vec::with_capacity(quad.triangle.len());
        for &p in &quad.triangle.points {
            let mut v = vec![0.0; np];
            let mut g = vec![[0.0; 2]; np];
            tri_basis.eval(p, &mut v);
            tri_basis.eval_grad(p, &mut g);
            tri_values.push(v);
            tri_grads.push(g);
        }
        let fine_values = quad
            .fine_triangle
            .points
            .iter()
            .map(|&p| {
                let mut v = vec![0.0; np];
                tri_basis.eval(p, &mut v);
                v
            })
            .collect();
        Self {
            fe,
            layout: LocalLayout::new(k),
            quad,
            tri_basis,
            edge_basis: EdgeBasis::new(k),
            tri_values,
            tri_grads,
            fine_values,
        }
    }

    /// Quadrature points on local edge `l` of element `t`.
    pub fn edge_points(&self, mesh: &Mesh, geo: &ElementGeometry, t: usize, l: usize) -> Vec<EdgePoint> {
        let e = mesh.triangles[t].edges[l];
        let [a, b] = mesh.edges[e].vertices.map(|v| mesh.vertices[v]);
        let len = mesh.edge_length(e);
        let normal = mesh.outward_normal(t, e);
        let np = self.layout.np;
        self.quad
            .edge
            .points
            .iter()
            .zip(&self.quad.edge.weights)
            .map(|(p, w)| {
                let x = [a[0] + p[0] * (b[0] - a[0]), a[1] + p[0] * (b[1] - a[1])];
                let mut phi = vec![0.0; np];
                self.tri_basis.eval(geo.to_reference(x), &mut phi);
                let mut psi = vec![0.0; self.edge_basis.dim()];
                self.edge_basis.eval(p[0], &mut psi);
                EdgePoint {
                    x,
                    weight: w * len,
                    normal,
                    phi,
                    psi,
                }
            })
            .collect()
    }

    /// Element matrix of element `t`.
    pub fn assemble_local(&self, mesh: &Mesh, t: usize, prob: &ProblemConfig, stab: &Stabilizers) -> LocalBlocks {
        let lay = self.layout;
        let np = lay.np;
        let nk = self.fe.degree + 1;
        let nx = lay.nx();
        let s = prob.sqrt_beta();
        let geo = ElementGeometry::new(mesh, t);
        let mut a = DMatrix::<f64>::zeros(lay.size(), lay.size());
        let mut grads = vec![[0.0; 2]; np];

        for (qp, (p, wq)) in self.quad.triangle.points.iter().zip(&self.quad.triangle.weights).enumerate() {
            let w = wq * geo.det;
            let phi = &self.tri_values[qp];
            for (g, rg) in grads.iter_mut().zip(&self.tri_grads[qp]) {
                *g = geo.grad(*rg);
            }
            let zeta = prob.velocity.eval(geo.to_physical(*p));
            for i in 0..np {
                let zg = zeta[0] * grads[i][0] + zeta[1] * grads[i][1];
                for j in 0..np {
                    let mass = w * phi[i] * phi[j];
                    for f in 0..2 {
                        let sigma = if f == 0 { 1.0 } else { -1.0 };
                        for c in 0..2 {
                            a[(lay.q(f, c, i), lay.q(f, c, j))] -= s * mass;
                            a[(lay.q(f, c, i), lay.u(f, j))] += s * w * phi[j] * grads[i][c];
                            a[(lay.u(f, i), lay.q(f, c, j))] += s * w * grads[j][c] * phi[i];
                        }
                        a[(lay.u(f, i), lay.u(f, j))] -= s * sigma * w * phi[j] * zg;
                    }
                    a[(lay.u(0, i), lay.u(1, j))] -= mass;
                    a[(lay.u(1, i), lay.u(0, j))] += mass;
                }
            }
        }

        for l in 0..3 {
            for ep in self.edge_points(mesh, &geo, t, l) {
                let zeta = prob.velocity.eval(ep.x);
                let zn = zeta[0] * ep.normal[0] + zeta[1] * ep.normal[1];
                let w = ep.weight;
                for f in 0..2 {
                    let sigma = if f == 0 { 1.0 } else { -1.0 };
                    let tau = stab.tau(f, t, l, zn);
                    let coef = sigma * zn - tau;
                    for i in 0..np {
                        for j in 0..np {
                            a[(lay.u(f, i), lay.u(f, j))] += s * tau * w * ep.phi[i] * ep.phi[j];
                        }
                        for j in 0..nk {
                            let col = nx + lay.trace(l, j, f);
                            for c in 0..2 {
                                a[(lay.q(f, c, i), col)] -= s * w * ep.psi[j] * ep.phi[i] * ep.normal[c];
                                a[(col, lay.q(f, c, i))] -= s * w * ep.phi[i] * ep.normal[c] * ep.psi[j];
                            }
                            a[(lay.u(f, i), col)] += s * w * coef * ep.psi[j] * ep.phi[i];
                            a[(col, lay.u(f, i))] -= s * w * tau * ep.phi[i] * ep.psi[j];
                        }
                    }
                    for i in 0..nk {
                        for j in 0..nk {
                            a[(nx + lay.trace(l, i, f), nx + lay.trace(l, j, f))] -= s * w * coef * ep.psi[j] * ep.psi[i];
                        }
                    }
                }
            }
        }
        LocalBlocks { layout: lay, matrix: a }
    }

    /// Local load `(0, (f, w_1), (g, w_2), 0)` over the full element layout.
    pub fn assemble_load(&self, mesh: &Mesh, t: usize, prob: &ProblemConfig) -> DVector<f64> {
        let lay = self.layout;
        let mut out = DVector::zeros(lay.size());
        if prob.source == Source::Zero {
            return out;
        }
        let geo = ElementGeometry::new(mesh, t);
        for (qp, (p, wq)) in self
            .quad
            .fine_triangle
            .points
            .iter()
            .zip(&self.quad.fine_triangle.weights)
            .enumerate()
        {
            let w = wq * geo.det;
            let (f, g) = prob.rhs(geo.to_physical(*p));
            for (i, phi) in self.fine_values[qp].iter().enumerate() {
                out[lay.u(0, i)] += w * f * phi;
                out[lay.u(1, i)] += w * g * phi;
            }
        }
        out
    }

    /// Reference-triangle mass matrix of the scalar basis.
    pub fn reference_mass(&self) -> DMatrix<f64> {
        let np = self.layout.np;
        let mut m = DMatrix::zeros(np, np);
        for (v, w) in self.tri_values.iter().zip(&self.quad.triangle.weights) {
            for i in 0..np {
                for j in 0..np {
                    m[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        m
    }

    /// Values of the scalar basis at the fine rule's points.
    pub fn fine_values(&self) -> &[Vec<f64>] {
        &self.fine_values
    }
}

/// Element matrix of element `t` (builds a fresh [`LocalAssembler`]).
pub fn assemble_local(mesh: &Mesh, t: usize, fe: FeConfig, prob: &ProblemConfig, stab: &Stabilizers) -> LocalBlocks {
    LocalAssembler::new(fe).assemble_local(mesh, t, prob, stab)
}

/// Element load of element `t` (builds a fresh [`LocalAssembler`]).
pub fn assemble_load(mesh: &Mesh, t: usize, fe: FeConfig, prob: &ProblemConfig) -> DVector<f64> {
    LocalAssembler::new(fe).assemble_load(mesh, t, prob)
}
