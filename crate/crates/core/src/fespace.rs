//! Polynomial bases, quadrature and trace-dof numbering.
//!
//! Element spaces use nodal Lagrange bases on equispaced nodes of the
//! reference triangle `(0,0), (1,0), (0,1)`; edge spaces use nodal Lagrange
//! bases on `t_j = j / k`, `t` running from the lower to the higher vertex
//! index. Trace unknowns are interleaved per edge basis function:
//! `dof = edge_offset + 2 j + field` with field 0 the state trace and field 1
//! the adjoint trace.

use nalgebra::DMatrix;

use crate::mesh::{EdgeClass, Mesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeConfig {
    pub degree: usize,
}

impl FeConfig {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::Config("polynomial degree must be at least 1".into()));
        }
        Ok(())
    }

    /// `dim P^k` on a triangle.
    pub fn element_dim(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    /// `dim P^k` on an edge.
    pub fn edge_dim(&self) -> usize {
        self.degree + 1
    }
}

/// Points and weights on a reference entity. Edge rules live on `[0, 1]`
/// with weights summing to 1; triangle rules on the reference triangle with
/// weights summing to 1/2.
#[derive(Debug, Clone)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
}

pub type EdgeRule = QuadratureRule<1>;
pub type TriangleRule = QuadratureRule<2>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp;
        loop {
            // P_n(z) by the three-term recurrence, P_n' from P_n and P_{n-1}
            let (mut p, mut p_prev) = (1.0, 0.0);
            for j in 1..=n {
                let next = ((2 * j - 1) as f64 * z * p - (j - 1) as f64 * p_prev) / j as f64;
                p_prev = p;
                p = next;
            }
            dp = n as f64 * (z * p - p_prev) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `n`-point Gauss-Legendre rule on `[0, 1]`; exact to degree `2n - 1`.
pub fn edge_rule(n: usize) -> EdgeRule {
    let (x, w) = gauss_legendre(n);
    QuadratureRule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0)]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
    }
}

/// Collapsed tensor Gauss rule with `n` points per direction; exact to
/// degree `2n - 2`.
pub fn triangle_rule(n: usize) -> TriangleRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (xi, wi) in x.iter().zip(&w) {
        let a = 0.5 * (xi + 1.0);
        for (eta, we) in x.iter().zip(&w) {
            let b = 0.5 * (eta + 1.0);
            points.push([a, b * (1.0 - a)]);
            weights.push(0.25 * wi * we * (1.0 - a));
        }
    }
    QuadratureRule { points, weights }
}

/// The rules used for assembly at degree `k`: triangle exactness `2k + 4`,
/// edge exactness `2k + 5`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub triangle: TriangleRule,
    pub edge: EdgeRule,
    /// High-order triangle rule for loads and error integrals.
    pub fine_triangle: TriangleRule,
}

impl Quadrature {
    pub fn for_degree(k: usize) -> Self {
        Self {
            triangle: triangle_rule(k + 3),
            edge: edge_rule(k + 3),
            fine_triangle: triangle_rule(10),
        }
    }
}

/// Exponents `(a, b)` of the monomials `x^a y^b`, `a + b <= k`, graded.
pub fn monomial_exponents(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((k + 1) * (k + 2) / 2);
    for d in 0..=k {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Equispaced nodes `(i/k, j/k)`, `i + j <= k`, row by row in `j`.
pub fn triangle_nodes(k: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity((k + 1) * (k + 2) / 2);
    for j in 0..=k {
        for i in 0..=(k - j) {
            out.push([i as f64 / k as f64, j as f64 / k as f64]);
        }
    }
    out
}

/// Nodal `P^k` basis on the reference triangle.
#[derive(Debug, Clone)]
pub struct TriangleBasis {
    exponents: Vec<(usize, usize)>,
    /// Column `i` holds the monomial coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
}

impl TriangleBasis {
    pub fn new(k: usize) -> Self {
        let exponents = monomial_exponents(k);
        let nodes = triangle_nodes(k);
        let n = exponents.len();
        let vander = DMatrix::from_fn(n, n, |r, c| {
            let (a, b) = exponents[c];
            nodes[r][0].powi(a as i32) * nodes[r][1].powi(b as i32)
        });
        let coeffs = vander.try_inverse().expect("equispaced Vandermonde is invertible");
        Self { exponents, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn eval(&self, p: [f64; 2], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let mono = p[0].powi(a as i32) * p[1].powi(b as i32);
            for (i, v) in out.iter_mut().enumerate() {
                *v += self.coeffs[(m, i)] * mono;
            }
        }
    }

    /// Reference gradients.
    pub fn eval_grad(&self, p: [f64; 2], out: &mut [[f64; 2]]) {
        out.iter_mut().for_each(|g| *g = [0.0; 2]);
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let dx = if a == 0 { 0.0 } else { a as f64 * p[0].powi(a as i32 - 1) * p[1].powi(b as i32) };
            let dy = if b == 0 { 0.0 } else { b as f64 * p[0].powi(a as i32) * p[1].powi(b as i32 - 1) };
            for (i, g) in out.iter_mut().enumerate() {
                g[0] += self.coeffs[(m, i)] * dx;
                g[1] += self.coeffs[(m, i)] * dy;
            }
        }
    }
}

/// Nodal `P^k` basis on `[0, 1]` with nodes `j / k`.
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    nodes: Vec<f64>,
}

impl EdgeBasis {
    pub fn new(k: usize) -> Self {
        Self {
            nodes: (0..=k).map(|j| j as f64 / k as f64).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for (j, v) in out.iter_mut().enumerate() {
            let mut prod = 1.0;
            for (l, &tl) in self.nodes.iter().enumerate() {
                if l != j {
                    prod *= (t - tl) / (self.nodes[j] - tl);
                }
            }
            *v = prod;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    Triangle,
    Edge,
}

/// Basis values (and reference gradients on triangles) at a set of points.
#[derive(Debug, Clone)]
pub struct BasisTable {
    /// `values[q][i]`.
    pub values: Vec<Vec<f64>>,
    /// `gradients[q][i]`; empty for edges.
    pub gradients: Vec<Vec<[f64; 2]>>,
}

/// Evaluates the `P^k` basis of `entity` at reference `points`; edge points
/// use only the first coordinate.
pub fn eval_basis(fe: FeConfig, entity: Entity, points: &[[f64; 2]]) -> BasisTable {
    match entity {
        Entity::Triangle => {
            let basis = TriangleBasis::new(fe.degree);
            let n = basis.dim();
            let mut values = Vec::with_capacity(points.len());
            let mut gradients = Vec::with_capacity(points.len());
            for &p in points {
                let mut v = vec![0.0; n];
                let mut g = vec![[0.0; 2]; n];
                basis.eval(p, &mut v);
                basis.eval_grad(p, &mut g);
                values.push(v);
                gradients.push(g);
            }
            BasisTable { values, gradients }
        }
        Entity::Edge => {
            let basis = EdgeBasis::new(fe.degree);
            let values = points
                .iter()
                .map(|p| {
                    let mut v = vec![0.0; basis.dim()];
                    basis.eval(p[0], &mut v);
                    v
                })
                .collect();
            BasisTable {
                values,
                gradients: Vec::new(),
            }
        }
    }
}

/// Trace dofs of one subdomain: its interior (`I`) dofs and its interface
/// (`Gamma`) dofs.
#[derive(Debug, Clone, Default)]
pub struct SubdomainDofs {
    /// Global trace dofs on subdomain-interior edges, ascending.
    pub interior: Vec<usize>,
    /// Interface indices (positions in the global `Gamma` numbering),
    /// ascending; this is the restriction `R_Gamma^(i)`.
    pub gamma: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TraceSpace {
    pub degree: usize,
    /// First dof of each edge; `None` on Dirichlet edges.
    pub edge_offset: Vec<Option<usize>>,
    pub num_dofs: usize,
    /// Global trace dof of each interface index, grouped by macro-edge.
    pub gamma_dofs: Vec<usize>,
    /// Interface index of each global dof, if on `Gamma`.
    pub gamma_index: Vec<Option<usize>>,
    /// Global dofs not on `Gamma`, ascending.
    pub interior_dofs: Vec<usize>,
    pub subdomains: Vec<SubdomainDofs>,
    /// Interface indices of each macro-edge, in edge then basis order.
    pub macro_edge_gamma: Vec<Vec<usize>>,
}

impl TraceSpace {
    pub fn dofs_per_edge(&self) -> usize {
        2 * (self.degree + 1)
    }

    pub fn num_gamma(&self) -> usize {
        self.gamma_dofs.len()
    }

    /// Global dof of basis `j`, field `f` on edge `e`.
    pub fn dof(&self, e: usize, j: usize, field: usize) -> Option<usize> {
        self.edge_offset[e].map(|o| o + 2 * j + field)
    }

    /// Element-local trace dof map, local index `l * 2(k+1) + 2 j + f` for
    /// local edge `l`.
    pub fn element_dofs(&self, mesh: &Mesh, t: usize) -> Vec<Option<usize>> {
        let per = self.dofs_per_edge();
        let mut out = Vec::with_capacity(3 * per);
        for &e in &mesh.triangles[t].edges {
            for r in 0..per {
                out.push(self.edge_offset[e].map(|o| o + r));
            }
        }
        out
    }

    /// Number of subdomains whose restriction selects each interface index.
    pub fn gamma_multiplicity(&self) -> Vec<usize> {
        let mut count = vec![0; self.num_gamma()];
        for sd in &self.subdomains {
            for &g in &sd.gamma {
                count[g] += 1;
            }
        }
        count
    }
}

/// Numbers the trace unknowns of `mesh` and splits them into `I` and `Gamma`.
pub fn build_trace_space(mesh: &Mesh, fe: FeConfig) -> Result<TraceSpace> {
    fe.validate()?;
    let per = 2 * (fe.degree + 1);
    let mut edge_offset = vec![None; mesh.edges.len()];
    let mut next = 0;
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.class != EdgeClass::Dirichlet {
            edge_offset[e] = Some(next);
            next += per;
        }
    }
    let num_dofs = next;

    let mut gamma_dofs = Vec::new();
    let mut gamma_index = vec![None; num_dofs];
    let mut macro_edge_gamma = Vec::with_capacity(mesh.macro_edges.len());
    for me in &mesh.macro_edges {
        let mut ids = Vec::with_capacity(me.edges.len() * per);
        for &e in &me.edges {
            let o = edge_offset[e].expect("interface edges carry dofs");
            for r in 0..per {
                gamma_index[o + r] = Some(gamma_dofs.len());
                ids.push(gamma_dofs.len());
                gamma_dofs.push(o + r);
            }
        }
        macro_edge_gamma.push(ids);
    }
    let interior_dofs: Vec<usize> = (0..num_dofs).filter(|&d| gamma_index[d].is_none()).collect();

    let mut subdomains = vec![SubdomainDofs::default(); mesh.num_subdomains()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        let Some(o) = edge_offset[e] else { continue };
        match edge.class {
            EdgeClass::Interior => {
                let s = mesh.triangles[edge.triangles[0]].subdomain;
                subdomains[s].interior.extend(o..o + per);
            }
            EdgeClass::Interface => {
                for &t in &edge.triangles {
                    let s = mesh.triangles[t].subdomain;
                    subdomains[s].gamma.extend((o..o + per).map(|d| gamma_index[d].unwrap()));
                }
            }
            EdgeClass::Dirichlet => {}
        }
    }
    for sd in &mut subdomains {
        sd.gamma.sort_unstable();
    }

    Ok(TraceSpace {
        degree: fe.degree,
        edge_offset,
        num_dofs,
        gamma_dofs,
        gamma_index,
        interior_dofs,
        subdomains,
        macro_edge_gamma,
    })
}
