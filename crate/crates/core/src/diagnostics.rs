//! Mesh-dependent trace norms and closed-form bound factors.
//!
//! Every generic constant in the factor formulas is taken as 1, so the values
//! are factors for qualitative comparison, not certified bounds.

use serde::Serialize;

use crate::fespace::{EdgeBasis, Quadrature, TraceSpace};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundFactors {
    pub beta: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    pub h: f64,
    pub c0: f64,
    pub gamma1: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c_ed: f64,
    pub c_edm: f64,
    pub cu_factor: f64,
    pub cl_factor: f64,
    /// `(1 + log(H/h))^2`, the upper factor for `beta = O(1)`.
    pub cu_simplified: f64,
    /// `1 - H (1 + log(H/h))^2`, the lower factor for `beta = O(1)`.
    pub cl_simplified: f64,
}

/// Evaluates the factor formulas for `beta, H, h > 0` with `H >= h`.
pub fn bound_factors(beta: f64, big_h: f64, h: f64) -> BoundFactors {
    let b12 = beta.powf(-0.5);
    let b14 = beta.powf(-0.25);
    let log = 1.0 + (big_h / h).ln();
    let c0 = h * b12 + 1.0;
    let gamma1 = (1.0 + beta.powf(0.25)) * c0;
    let c_ed = c0 * (1.0 + big_h * b12) * log;
    let c_edm = (1.0 + c0 * big_h * b14) * c_ed;
    let alpha1 = big_h * ((1.0 + b12) * c0 * c0 + b14);
    let alpha2 = big_h * ((1.0 + b12) * c0 * c0 + b14 * c_ed);
    let c1 = c0 * big_h * b14 * c_ed;
    let c2 = gamma1 * alpha2;
    let c3 = c0 * big_h * (1.0 + b12);
    let c4 = gamma1 * alpha1;
    BoundFactors {
        beta,
        big_h,
        h,
        c0,
        gamma1,
        alpha1,
        alpha2,
        c1,
        c2,
        c3,
        c4,
        c_ed,
        c_edm,
        cu_factor: c_edm * c_edm,
        cl_factor: 1.0 - c2 * c_edm - c3 * c_edm * c_edm,
        cu_simplified: log * log,
        cl_simplified: 1.0 - big_h * log * log,
    }
}

impl BoundFactors {
    /// `(1 - cl^2 / Cu^2)^{m/2}`; `None` unless `cl > 0`.
    pub fn predicted_rate(&self, m: usize) -> Option<f64> {
        if self.cl_factor <= 0.0 {
            return None;
        }
        let q = 1.0 - (self.cl_factor / self.cu_factor).powi(2);
        Some(q.max(0.0).powf(m as f64 / 2.0))
    }

    pub const CSV_HEADER: &'static str = "beta,H,h,c0,C_ED,C_EDM,Cu_factor,cl_factor";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.beta, self.big_h, self.h, self.c0, self.c_ed, self.c_edm, self.cu_factor, self.cl_factor
        )
    }
}

/// Region `D` of a trace norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Domain,
    Subdomain(usize),
}

impl Region {
    /// `|D| / |dD|`.
    fn ratio(self, mesh: &Mesh) -> f64 {
        match self {
            Region::Domain => 0.25,
            Region::Subdomain(_) => mesh.subdomain_size() / 4.0,
        }
    }

    fn triangles(self, mesh: &Mesh) -> Vec<usize> {
        match self {
            Region::Domain => (0..mesh.triangles.len()).collect(),
            Region::Subdomain(s) => mesh.subdomain_triangles(s),
        }
    }
}

/// `(int_{dK} lambda^2, int_{dK} lambda, |dK|)` for one field of `lambda`.
fn boundary_moments(mesh: &Mesh, space: &TraceSpace, t: usize, lambda: &[f64], field: usize) -> (f64, f64, f64) {
    let k = space.degree;
    let rule = Quadrature::for_degree(k).edge;
    let basis = EdgeBasis::new(k);
    let mut psi = vec![0.0; k + 1];
    let (mut sq, mut lin, mut perim) = (0.0, 0.0, 0.0);
    for &e in &mesh.triangles[t].edges {
        let len = mesh.edge_length(e);
        perim += len;
        let coeffs: Vec<f64> = (0..=k).map(|j| space.dof(e, j, field).map_or(0.0, |d| lambda[d])).collect();
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            basis.eval(p[0], &mut psi);
            let v: f64 = coeffs.iter().zip(&psi).map(|(c, b)| c * b).sum();
            sq += w * len * v * v;
            lin += w * len * v;
        }
    }
    (sq, lin, perim)
}

/// `||lambda||_{h,D}^2 = sum_K ||lambda||_{dK}^2 |D| / |dD|`, for one field.
pub fn h_norm(mesh: &Mesh, space: &TraceSpace, region: Region, lambda: &[f64], field: usize) -> f64 {
    let ratio = region.ratio(mesh);
    let sum: f64 = region
        .triangles(mesh)
        .into_iter()
        .map(|t| boundary_moments(mesh, space, t, lambda, field).0)
        .sum();
    (sum * ratio).sqrt()
}

/// `|||lambda|||_D^2 = sum_K ||lambda - m_K||_{dK}^2 (|D| / |dD|)^{-1}`, for one field.
pub fn triple_norm(mesh: &Mesh, space: &TraceSpace, region: Region, lambda: &[f64], field: usize) -> f64 {
    let ratio = region.ratio(mesh);
    let sum: f64 = region
        .triangles(mesh)
        .into_iter()
        .map(|t| {
            let (sq, lin, perim) = boundary_moments(mesh, space, t, lambda, field);
            (sq - lin * lin / perim).max(0.0)
        })
        .sum();
    (sum / ratio).sqrt()
}
