//! BDDC preconditioner for the interface problem.
//!
//! Primal constraints are edge functionals on each macro-edge, imposed on the
//! state and adjoint traces independently: the plain average, the
//! flux-weighted average `int zeta.n lambda` and the flux-weighted first
//! moment `int zeta.n lambda s`, with `n` the master side's normal and `s` the
//! arc-length parameter in `[-1, 1]`. Constraints are enforced on each
//! subdomain through a bordered system
//!
//! ```text
//! K_i = [ A^(i)  C_i^T ]
//!       [ C_i    0     ]
//! ```
//!
//! which yields the constrained local solves, the coarse basis `Phi_i`, its
//! adjoint counterpart `Psi_i` (from `K_i^T`) and the coarse matrix
//! `sum_i R_ci^T Psi_i^T S^(i) Phi_i R_ci`. Residuals are weighted by inverse
//! counting on both sides of the solve.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::fespace::{EdgeBasis, Quadrature, TraceSpace};
use crate::hdg::Velocity;
use crate::linalg::{SparseLu, TripletBuilder};
use crate::mesh::Mesh;
use crate::schur::SubdomainOperator;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Average,
    FluxAverage,
    FluxMoment,
    /// A single interface dof (all-primal mode).
    Dof,
}

/// Enabled edge constraint families; the plain average is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimalFlags {
    pub flux_average: bool,
    pub flux_moment: bool,
}

impl PrimalFlags {
    pub const ALL: PrimalFlags = PrimalFlags {
        flux_average: true,
        flux_moment: true,
    };

    pub const AVERAGE: PrimalFlags = PrimalFlags {
        flux_average: false,
        flux_moment: false,
    };

    /// Parses `avg`, `avg+flux` or `avg+flux+moment`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(Self::AVERAGE),
            "avg+flux" => Ok(Self {
                flux_average: true,
                flux_moment: false,
            }),
            "avg+flux+moment" => Ok(Self::ALL),
            other => Err(Error::Config(format!(
                "unknown primal set '{other}', expected avg, avg+flux or avg+flux+moment"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.flux_average, self.flux_moment) {
            (false, false) => "avg",
            (true, false) => "avg+flux",
            (true, true) => "avg+flux+moment",
            (false, true) => "avg+moment",
        }
    }

    fn kinds(&self) -> Vec<ConstraintKind> {
        let mut out = vec![ConstraintKind::Average];
        if self.flux_average {
            out.push(ConstraintKind::FluxAverage);
        }
        if self.flux_moment {
            out.push(ConstraintKind::FluxMoment);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalSelection {
    Edges(PrimalFlags),
    /// Every interface dof is primal; the preconditioner is then the exact
    /// inverse of the assembled interface operator.
    AllInterfaceDofs,
}

/// One primal functional as a row over interface indices.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    /// Owning macro-edge.
    pub macro_edge: usize,
    pub field: usize,
    pub kind: ConstraintKind,
    pub gamma: Vec<usize>,
    pub coeffs: Vec<f64>,
}

/// Retained primal functionals; the position of a row is its coarse index.
#[derive(Debug, Clone, Default)]
pub struct PrimalConstraintSet {
    pub rows: Vec<ConstraintRow>,
}

impl PrimalConstraintSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, macro_edge: usize, field: usize) -> usize {
        self.rows
            .iter()
            .filter(|r| r.macro_edge == macro_edge && r.field == field)
            .count()
    }
}

/// Interface indices of `field` on macro-edge `me`, in edge then basis order.
pub fn macro_edge_field_dofs(space: &TraceSpace, me: usize, field: usize) -> Vec<usize> {
    space.macro_edge_gamma[me]
        .iter()
        .copied()
        .filter(|&g| space.gamma_dofs[g] % 2 == field)
        .collect()
}

/// Coefficients of an edge functional over the dofs returned by
/// [`macro_edge_field_dofs`], with the flux weight taken against
/// `normal_sign * master_normal`.
pub fn edge_functional(
    mesh: &Mesh,
    space: &TraceSpace,
    velocity: &Velocity,
    me: usize,
    kind: ConstraintKind,
    normal_sign: f64,
) -> Vec<f64> {
    let k = space.degree;
    let medge = &mesh.macro_edges[me];
    let rule = Quadrature::for_degree(k).edge;
    let basis = EdgeBasis::new(k);
    let n = medge.master_normal.map(|c| normal_sign * c);
    let mut psi = vec![0.0; k + 1];
    let mut out = Vec::with_capacity(medge.edges.len() * (k + 1));
    for &e in &medge.edges {
        let [a, b] = mesh.edges[e].vertices.map(|v| mesh.vertices[v]);
        let len = mesh.edge_length(e);
        let mut row = vec![0.0; k + 1];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = [a[0] + p[0] * (b[0] - a[0]), a[1] + p[0] * (b[1] - a[1])];
            let z = velocity.eval(x);
            let weight = match kind {
                ConstraintKind::Average => 1.0,
                ConstraintKind::FluxAverage => z[0] * n[0] + z[1] * n[1],
                ConstraintKind::FluxMoment => (z[0] * n[0] + z[1] * n[1]) * medge.parameter(x),
                ConstraintKind::Dof => unreachable!("dof constraints are unit rows"),
            };
            basis.eval(p[0], &mut psi);
            for (r, v) in row.iter_mut().zip(&psi) {
                *r += w * len * weight * v;
            }
        }
        out.extend(row);
    }
    out
}

/// Builds the primal functionals and drops dependent ones.
///
/// Candidates are taken in the order average, flux average, flux moment. A
/// row is dropped when its norm is at most `1e-12` times the macro-edge
/// length, or when its Gram-Schmidt residual against the retained rows is at
/// most `1e-10` of its norm.
pub fn select_primal(mesh: &Mesh, space: &TraceSpace, velocity: &Velocity, selection: PrimalSelection) -> PrimalConstraintSet {
    let mut rows = Vec::new();
    match selection {
        PrimalSelection::AllInterfaceDofs => {
            for (me, dofs) in space.macro_edge_gamma.iter().enumerate() {
                for &g in dofs {
                    rows.push(ConstraintRow {
                        macro_edge: me,
                        field: space.gamma_dofs[g] % 2,
                        kind: ConstraintKind::Dof,
                        gamma: vec![g],
                        coeffs: vec![1.0],
                    });
                }
            }
        }
        PrimalSelection::Edges(flags) => {
            for me in 0..mesh.macro_edges.len() {
                let length = mesh.macro_edges[me].length();
                for field in 0..2 {
                    let gamma = macro_edge_field_dofs(space, me, field);
                    let mut basis: Vec<Vec<f64>> = Vec::new();
                    for kind in flags.kinds() {
                        let coeffs = edge_functional(mesh, space, velocity, me, kind, 1.0);
                        let norm = crate::linalg::norm2(&coeffs);
                        if norm <= 1e-12 * length {
                            continue;
                        }
                        let mut resid = coeffs.clone();
                        for q in &basis {
                            let proj = crate::linalg::dot(&resid, q);
                            crate::linalg::axpy(-proj, q, &mut resid);
                        }
                        let rn = crate::linalg::norm2(&resid);
                        if rn <= 1e-10 * norm {
                            continue;
                        }
                        basis.push(resid.iter().map(|v| v / rn).collect());
                        rows.push(ConstraintRow {
                            macro_edge: me,
                            field,
                            kind,
                            gamma: gamma.clone(),
                            coeffs,
                        });
                    }
                }
            }
        }
    }
    PrimalConstraintSet { rows }
}

/// Per-subdomain data of the preconditioner.
#[derive(Debug)]
pub struct LocalBddc {
    pub id: usize,
    /// Interface indices of the local `Gamma` block.
    pub gamma: Vec<usize>,
    pub n_interior: usize,
    /// Coarse index of each local constraint.
    pub coarse_ids: Vec<usize>,
    /// Local constraint matrix over the local `Gamma` block.
    pub constraints: DMatrix<f64>,
    /// Inverse-counting weights on the local `Gamma` block.
    pub scaling: Vec<f64>,
    bordered: SparseLu,
    /// `Gamma` part of the coarse basis, one column per local constraint.
    pub phi: DMatrix<f64>,
    /// `Gamma` part of the adjoint coarse basis.
    pub psi: DMatrix<f64>,
    /// Multiplier block of the coarse basis solves.
    pub multipliers: DMatrix<f64>,
}

impl LocalBddc {
    fn n_gamma(&self) -> usize {
        self.gamma.len()
    }

    /// `Gamma` part of the constrained solve `K_i^{-1} [0; r; 0]`.
    pub fn constrained_solve(&self, r: &[f64]) -> Vec<f64> {
        let (ni, ng) = (self.n_interior, self.n_gamma());
        let mut rhs = vec![0.0; ni + ng + self.coarse_ids.len()];
        rhs[ni..ni + ng].copy_from_slice(r);
        self.bordered.solve_in_place(&mut rhs);
        rhs[ni..ni + ng].to_vec()
    }
}

#[derive(Debug)]
pub struct BddcPreconditioner {
    pub n_gamma: usize,
    pub primal: PrimalConstraintSet,
    pub locals: Vec<LocalBddc>,
    coarse: Option<SparseLu>,
}

fn build_local(op: &SubdomainOperator, primal: &PrimalConstraintSet, multiplicity: &[usize]) -> Result<LocalBddc> {
    let ni = op.num_interior();
    let ng = op.num_gamma();
    let pos = |g: usize| op.gamma.binary_search(&g).ok();
    let mut coarse_ids = Vec::new();
    let mut local_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for (c, row) in primal.rows.iter().enumerate() {
        let entries: Option<Vec<(usize, f64)>> = row.gamma.iter().zip(&row.coeffs).map(|(&g, &v)| pos(g).map(|p| (p, v))).collect();
        if let Some(entries) = entries {
            coarse_ids.push(c);
            local_rows.push(entries);
        }
    }
    let nc = coarse_ids.len();
    let mut constraints = DMatrix::zeros(nc, ng);
    let mut trip = TripletBuilder::new(ni + ng + nc, ni + ng + nc);
    for r in 0..ni + ng {
        for (c, v) in op.local.row(r) {
            trip.add(r, c, v);
        }
    }
    for (j, entries) in local_rows.iter().enumerate() {
        for &(p, v) in entries {
            constraints[(j, p)] = v;
            trip.add(ni + ng + j, ni + p, v);
            trip.add(ni + p, ni + ng + j, v);
        }
    }
    let bordered = SparseLu::factor(&trip.build(), &format!("constrained problem of subdomain {}", op.id))?;

    let mut phi = DMatrix::zeros(ng, nc);
    let mut psi = DMatrix::zeros(ng, nc);
    let mut multipliers = DMatrix::zeros(nc, nc);
    for j in 0..nc {
        let mut rhs = vec![0.0; ni + ng + nc];
        rhs[ni + ng + j] = 1.0;
        let x = bordered.solve(&rhs);
        let y = bordered.solve_transpose(&rhs);
        for p in 0..ng {
            phi[(p, j)] = x[ni + p];
            psi[(p, j)] = y[ni + p];
        }
        for i in 0..nc {
            multipliers[(i, j)] = x[ni + ng + i];
        }
    }
    Ok(LocalBddc {
        id: op.id,
        gamma: op.gamma.clone(),
        n_interior: ni,
        coarse_ids,
        constraints,
        scaling: op.gamma.iter().map(|&g| 1.0 / multiplicity[g] as f64).collect(),
        bordered,
        phi,
        psi,
        multipliers,
    })
}

/// Factors the constrained subdomain problems and the coarse problem.
pub fn build_preconditioner(
    ops: &[SubdomainOperator],
    primal: PrimalConstraintSet,
    space: &TraceSpace,
) -> Result<BddcPreconditioner> {
    let multiplicity = space.gamma_multiplicity();
    let locals = ops
        .par_iter()
        .filter(|op| op.num_gamma() > 0)
        .map(|op| build_local(op, &primal, &multiplicity))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("constrained subdomain factorization"))?;
    let nc = primal.len();
    let coarse = if nc == 0 {
        None
    } else {
        let mut trip = TripletBuilder::new(nc, nc);
        for loc in &locals {
            for (i, &ci) in loc.coarse_ids.iter().enumerate() {
                for (j, &cj) in loc.coarse_ids.iter().enumerate() {
                    trip.add(ci, cj, -loc.multipliers[(i, j)]);
                }
            }
        }
        let kc = trip.build();
        let lu = SparseLu::factor(&kc, "coarse matrix").map_err(|e| match e {
            Error::Singular { row, .. } => Error::Config(format!(
                "coarse matrix is singular at row {row}; the primal constraints are dependent"
            )),
            other => other,
        })?;
        Some(lu)
    };
    Ok(BddcPreconditioner {
        n_gamma: space.num_gamma(),
        primal,
        locals,
        coarse,
    })
}

impl BddcPreconditioner {
    pub fn num_coarse(&self) -> usize {
        self.primal.len()
    }

    /// Solves the partially assembled problem for per-subdomain residual
    /// functionals `r_i` and returns the per-subdomain solutions `w_i`.
    pub fn solve_partially_assembled(&self, r: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (z, gc): (Vec<Vec<f64>>, Vec<DVector<f64>>) = self
            .locals
            .par_iter()
            .zip(r)
            .map(|(loc, ri)| {
                let z = loc.constrained_solve(ri);
                let gc = loc.psi.tr_mul(&DVector::from_column_slice(ri));
                (z, gc)
            })
            .unzip();
        let Some(coarse) = &self.coarse else {
            return z;
        };
        let mut g = vec![0.0; self.num_coarse()];
        for (loc, gi) in self.locals.iter().zip(&gc) {
            for (&c, v) in loc.coarse_ids.iter().zip(gi.iter()) {
                g[c] += v;
            }
        }
        let uc = coarse.solve(&g);
        self.locals
            .par_iter()
            .zip(z)
            .map(|(loc, mut zi)| {
                let ul = DVector::from_iterator(loc.coarse_ids.len(), loc.coarse_ids.iter().map(|&c| uc[c]));
                let corr = &loc.phi * ul;
                zi.iter_mut().zip(corr.iter()).for_each(|(a, b)| *a += b);
                zi
            })
            .collect()
    }

    /// Scaled restriction `D_i R_i r` for every subdomain.
    pub fn restrict_scaled(&self, r: &[f64]) -> Vec<Vec<f64>> {
        self.locals
            .iter()
            .map(|loc| loc.gamma.iter().zip(&loc.scaling).map(|(&g, d)| d * r[g]).collect())
            .collect()
    }

    /// `sum_i R_i^T D_i w_i`, summed in subdomain order.
    pub fn extend_scaled(&self, w: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_gamma];
        for (loc, wi) in self.locals.iter().zip(w) {
            for ((&g, d), v) in loc.gamma.iter().zip(&loc.scaling).zip(wi) {
                out[g] += d * v;
            }
        }
        out
    }

    /// Applies the preconditioner to an interface residual.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let w = self.solve_partially_assembled(&self.restrict_scaled(r));
        self.extend_scaled(&w)
    }
}

/// `z = R_D^T S_tilde^{-1} R_D r`.
pub fn apply_preconditioner(pre: &BddcPreconditioner, r: &[f64]) -> Vec<f64> {
    pre.apply(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condensation::condense;
    use crate::fespace::{build_trace_space, FeConfig};
    use crate::hdg::{stabilizers_for, ProblemConfig, Source};
    use crate::linalg::rel_diff;
    use crate::mesh::{build_structured_mesh, MeshConfig, Orientation};
    use crate::schur::{apply_interface, build_subdomain_ops, SchurOptions};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn setup(n: usize, m: usize, k: usize, vel: Velocity) -> (Mesh, TraceSpace, Vec<SubdomainOperator>) {
        let mesh = build_structured_mesh(MeshConfig::new(n, m)).unwrap();
        let fe = FeConfig::new(k);
        let space = build_trace_space(&mesh, fe).unwrap();
        let stab = stabilizers_for(&mesh, &vel).unwrap();
        let prob = ProblemConfig::new(1.0, vel, Source::Zero);
        let sys = condense(&mesh, &space, fe, &prob, &stab).unwrap();
        let ops = build_subdomain_ops(&mesh, &space, &sys, &prob, SchurOptions::default()).unwrap();
        (mesh, space, ops)
    }

    fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn parses_flags() {
        assert_eq!(PrimalFlags::parse("avg").unwrap(), PrimalFlags::AVERAGE);
        assert_eq!(PrimalFlags::parse("avg+flux+moment").unwrap(), PrimalFlags::ALL);
        assert!(PrimalFlags::parse("moment").is_err());
        assert_eq!(PrimalFlags::parse("avg+flux").unwrap().label(), "avg+flux");
    }

    #[test]
    fn single_edge_average_row() {
        let mesh = build_structured_mesh(MeshConfig::new(2, 1)).unwrap();
        let space = build_trace_space(&mesh, FeConfig::new(1)).unwrap();
        let row = edge_functional(&mesh, &space, &Velocity::Rotation, 0, ConstraintKind::Average, 1.0);
        let h = mesh.element_size();
        assert_eq!(row.len(), 2);
        assert!((row[0] - h / 2.0).abs() < 1e-15 && (row[1] - h / 2.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_flow_constraints() {
        let (mesh, space, _) = setup(3, 3, 1, Velocity::Uniform([1.0, 0.0]));
        let vel = Velocity::Uniform([1.0, 0.0]);
        let primal = select_primal(&mesh, &space, &vel, PrimalSelection::Edges(PrimalFlags::ALL));
        for (me, medge) in mesh.macro_edges.iter().enumerate() {
            for field in 0..2 {
                let kinds: Vec<ConstraintKind> = primal
                    .rows
                    .iter()
                    .filter(|r| r.macro_edge == me && r.field == field)
                    .map(|r| r.kind)
                    .collect();
                match medge.orientation {
                    Orientation::Horizontal => assert_eq!(kinds, vec![ConstraintKind::Average]),
                    // the flux average equals the average here and is dropped as dependent
                    Orientation::Vertical => assert_eq!(kinds, vec![ConstraintKind::Average, ConstraintKind::FluxMoment]),
                }
            }
            if medge.orientation == Orientation::Vertical {
                let avg = edge_functional(&mesh, &space, &vel, me, ConstraintKind::Average, 1.0);
                let flux = edge_functional(&mesh, &space, &vel, me, ConstraintKind::FluxAverage, 1.0);
                assert!(rel_diff(&flux, &avg) < 1e-15);
            }
        }
    }

    #[test]
    fn rotation_keeps_three_constraints() {
        let (mesh, space, _) = setup(3, 3, 1, Velocity::Rotation);
        let primal = select_primal(&mesh, &space, &Velocity::Rotation, PrimalSelection::Edges(PrimalFlags::ALL));
        for me in 0..mesh.macro_edges.len() {
            assert!(primal.count(me, 0) >= 2);
            assert_eq!(primal.count(me, 0), primal.count(me, 1));
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn flux_rows_flip_sign_across_sides(n in 2usize..4, m in 1usize..3, rot in proptest::bool::ANY) {
            let vel = if rot { Velocity::Rotation } else { Velocity::Uniform([1.0, 0.0]) };
            let mesh = build_structured_mesh(MeshConfig::new(n, m)).unwrap();
            let space = build_trace_space(&mesh, FeConfig::new(1)).unwrap();
            for me in 0..mesh.macro_edges.len() {
                for kind in [ConstraintKind::Average, ConstraintKind::FluxAverage, ConstraintKind::FluxMoment] {
                    let master = edge_functional(&mesh, &space, &vel, me, kind, 1.0);
                    let other = edge_functional(&mesh, &space, &vel, me, kind, -1.0);
                    let factor = if kind == ConstraintKind::Average { 1.0 } else { -1.0 };
                    for (a, b) in master.iter().zip(&other) {
                        proptest::prop_assert!((a - factor * b).abs() <= 1e-15 * (1.0 + a.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let (mesh, space, ops) = setup(3, 2, 1, Velocity::Rotation);
        let primal = select_primal(&mesh, &space, &Velocity::Rotation, PrimalSelection::Edges(PrimalFlags::ALL));
        let pre = build_preconditioner(&ops, primal, &space).unwrap();
        let mut sum = vec![0.0; space.num_gamma()];
        for loc in &pre.locals {
            for (&g, d) in loc.gamma.iter().zip(&loc.scaling) {
                sum[g] += d;
            }
        }
        assert!(sum.iter().all(|&s| s == 1.0));
        // R_D^T R = I on interface vectors
        let mut rng = StdRng::seed_from_u64(7);
        let v = random_vec(&mut rng, space.num_gamma());
        let parts: Vec<Vec<f64>> = pre.locals.iter().map(|l| l.gamma.iter().map(|&g| v[g]).collect()).collect();
        assert_eq!(pre.extend_scaled(&parts), v);
    }

    #[test]
    fn all_primal_is_exact_inverse() {
        for vel in [Velocity::Uniform([1.0, 0.0]), Velocity::Rotation] {
            let (mesh, space, ops) = setup(2, 2, 1, vel);
            let primal = select_primal(&mesh, &space, &vel, PrimalSelection::AllInterfaceDofs);
            let pre = build_preconditioner(&ops, primal, &space).unwrap();
            let mut rng = StdRng::seed_from_u64(8);
            for _ in 0..10 {
                let v = random_vec(&mut rng, space.num_gamma());
                let pv = apply_preconditioner(&pre, &apply_interface(&ops, &v));
                assert!(rel_diff(&pv, &v) < 1e-10);
            }
        }
    }

    #[test]
    fn single_subdomain_is_trivial() {
        let (mesh, space, ops) = setup(1, 3, 1, Velocity::Rotation);
        let primal = select_primal(&mesh, &space, &Velocity::Rotation, PrimalSelection::Edges(PrimalFlags::ALL));
        assert!(primal.is_empty());
        let pre = build_preconditioner(&ops, primal, &space).unwrap();
        assert!(pre.locals.is_empty());
        assert!(pre.apply(&[]).is_empty());
    }

    #[test]
    fn linear_and_zero_preserving() {
        let (mesh, space, ops) = setup(3, 2, 2, Velocity::Rotation);
        let primal = select_primal(&mesh, &space, &Velocity::Rotation, PrimalSelection::Edges(PrimalFlags::ALL));
        let pre = build_preconditioner(&ops, primal, &space).unwrap();
        let n = space.num_gamma();
        assert!(pre.apply(&vec![0.0; n]).iter().all(|&v| v == 0.0));
        let mut rng = StdRng::seed_from_u64(9);
        let (x, y) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let comb: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * a + 4.0 * b).collect();
        let lhs = pre.apply(&comb);
        let (px, py) = (pre.apply(&x), pre.apply(&y));
        let rhs: Vec<f64> = px.iter().zip(&py).map(|(a, b)| 0.5 * a + 4.0 * b).collect();
        assert!(rel_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn matches_dense_partially_assembled_oracle() {
        for (vel, k) in [(Velocity::Rotation, 1), (Velocity::Uniform([1.0, 0.0]), 2)] {
            let (mesh, space, ops) = setup(2, 2, k, vel);
            let primal = select_primal(&mesh, &space, &vel, PrimalSelection::Edges(PrimalFlags::ALL));
            let pre = build_preconditioner(&ops, primal, &space).unwrap();
            let offsets: Vec<usize> = pre
                .locals
                .iter()
                .scan(0, |acc, l| {
                    let o = *acc;
                    *acc += l.gamma.len();
                    Some(o)
                })
                .collect();
            let total: usize = pre.locals.iter().map(|l| l.gamma.len()).sum();
            // jump rows C_i w_i - C_j w_j for every coarse index shared by i < j
            let mut owners: Vec<Vec<(usize, usize)>> = vec![Vec::new(); pre.num_coarse()];
            for (s, loc) in pre.locals.iter().enumerate() {
                for (r, &c) in loc.coarse_ids.iter().enumerate() {
                    owners[c].push((s, r));
                }
            }
            let mut jumps = Vec::new();
            for own in &owners {
                let (si, ri) = own[0];
                for &(sj, rj) in &own[1..] {
                    let mut row = vec![0.0; total];
                    for p in 0..pre.locals[si].gamma.len() {
                        row[offsets[si] + p] += pre.locals[si].constraints[(ri, p)];
                    }
                    for p in 0..pre.locals[sj].gamma.len() {
                        row[offsets[sj] + p] -= pre.locals[sj].constraints[(rj, p)];
                    }
                    jumps.push(row);
                }
            }
            let g = DMatrix::from_fn(jumps.len(), total, |i, j| jumps[i][j]);
            let eig = (g.transpose() * &g).symmetric_eigen();
            let cols: Vec<usize> = (0..total).filter(|&i| eig.eigenvalues[i].abs() < 1e-12).collect();
            assert_eq!(cols.len(), total - jumps.len());
            let t = DMatrix::from_fn(total, cols.len(), |i, j| eig.eigenvectors[(i, cols[j])]);
            let mut s = DMatrix::zeros(total, total);
            for (loc, op) in pre.locals.iter().zip(&ops) {
                let o = offsets[pre.locals.iter().position(|l| l.id == loc.id).unwrap()];
                let sl = crate::schur::dense_local_schur(op);
                s.view_mut((o, o), (sl.nrows(), sl.ncols())).copy_from(&sl);
            }
            let mut rng = StdRng::seed_from_u64(11);
            let r = random_vec(&mut rng, space.num_gamma());
            let parts = pre.restrict_scaled(&r);
            let flat = DVector::from_iterator(total, parts.iter().flatten().copied());
            let reduced = t.transpose() * &s * &t;
            let y = reduced.lu().solve(&(t.transpose() * flat)).unwrap();
            let expect = &t * y;
            let got: Vec<f64> = pre.solve_partially_assembled(&parts).into_iter().flatten().collect();
            assert!(rel_diff(&got, expect.as_slice()) < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn primal_values_agree_across_sides() {
        let (mesh, space, ops) = setup(3, 2, 1, Velocity::Rotation);
        let primal = select_primal(&mesh, &space, &Velocity::Rotation, PrimalSelection::Edges(PrimalFlags::ALL));
        let pre = build_preconditioner(&ops, primal, &space).unwrap();
        let mut rng = StdRng::seed_from_u64(10);
        let r = random_vec(&mut rng, space.num_gamma());
        let w = pre.solve_partially_assembled(&pre.restrict_scaled(&r));
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); pre.num_coarse()];
        for (loc, wi) in pre.locals.iter().zip(&w) {
            let cw = &loc.constraints * DVector::from_column_slice(wi);
            for (&c, v) in loc.coarse_ids.iter().zip(cw.iter()) {
                values[c].push(*v);
            }
        }
        for v in values {
            assert_eq!(v.len(), 2);
            assert!((v[0] - v[1]).abs() <= 1e-10 * v[0].abs().max(v[1].abs()).max(1e-14));
        }
    }
}
