//! Static condensation of the element unknowns onto the traces.
//!
//! Each element system reads `M X + C lambda_K = F`, `D X + E lambda_K = 0`
//! with `X` the interior `(q, u)` unknowns of both fields. Eliminating `X`
//! leaves `A_K = E - D M^{-1} C` and `b_K = -D M^{-1} F`, assembled into the
//! global trace system `A lambda = b`. The factors `M^{-1} C` and `M^{-1} F`
//! are cached for extension and recovery.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::fespace::{FeConfig, TraceSpace};
use crate::hdg::{ElementGeometry, LocalAssembler, LocalLayout, ProblemConfig, Stabilizers};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Condensed data of one element.
#[derive(Debug, Clone)]
pub struct ElementCache {
    /// Global trace dof of each local trace slot; `None` on Dirichlet edges.
    pub dofs: Vec<Option<usize>>,
    pub minv_c: DMatrix<f64>,
    pub minv_f: DVector<f64>,
    pub a_k: DMatrix<f64>,
    pub b_k: DVector<f64>,
}

impl ElementCache {
    /// Gathers the element's trace values from a global trace vector.
    pub fn gather(&self, lambda: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dofs.len(), self.dofs.iter().map(|d| d.map_or(0.0, |d| lambda[d])))
    }
}

/// The condensed operator `A` and load `b` over the trace dofs.
#[derive(Debug, Clone)]
pub struct TraceSystem {
    pub layout: LocalLayout,
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub elements: Vec<ElementCache>,
    /// Reference-triangle scalar mass matrix.
    pub reference_mass: DMatrix<f64>,
    /// `2 |K|` per element (the affine Jacobian determinant).
    pub jac_det: Vec<f64>,
}

impl TraceSystem {
    pub fn num_dofs(&self) -> usize {
        self.b.len()
    }
}

/// Assembles and condenses every element and builds `A lambda = b`.
pub fn condense(
    mesh: &Mesh,
    space: &TraceSpace,
    fe: FeConfig,
    prob: &ProblemConfig,
    stab: &Stabilizers,
) -> Result<TraceSystem> {
    prob.validate()?;
    fe.validate()?;
    let asm = LocalAssembler::new(fe);
    let nx = asm.layout.nx();
    let elements = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let blocks = asm.assemble_local(mesh, t, prob, stab);
            let load = asm.assemble_load(mesh, t, prob);
            let lu = blocks.interior().lu();
            if !lu.is_invertible() {
                return Err(Error::SingularElement { element: t });
            }
            let c = blocks.interior_trace();
            let d = blocks.trace_interior();
            let f = load.rows(0, nx).into_owned();
            let minv_c = lu.solve(&c).ok_or(Error::SingularElement { element: t })?;
            let minv_f = lu.solve(&f).ok_or(Error::SingularElement { element: t })?;
            let a_k = blocks.trace() - &d * &minv_c;
            let b_k = -(&d * &minv_f);
            if !a_k.iter().chain(b_k.iter()).all(|v| v.is_finite()) {
                return Err(Error::SingularElement { element: t });
            }
            Ok(ElementCache {
                dofs: space.element_dofs(mesh, t),
                minv_c,
                minv_f,
                a_k,
                b_k,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = space.num_dofs;
    let mut trip = TripletBuilder::new(n, n);
    let mut b = vec![0.0; n];
    for el in &elements {
        for (r, dr) in el.dofs.iter().enumerate() {
            let Some(dr) = *dr else { continue };
            b[dr] += el.b_k[r];
            for (c, dc) in el.dofs.iter().enumerate() {
                if let Some(dc) = *dc {
                    trip.add(dr, dc, el.a_k[(r, c)]);
                }
            }
        }
    }
    Ok(TraceSystem {
        layout: asm.layout,
        a: trip.build(),
        b,
        elements,
        reference_mass: asm.reference_mass(),
        jac_det: (0..mesh.triangles.len()).map(|t| ElementGeometry::new(mesh, t).det).collect(),
    })
}

/// Zero-load extension `(Q lambda, U lambda)` per element, as interior
/// coefficient vectors in the element layout.
pub fn extend(sys: &TraceSystem, lambda: &[f64]) -> Vec<DVector<f64>> {
    sys.elements.par_iter().map(|el| -(&el.minv_c * el.gather(lambda))).collect()
}

/// Interior unknowns `(q, u)` per element recovered from the traces and the
/// element loads.
pub fn recover_interior(sys: &TraceSystem, lambda: &[f64]) -> Vec<DVector<f64>> {
    sys.elements
        .par_iter()
        .map(|el| &el.minv_f - &el.minv_c * el.gather(lambda))
        .collect()
}

/// Symmetric and skew parts `B = (A + A^T) / 2`, `Z = (A - A^T) / 2`.
pub fn split_bz(sys: &TraceSystem) -> (CsrMatrix, CsrMatrix) {
    let at = sys.a.transpose();
    (sys.a.linear_combination(0.5, &at, 0.5), sys.a.linear_combination(0.5, &at, -0.5))
}

/// `<lambda, s>_L = (U_1 lambda, U_1 s) + (U_2 lambda, U_2 s)`.
pub fn l_form(sys: &TraceSystem, lambda: &[f64], s: &[f64]) -> f64 {
    let lay = sys.layout;
    let np = lay.np;
    let xl = extend(sys, lambda);
    let xs = extend(sys, s);
    xl.iter()
        .zip(&xs)
        .zip(&sys.jac_det)
        .map(|((a, b), det)| {
            (0..2)
                .map(|f| {
                    let ua = a.rows(lay.u(f, 0), np);
                    let ub = b.rows(lay.u(f, 0), np);
                    det * ua.dot(&(&sys.reference_mass * ub))
                })
                .sum::<f64>()
        })
        .sum()
}

/// `L^2(Omega)` errors of the scalar fields `(y, p)` against `exact`.
pub fn l2_errors(
    mesh: &Mesh,
    fe: FeConfig,
    interior: &[DVector<f64>],
    exact: impl Fn([f64; 2]) -> (f64, f64) + Sync,
) -> (f64, f64) {
    let asm = LocalAssembler::new(fe);
    let lay = asm.layout;
    let rule = &asm.quad.fine_triangle;
    let (ey, ep) = interior
        .par_iter()
        .enumerate()
        .map(|(t, x)| {
            let geo = ElementGeometry::new(mesh, t);
            let mut acc = (0.0, 0.0);
            for (qp, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let phi = &asm.fine_values()[qp];
                let (mut yh, mut ph) = (0.0, 0.0);
                for (i, v) in phi.iter().enumerate() {
                    yh += x[lay.u(0, i)] * v;
                    ph += x[lay.u(1, i)] * v;
                }
                let (y, pe) = exact(geo.to_physical(*p));
                acc.0 += w * geo.det * (yh - y).powi(2);
                acc.1 += w * geo.det * (ph - pe).powi(2);
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    (ey.sqrt(), ep.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::build_trace_space;
    use crate::hdg::{stabilizers_for, Source, Velocity};
    use crate::linalg::{dot, SparseLu};
    use crate::mesh::{build_structured_mesh, MeshConfig};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn setup(n: usize, m: usize, k: usize, beta: f64, vel: Velocity, source: Source) -> (Mesh, TraceSpace, TraceSystem) {
        let mesh = build_structured_mesh(MeshConfig::new(n, m)).unwrap();
        let space = build_trace_space(&mesh, FeConfig::new(k)).unwrap();
        let stab = stabilizers_for(&mesh, &vel).unwrap();
        let prob = ProblemConfig::new(beta, vel, source);
        let sys = condense(&mesh, &space, FeConfig::new(k), &prob, &stab).unwrap();
        (mesh, space, sys)
    }

    fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn single_edge_system_is_positive() {
        let (_, _, sys) = setup(1, 1, 1, 1.0, Velocity::Uniform([1.0, 0.0]), Source::Zero);
        assert_eq!(sys.num_dofs(), 4);
        let mut rng = StdRng::seed_from_u64(1);
        let mut y = vec![0.0; 4];
        for _ in 0..20 {
            let x = random_vec(&mut rng, 4);
            sys.a.mul_vec(&x, &mut y);
            assert!(dot(&x, &y) > 0.0);
        }
    }

    #[test]
    fn zero_sources_give_zero_load() {
        let (_, _, sys) = setup(2, 2, 1, 1.0, Velocity::Rotation, Source::Zero);
        assert!(sys.b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bz_split() {
        let (_, _, sys) = setup(2, 2, 2, 1e-4, Velocity::Rotation, Source::Zero);
        let (b, z) = split_bz(&sys);
        let (bd, zd, ad) = (b.to_dense(), z.to_dense(), sys.a.to_dense());
        assert!((&bd - bd.transpose()).amax() <= 1e-14 * bd.amax());
        assert!((&zd + zd.transpose()).amax() <= 1e-14 * bd.amax());
        assert!((&bd + &zd - &ad).amax() <= 1e-15 * ad.amax());
        let mut rng = StdRng::seed_from_u64(2);
        let mut out = vec![0.0; sys.num_dofs()];
        for _ in 0..10 {
            let x = random_vec(&mut rng, sys.num_dofs());
            z.mul_vec(&x, &mut out);
            assert!(dot(&x, &out).abs() <= 1e-12 * zd.amax() * dot(&x, &x));
        }
    }

    #[test]
    fn positive_definite_on_random_vectors() {
        for vel in [Velocity::Uniform([1.0, 0.0]), Velocity::Rotation] {
            for beta in [1.0, 1e-6] {
                let (_, _, sys) = setup(2, 2, 1, beta, vel, Source::Zero);
                let mut rng = StdRng::seed_from_u64(3);
                let mut y = vec![0.0; sys.num_dofs()];
                for _ in 0..100 {
                    let x = random_vec(&mut rng, sys.num_dofs());
                    sys.a.mul_vec(&x, &mut y);
                    assert!(dot(&x, &y) > 0.0);
                }
            }
        }
    }

    #[test]
    fn extension_of_zero_is_zero() {
        let (_, _, sys) = setup(2, 1, 1, 1.0, Velocity::Rotation, Source::Zero);
        let zero = vec![0.0; sys.num_dofs()];
        assert!(extend(&sys, &zero).iter().all(|x| x.amax() == 0.0));
        assert!(recover_interior(&sys, &zero).iter().all(|x| x.amax() == 0.0));
    }

    #[test]
    fn l_form_symmetric_and_nonnegative() {
        let (_, _, sys) = setup(2, 2, 1, 1e-2, Velocity::Rotation, Source::Zero);
        let mut rng = StdRng::seed_from_u64(4);
        let zero = vec![0.0; sys.num_dofs()];
        for _ in 0..5 {
            let a = random_vec(&mut rng, sys.num_dofs());
            let b = random_vec(&mut rng, sys.num_dofs());
            assert_eq!(l_form(&sys, &zero, &b), 0.0);
            let (ab, ba) = (l_form(&sys, &a, &b), l_form(&sys, &b, &a));
            assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1e-14));
            assert!(l_form(&sys, &a, &a) > 0.0);
        }
    }

    #[test]
    fn l2_error_rate_approaches_k_plus_one() {
        for k in [1, 2] {
            let mut errs = Vec::new();
            for m in [4, 8, 16] {
                let (mesh, _, sys) = setup(2, m, k, 1.0, Velocity::Uniform([1.0, 0.0]), Source::Manufactured);
                let lu = SparseLu::factor(&sys.a, "trace system").unwrap();
                let lambda = lu.solve(&sys.b);
                let x = recover_interior(&sys, &lambda);
                errs.push(l2_errors(&mesh, FeConfig::new(k), &x, crate::experiments::manufactured::exact_solution));
            }
            for w in errs.windows(2) {
                let rate_y = (w[0].0 / w[1].0).log2();
                let rate_p = (w[0].1 / w[1].1).log2();
                assert!(rate_y >= k as f64 + 0.8 && rate_p >= k as f64 + 0.8, "k={k} {errs:?}");
            }
        }
    }
}
