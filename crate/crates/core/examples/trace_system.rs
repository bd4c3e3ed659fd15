//! Condenses the HDG system onto the traces and inspects the result: sizes,
//! the skew part induced by advection and a direct solve.

use hdg_bddc::condensation::{condense, l2_errors, recover_interior, split_bz};
use hdg_bddc::experiments::manufactured::exact_solution;
use hdg_bddc::fespace::{build_trace_space, FeConfig};
use hdg_bddc::hdg::{stabilizers_for, ProblemConfig, Source, Velocity};
use hdg_bddc::linalg::SparseLu;
use hdg_bddc::mesh::{build_structured_mesh, MeshConfig};

fn main() -> hdg_bddc::Result<()> {
    let mesh = build_structured_mesh(MeshConfig::new(2, 8))?;
    for velocity in [Velocity::Uniform([0.0, 0.0]), Velocity::Uniform([1.0, 0.0]), Velocity::Rotation] {
        for k in [1, 2] {
            let fe = FeConfig::new(k);
            let space = build_trace_space(&mesh, fe)?;
            let prob = ProblemConfig::new(1e-2, velocity, Source::Manufactured);
            let stab = stabilizers_for(&mesh, &velocity)?;
            let sys = condense(&mesh, &space, fe, &prob, &stab)?;
            let (b, z) = split_bz(&sys);
            let lambda = SparseLu::factor(&sys.a, "trace system")?.solve(&sys.b);
            let (ey, ep) = l2_errors(&mesh, fe, &recover_interior(&sys, &lambda), exact_solution);
            println!(
                "{velocity:?} k={k}: {} trace dofs, nnz {}, |B|max {:.3e}, |Z|max {:.3e}, L2 errors y {ey:.3e} p {ep:.3e}",
                sys.num_dofs(),
                sys.a.nnz(),
                b.max_abs(),
                z.max_abs()
            );
        }
    }
    Ok(())
}
