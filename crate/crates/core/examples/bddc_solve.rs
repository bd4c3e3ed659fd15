//! One BDDC-preconditioned GMRES solve with its residual history, compared
//! against the unpreconditioned iteration.

use hdg_bddc::bddc::{PrimalFlags, PrimalSelection};
use hdg_bddc::experiments::{CaseConfig, Pipeline, TestCase};
use hdg_bddc::krylov::{gmres, GmresConfig};

fn main() -> hdg_bddc::Result<()> {
    let case = CaseConfig::new(TestCase::Rotation, 1, 1e-4, 4, 6);
    let pipe = Pipeline::build(&case)?;
    let g = pipe.interface_rhs();
    println!("{} interface unknowns on {} subdomains", g.len(), pipe.ops.len());

    let plain = gmres(|v| pipe.apply_interface(v), |r| r.to_vec(), &g, &GmresConfig::default());
    println!("no preconditioner: {} iterations", plain.iterations);

    for flags in ["avg", "avg+flux", "avg+flux+moment"] {
        let pre = pipe.preconditioner(PrimalSelection::Edges(PrimalFlags::parse(flags)?))?;
        let rep = gmres(|v| pipe.apply_interface(v), |r| pre.apply(r), &g, &GmresConfig::default());
        println!(
            "{flags:>16}: {} coarse dofs, {} iterations, true residual {:.2e}",
            pre.num_coarse(),
            rep.iterations,
            rep.true_residual
        );
        if flags == "avg+flux+moment" {
            for (i, r) in rep.history.iter().enumerate() {
                println!("  {i:>3} {:.3e}", r / rep.history[0]);
            }
            let lambda = pipe.trace_solution(&rep.x);
            let (ey, ep) = pipe.l2_errors(&lambda);
            println!("L2 errors y {ey:.3e} p {ep:.3e}");
        }
    }
    Ok(())
}
