//! Bound factors over beta and H/h next to observed iteration counts.

use hdg_bddc::diagnostics::bound_factors;
use hdg_bddc::experiments::{run_case, CaseConfig, TestCase};

fn main() -> hdg_bddc::Result<()> {
    let nsub = 4;
    let big_h = 1.0 / nsub as f64;
    println!("{:>8} {:>4} {:>10} {:>10} {:>12} {:>12} {:>6}", "beta", "H/h", "c0", "C_ED", "Cu", "cl", "iters");
    for beta in [1.0, 1e-4, 1e-8] {
        for hh in [2, 4, 8] {
            let b = bound_factors(beta, big_h, big_h / hh as f64);
            let r = run_case(&CaseConfig::new(TestCase::Uniform, 1, beta, nsub, hh))?;
            println!(
                "{beta:>8.0e} {hh:>4} {:>10.4} {:>10.4} {:>12.4e} {:>12.4e} {:>6}",
                b.c0, b.c_ed, b.cu_factor, b.cl_factor, r.iters
            );
        }
    }
    // the lower factor only turns positive for small H
    let b = bound_factors(1.0, 1e-3, 1e-3 / 4.0);
    println!("H = 1e-3: cl = {:.4}, rate over 10 steps {:?}", b.cl_factor, b.predicted_rate(10));
    Ok(())
}
