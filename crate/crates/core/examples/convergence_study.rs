//! L2 errors and observed orders of the recovered state and adjoint under
//! uniform refinement.
//!
//! Usage: `convergence_study [k] [test]`

use hdg_bddc::experiments::{run_case, CaseConfig, TestCase};

fn main() -> hdg_bddc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let k = args.first().and_then(|s| s.parse().ok()).unwrap_or(1);
    let test = TestCase::from_index(args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1))?;
    let mut prev: Option<(f64, f64)> = None;
    println!("{:>4} {:>12} {:>6} {:>12} {:>6}", "m", "err y", "order", "err p", "order");
    for m in [2, 4, 8, 16] {
        let r = run_case(&CaseConfig::new(test, k, 1.0, 2, m))?;
        let (oy, op) = prev.map_or((f64::NAN, f64::NAN), |(y, p)| ((y / r.l2err_y).log2(), (p / r.l2err_p).log2()));
        println!("{m:>4} {:>12.4e} {oy:>6.2} {:>12.4e} {op:>6.2}", r.l2err_y, r.l2err_p);
        prev = Some((r.l2err_y, r.l2err_p));
    }
    Ok(())
}
