//! Iteration counts of the BDDC-preconditioned solve against the reference
//! tables.
//!
//! Usage: `iteration_tables [table1|table2] [test] [k] [max swept value]`

use hdg_bddc::experiments::{run_case, table_cases, TablePreset, TestCase};

fn main() -> hdg_bddc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let preset = TablePreset::parse(args.first().map_or("table1", String::as_str))?;
    let test = TestCase::from_index(args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1))?;
    let k = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cap: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(16);

    println!("{:>8} {:>5} {:>4} {:>6} {:>6} {:>6} {:>10}", "beta", "nsub", "hh", "iters", "ref", "delta", "true res");
    for case in table_cases(preset, test, k) {
        let swept = match preset {
            TablePreset::Table1 => case.nsub,
            TablePreset::Table2 => case.hh,
        };
        if swept > cap {
            continue;
        }
        let r = run_case(&case)?;
        println!(
            "{:>8.0e} {:>5} {:>4} {:>6} {:>6} {:>6} {:>10.2e}",
            r.beta,
            r.nsub,
            r.hh,
            r.iters,
            r.reference_iters.map_or("-".into(), |v| v.to_string()),
            r.delta().map_or("-".into(), |d| format!("{d:+}")),
            r.final_true_res
        );
    }
    Ok(())
}
