use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hdg_bddc::bddc::{PrimalFlags, PrimalSelection};
use hdg_bddc::diagnostics::{bound_factors, BoundFactors};
use hdg_bddc::experiments::{
    run_case, table_cases, write_csv, write_csv_file, write_json_file, CaseConfig, CaseResult, TablePreset, TestCase,
};
use hdg_bddc::mesh::{build_structured_mesh, MeshConfig};
use hdg_bddc::Error;

const EXIT_NONCONVERGED: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const LARGE_CASE_DOFS: usize = 2_000_000;

fn warn_if_large(case: &CaseConfig) {
    let dofs = case.trace_dofs();
    if dofs > LARGE_CASE_DOFS {
        eprintln!("warning: nsub {} hh {} k {} has {dofs} trace unknowns", case.nsub, case.hh, case.degree);
    }
}

#[derive(Parser)]
#[command(version, about = "HDG optimal control solver with BDDC-preconditioned GMRES")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case on the manufactured problem.
    Solve {
        #[arg(long, default_value_t = 1)]
        test: u8,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        beta: f64,
        /// Subdomains per side.
        #[arg(long, default_value_t = 4)]
        nsub: usize,
        /// Elements per subdomain side.
        #[arg(long, default_value_t = 6)]
        hh: usize,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
        /// Iteration cap; defaults to the interface dimension.
        #[arg(long)]
        max_iters: Option<usize>,
        /// avg, avg+flux, avg+flux+moment or all.
        #[arg(long, default_value = "avg+flux+moment")]
        primal: String,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        dump_mesh: Option<PathBuf>,
    },
    /// Regenerate an iteration-count table; CSV goes to stdout unless --csv is set.
    Table {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 1)]
        test: u8,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
        /// Skip cases whose swept parameter exceeds this value.
        #[arg(long)]
        max_swept: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print bound factors for every combination of the given values.
    Bounds {
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        beta: Vec<f64>,
        #[arg(long = "H", num_args = 1.., required = true)]
        big_h: Vec<f64>,
        #[arg(long, num_args = 1.., required = true)]
        h: Vec<f64>,
    },
}

fn parse_primal(s: &str) -> hdg_bddc::Result<PrimalSelection> {
    if s == "all" {
        Ok(PrimalSelection::AllInterfaceDofs)
    } else {
        PrimalFlags::parse(s).map(PrimalSelection::Edges)
    }
}

fn write_outputs(results: &[CaseResult], csv: Option<&PathBuf>, json: Option<&PathBuf>) -> hdg_bddc::Result<()> {
    if let Some(p) = csv {
        write_csv_file(p, results)?;
    }
    if let Some(p) = json {
        write_json_file(p, results)?;
    }
    Ok(())
}

fn status(results: &[CaseResult]) -> ExitCode {
    if results.iter().all(|r| r.converged) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NONCONVERGED)
    }
}

fn run(cmd: Command) -> hdg_bddc::Result<ExitCode> {
    match cmd {
        Command::Solve {
            test,
            k,
            beta,
            nsub,
            hh,
            tol,
            max_iters,
            primal,
            csv,
            json,
            dump_mesh,
        } => {
            let mut case = CaseConfig::new(TestCase::from_index(test)?, k, beta, nsub, hh);
            case.tol = tol;
            case.max_iters = max_iters;
            case.primal = parse_primal(&primal)?;
            case.validate()?;
            warn_if_large(&case);
            if let Some(p) = &dump_mesh {
                let mesh = build_structured_mesh(MeshConfig::new(nsub, hh))?;
                std::fs::write(p, mesh.to_json()?)?;
            }
            let r = run_case(&case)?;
            println!(
                "test {} k {} beta {:e} nsub {} hh {} primal {}: {} iterations ({}), true residual {:.3e}, L2 errors y {:.3e} p {:.3e}, {:.0} ms",
                r.test,
                r.k,
                r.beta,
                r.nsub,
                r.hh,
                r.primal,
                r.iters,
                if r.converged { "converged" } else { "not converged" },
                r.final_true_res,
                r.l2err_y,
                r.l2err_p,
                r.wall_ms
            );
            if let Some(reference) = r.reference_iters {
                println!("reference iterations {reference}, delta {:+}", r.iters as i64 - reference as i64);
            }
            let results = [r];
            write_outputs(&results, csv.as_ref(), json.as_ref())?;
            Ok(status(&results))
        }
        Command::Table {
            preset,
            test,
            k,
            tol,
            max_swept,
            csv,
            json,
        } => {
            let preset = TablePreset::parse(&preset)?;
            let mut cases = table_cases(preset, TestCase::from_index(test)?, k);
            if let Some(cap) = max_swept {
                cases.retain(|c| match preset {
                    TablePreset::Table1 => c.nsub <= cap,
                    TablePreset::Table2 => c.hh <= cap,
                });
            }
            let mut results = Vec::with_capacity(cases.len());
            for mut case in cases {
                case.tol = tol;
                warn_if_large(&case);
                let r = run_case(&case)?;
                eprintln!("beta {:e} nsub {} hh {}: {} iterations", r.beta, r.nsub, r.hh, r.iters);
                results.push(r);
            }
            if csv.is_none() {
                write_csv(std::io::stdout().lock(), &results)?;
            }
            write_outputs(&results, csv.as_ref(), json.as_ref())?;
            Ok(status(&results))
        }
        Command::Bounds { beta, big_h, h } => {
            for &v in beta.iter().chain(&big_h).chain(&h) {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!("bound parameters must be positive, got {v}")));
                }
            }
            if let Some((&bh, &sh)) = big_h.iter().flat_map(|bh| h.iter().map(move |sh| (bh, sh))).find(|(bh, sh)| sh > bh) {
                return Err(Error::Config(format!("h = {sh} exceeds H = {bh}")));
            }
            println!("{}", BoundFactors::CSV_HEADER);
            for &b in &beta {
                for &bh in &big_h {
                    for &sh in &h {
                        println!("{}", bound_factors(b, bh, sh).csv_row());
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { 1 })
        }
    }
}
