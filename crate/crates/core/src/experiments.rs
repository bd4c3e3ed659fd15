//! Manufactured problem, case runner and iteration-count tables.

pub mod manufactured {
    //! Exact state/adjoint pair and the loads it induces.
    //!
    //! `y = sin^3(pi x) sin^2(pi y) cos(pi y)`,
    //! `p = -sin^2(pi x) sin^2(pi y) cos(pi x)`,
    //! `f = s (-lap y + zeta.grad y) - p`, `g = s (-lap p - zeta.grad p) + y`
    //! with `s = beta^{1/2}`.

    use std::f64::consts::PI;

    use crate::hdg::Velocity;

    /// Values, gradients and Laplacians of `(y, p)`.
    #[derive(Debug, Clone, Copy)]
    pub struct Derivatives {
        pub y: f64,
        pub p: f64,
        pub grad_y: [f64; 2],
        pub grad_p: [f64; 2],
        pub lap_y: f64,
        pub lap_p: f64,
    }

    pub fn derivatives(x: [f64; 2]) -> Derivatives {
        let (s1, c1) = (PI * x[0]).sin_cos();
        let (s2, c2) = (PI * x[1]).sin_cos();
        let pi2 = PI * PI;
        // y = A(x) B(y)
        let a = s1 * s1 * s1;
        let da = 3.0 * PI * s1 * s1 * c1;
        let dda = 3.0 * pi2 * s1 * (2.0 * c1 * c1 - s1 * s1);
        let b = s2 * s2 * c2;
        let db = PI * s2 * (2.0 * c2 * c2 - s2 * s2);
        let ddb = pi2 * (2.0 * c2 * c2 * c2 - 7.0 * s2 * s2 * c2);
        // p = P(x) R(y)
        let p = -s1 * s1 * c1;
        let dp = -PI * s1 * (2.0 * c1 * c1 - s1 * s1);
        let ddp = -pi2 * (2.0 * c1 * c1 * c1 - 7.0 * s1 * s1 * c1);
        let r = s2 * s2;
        let dr = 2.0 * PI * s2 * c2;
        let ddr = 2.0 * pi2 * (c2 * c2 - s2 * s2);
        Derivatives {
            y: a * b,
            p: p * r,
            grad_y: [da * b, a * db],
            grad_p: [dp * r, p * dr],
            lap_y: dda * b + a * ddb,
            lap_p: ddp * r + p * ddr,
        }
    }

    /// `(y, p)` at `x`.
    pub fn exact_solution(x: [f64; 2]) -> (f64, f64) {
        let d = derivatives(x);
        (d.y, d.p)
    }

    /// `(f, g)` at `x`.
    pub fn rhs(x: [f64; 2], beta: f64, velocity: &Velocity) -> (f64, f64) {
        let d = derivatives(x);
        let z = velocity.eval(x);
        let s = beta.sqrt();
        let adv_y = z[0] * d.grad_y[0] + z[1] * d.grad_y[1];
        let adv_p = z[0] * d.grad_p[0] + z[1] * d.grad_p[1];
        (s * (-d.lap_y + adv_y) - d.p, s * (-d.lap_p - adv_p) + d.y)
    }

}

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::bddc::{build_preconditioner, select_primal, BddcPreconditioner, PrimalFlags, PrimalSelection};
use crate::condensation::{condense, l2_errors, recover_interior, TraceSystem};
use crate::fespace::{build_trace_space, FeConfig, TraceSpace};
use crate::hdg::{stabilizers_for, ProblemConfig, Source, Velocity};
use crate::krylov::{gmres, GmresConfig, GmresReport};
use crate::mesh::{build_structured_mesh, Mesh, MeshConfig};
use crate::schur::{apply_interface, backsolve_interior, build_subdomain_ops, interface_rhs, SchurOptions, SubdomainOperator};
use crate::{Error, Result};

/// The two advection fields of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestCase {
    /// `zeta = (1, 0)`.
    Uniform,
    /// `zeta = (x_2, -x_1)`.
    Rotation,
}

impl TestCase {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::Uniform),
            2 => Ok(Self::Rotation),
            _ => Err(Error::Config(format!("test must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Uniform => 1,
            Self::Rotation => 2,
        }
    }

    pub fn velocity(self) -> Velocity {
        match self {
            Self::Uniform => Velocity::Uniform([1.0, 0.0]),
            Self::Rotation => Velocity::Rotation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseConfig {
    pub test: TestCase,
    pub degree: usize,
    pub beta: f64,
    pub nsub: usize,
    pub hh: usize,
    pub tol: f64,
    pub primal: PrimalSelection,
    pub max_iters: Option<usize>,
}

impl CaseConfig {
    pub fn new(test: TestCase, degree: usize, beta: f64, nsub: usize, hh: usize) -> Self {
        Self {
            test,
            degree,
            beta,
            nsub,
            hh,
            tol: 1e-11,
            primal: PrimalSelection::Edges(PrimalFlags::ALL),
            max_iters: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        FeConfig::new(self.degree).validate()?;
        MeshConfig::new(self.nsub, self.hh).validate()?;
        ProblemConfig::new(self.beta, self.test.velocity(), Source::Manufactured).validate()
    }

    /// Trace unknowns of the case: non-boundary edges times `2 (k + 1)`.
    pub fn trace_dofs(&self) -> usize {
        let n = self.nsub * self.hh;
        (3 * n * n - 2 * n) * 2 * (self.degree + 1)
    }

    pub fn primal_label(&self) -> &'static str {
        match self.primal {
            PrimalSelection::Edges(f) => f.label(),
            PrimalSelection::AllInterfaceDofs => "all",
        }
    }
}

/// Discretization and substructuring of one case, ready for the solve.
pub struct Pipeline {
    pub mesh: Mesh,
    pub fe: FeConfig,
    pub space: TraceSpace,
    pub problem: ProblemConfig,
    pub system: TraceSystem,
    pub ops: Vec<SubdomainOperator>,
}

impl Pipeline {
    pub fn build(case: &CaseConfig) -> Result<Self> {
        case.validate()?;
        let mesh = build_structured_mesh(MeshConfig::new(case.nsub, case.hh)).map_err(|e| e.in_stage("mesh"))?;
        let fe = FeConfig::new(case.degree);
        let space = build_trace_space(&mesh, fe).map_err(|e| e.in_stage("trace space"))?;
        let problem = ProblemConfig::new(case.beta, case.test.velocity(), Source::Manufactured);
        let stab = stabilizers_for(&mesh, &problem.velocity).map_err(|e| e.in_stage("stabilization"))?;
        let system = condense(&mesh, &space, fe, &problem, &stab).map_err(|e| e.in_stage("static condensation"))?;
        let ops = build_subdomain_ops(&mesh, &space, &system, &problem, SchurOptions::default())
            .map_err(|e| e.in_stage("subdomain operators"))?;
        Ok(Self {
            mesh,
            fe,
            space,
            problem,
            system,
            ops,
        })
    }

    pub fn interface_rhs(&self) -> Vec<f64> {
        interface_rhs(&self.ops, &self.space, &self.system.b)
    }

    pub fn apply_interface(&self, v: &[f64]) -> Vec<f64> {
        apply_interface(&self.ops, v)
    }

    pub fn preconditioner(&self, selection: PrimalSelection) -> Result<BddcPreconditioner> {
        let primal = select_primal(&self.mesh, &self.space, &self.problem.velocity, selection);
        build_preconditioner(&self.ops, primal, &self.space).map_err(|e| e.in_stage("preconditioner"))
    }

    /// Full trace vector from interface values.
    pub fn trace_solution(&self, lambda_gamma: &[f64]) -> Vec<f64> {
        backsolve_interior(&self.ops, &self.space, lambda_gamma, &self.system.b)
    }

    /// `L^2` errors of `(y, p)` against the manufactured solution.
    pub fn l2_errors(&self, lambda: &[f64]) -> (f64, f64) {
        let interior = recover_interior(&self.system, lambda);
        l2_errors(&self.mesh, self.fe, &interior, manufactured::exact_solution)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub test: u8,
    pub k: usize,
    pub beta: f64,
    pub nsub: usize,
    pub hh: usize,
    pub primal: &'static str,
    pub num_gamma: usize,
    pub num_coarse: usize,
    pub iters: usize,
    pub converged: bool,
    pub breakdown: bool,
    pub final_true_res: f64,
    pub orthogonality_loss: f64,
    pub l2err_y: f64,
    pub l2err_p: f64,
    pub wall_ms: f64,
    pub history: Vec<f64>,
    pub reference_iters: Option<usize>,
}

impl CaseResult {
    pub fn delta(&self) -> Option<i64> {
        self.reference_iters.map(|r| self.iters as i64 - r as i64)
    }
}

/// Solves one case from end to end.
pub fn run_case(case: &CaseConfig) -> Result<CaseResult> {
    let start = Instant::now();
    let pipe = Pipeline::build(case)?;
    let pre = pipe.preconditioner(case.primal)?;
    let g = pipe.interface_rhs();
    let cfg = GmresConfig {
        tol: case.tol,
        max_iters: case.max_iters,
    };
    let rep: GmresReport = gmres(|v| pipe.apply_interface(v), |r| pre.apply(r), &g, &cfg);
    let lambda = pipe.trace_solution(&rep.x);
    let (l2err_y, l2err_p) = pipe.l2_errors(&lambda);
    Ok(CaseResult {
        test: case.test.index(),
        k: case.degree,
        beta: case.beta,
        nsub: case.nsub,
        hh: case.hh,
        primal: case.primal_label(),
        num_gamma: pipe.space.num_gamma(),
        num_coarse: pre.num_coarse(),
        iters: rep.iterations,
        converged: rep.converged,
        breakdown: rep.breakdown,
        final_true_res: rep.true_residual,
        orthogonality_loss: rep.orthogonality_loss,
        l2err_y,
        l2err_p,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        history: rep.history,
        reference_iters: reference::lookup(case.test, case.degree, case.beta, case.nsub, case.hh),
    })
}

/// Reference iteration counts for the default primal set and `tol = 1e-11`.
pub mod reference {
    use super::TestCase;

    pub const BETAS: [f64; 4] = [1.0, 1e-4, 1e-6, 1e-8];
    /// Subdomains per side for the fixed-`H/h` sweep.
    pub const SWEEP_NSUB: [usize; 4] = [4, 8, 16, 32];
    pub const SWEEP_NSUB_HH: usize = 6;
    /// Elements per subdomain side for the fixed-`H` sweep.
    pub const SWEEP_HH: [usize; 4] = [4, 8, 16, 20];
    pub const SWEEP_HH_NSUB: usize = 6;

    type Block = [[usize; 4]; 4];

    const NSUB_SWEEP: [[Block; 2]; 2] = [
        [
            [[19, 21, 18, 17], [25, 21, 18, 16], [17, 21, 18, 15], [8, 11, 15, 18]],
            [[24, 27, 23, 22], [27, 21, 22, 26], [22, 22, 18, 21], [10, 15, 18, 21]],
        ],
        [
            [[7, 6, 6, 5], [7, 6, 6, 5], [7, 6, 6, 5], [6, 6, 6, 5]],
            [[11, 10, 10, 12], [10, 10, 10, 10], [10, 9, 9, 9], [6, 8, 8, 8]],
        ],
    ];

    const HH_SWEEP: [[Block; 2]; 2] = [
        [
            [[18, 23, 28, 29], [18, 22, 27, 29], [16, 21, 25, 27], [8, 11, 14, 15]],
            [[23, 29, 32, 33], [24, 28, 32, 33], [22, 23, 25, 26], [11, 16, 18, 19]],
        ],
        [
            [[5, 7, 9, 9], [5, 7, 9, 9], [6, 7, 9, 9], [5, 7, 9, 9]],
            [[10, 11, 10, 10], [11, 9, 10, 14], [10, 9, 8, 8], [6, 7, 7, 7]],
        ],
    ];

    fn beta_row(beta: f64) -> Option<usize> {
        BETAS.iter().position(|&b| (b - beta).abs() <= 1e-12 * b)
    }

    fn block(table: &[[Block; 2]; 2], test: TestCase, k: usize) -> Option<&Block> {
        if !(1..=2).contains(&k) {
            return None;
        }
        Some(&table[test.index() as usize - 1][k - 1])
    }

    /// Iterations of the fixed-`H/h` sweep.
    pub fn nsub_sweep(test: TestCase, k: usize, beta: f64, nsub: usize) -> Option<usize> {
        let row = beta_row(beta)?;
        let col = SWEEP_NSUB.iter().position(|&n| n == nsub)?;
        block(&NSUB_SWEEP, test, k).map(|b| b[row][col])
    }

    /// Iterations of the fixed-`H` sweep.
    pub fn hh_sweep(test: TestCase, k: usize, beta: f64, hh: usize) -> Option<usize> {
        let row = beta_row(beta)?;
        let col = SWEEP_HH.iter().position(|&m| m == hh)?;
        block(&HH_SWEEP, test, k).map(|b| b[row][col])
    }

    /// Reference count for a case, if it belongs to either sweep.
    pub fn lookup(test: TestCase, k: usize, beta: f64, nsub: usize, hh: usize) -> Option<usize> {
        if hh == SWEEP_NSUB_HH {
            if let Some(v) = nsub_sweep(test, k, beta, nsub) {
                return Some(v);
            }
        }
        if nsub == SWEEP_HH_NSUB {
            return hh_sweep(test, k, beta, hh);
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TablePreset {
    /// `H/h` fixed, subdomain count varies.
    Table1,
    /// Subdomain count fixed, `H/h` varies.
    Table2,
}

impl TablePreset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Self::Table1),
            "table2" => Ok(Self::Table2),
            other => Err(Error::Config(format!("unknown preset '{other}', expected table1 or table2"))),
        }
    }
}

/// Cases of a preset, ordered by beta then by the swept parameter.
pub fn table_cases(preset: TablePreset, test: TestCase, k: usize) -> Vec<CaseConfig> {
    let mut out = Vec::new();
    for &beta in &reference::BETAS {
        match preset {
            TablePreset::Table1 => {
                for &n in &reference::SWEEP_NSUB {
                    out.push(CaseConfig::new(test, k, beta, n, reference::SWEEP_NSUB_HH));
                }
            }
            TablePreset::Table2 => {
                for &m in &reference::SWEEP_HH {
                    out.push(CaseConfig::new(test, k, beta, reference::SWEEP_HH_NSUB, m));
                }
            }
        }
    }
    out
}

pub fn run_table(cases: &[CaseConfig]) -> Result<Vec<CaseResult>> {
    cases.iter().map(run_case).collect()
}

#[derive(Serialize)]
struct TableRow {
    test: u8,
    k: usize,
    beta: f64,
    nsub: usize,
    hh: usize,
    iters: usize,
    final_true_res: f64,
    l2err_y: f64,
    l2err_p: f64,
    wall_ms: f64,
    paper_ref_iters: Option<usize>,
    delta: Option<i64>,
}

pub fn write_csv<W: Write>(out: W, results: &[CaseResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(TableRow {
            test: r.test,
            k: r.k,
            beta: r.beta,
            nsub: r.nsub,
            hh: r.hh,
            iters: r.iters,
            final_true_res: r.final_true_res,
            l2err_y: r.l2err_y,
            l2err_p: r.l2err_p,
            wall_ms: r.wall_ms,
            paper_ref_iters: r.reference_iters,
            delta: r.delta(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, results: &[CaseResult]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, results)
}

pub fn write_json_file(path: &Path, results: &[CaseResult]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, results)?;
    Ok(())
}
