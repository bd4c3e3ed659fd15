//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use hdg_bddc::bddc::{edge_functional, ConstraintKind, PrimalSelection};
use hdg_bddc::condensation::{recover_interior, split_bz};
use hdg_bddc::diagnostics::bound_factors;
use hdg_bddc::experiments::{run_case, CaseConfig, Pipeline, TestCase};
use hdg_bddc::hdg::{stabilizers_for, LocalLayout};
use hdg_bddc::krylov::{gmres, GmresConfig};
use hdg_bddc::linalg::rel_diff;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{rngs::StdRng, Rng, SeedableRng};

const ORACLE_TOL: f64 = 1e-9;
const ORACLE_BUDGET_S: f64 = 10.0;
const STRUCTURE_BUDGET_S: f64 = 30.0;
const SYMMETRY_TOL: f64 = 1e-14;
const SKEW_FORM_TOL: f64 = 1e-12;
const ROBIN_TOL: f64 = 1e-11;
const ALL_PRIMAL_DROP: f64 = 1e11;
const NSUB_SWEEP_BAND: i64 = 4;
const NSUB_SWEEP_SPREAD: i64 = 5;
const HH_SWEEP_BAND: i64 = 5;
const HH_SWEEP_GROWTH: i64 = 15;
const MIN_ORDER: f64 = 1.8;
const FACTOR_TOL: f64 = 1e-12;
const DENSE_GMRES_TOL: f64 = 1e-9;
const MONOTONE_SLACK: f64 = 1e-14;
const BETAS: [f64; 4] = [1.0, 1e-4, 1e-6, 1e-8];

struct Outcome {
    pass: bool,
    summary: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            notes: Vec::new(),
        }
    }
}

/// Residual histories of every solve in the suite.
#[derive(Default)]
struct Runs {
    histories: Vec<(String, Vec<f64>)>,
}

fn is_monotone(h: &[f64]) -> bool {
    h.windows(2).all(|w| w[1] <= w[0] * (1.0 + MONOTONE_SLACK))
}

fn monolithic_equivalence(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let (mut worst_lambda, mut worst_fields) = (0.0f64, 0.0f64);
    for n in [1, 2] {
        for m in [1, 2] {
            for k in [1, 2] {
                for beta in [1.0, 1e-4] {
                    let case = CaseConfig::new(TestCase::Uniform, k, beta, n, m);
                    let pipe = Pipeline::build(&case).expect("pipeline");
                    let pre = pipe.preconditioner(case.primal).expect("preconditioner");
                    let g = pipe.interface_rhs();
                    let rep = gmres(|v| pipe.apply_interface(v), |r| pre.apply(r), &g, &GmresConfig::default());
                    runs.histories.push((format!("oracle n={n} m={m} k={k} beta={beta:e}"), rep.history.clone()));
                    let lambda = pipe.trace_solution(&rep.x);
                    let interior = recover_interior(&pipe.system, &lambda);

                    let stab = stabilizers_for(&pipe.mesh, &pipe.problem.velocity).unwrap();
                    let mono = common::monolithic_solve(&pipe.mesh, &pipe.space, pipe.fe, &pipe.problem, &stab);
                    let lay = LocalLayout::new(k);
                    worst_lambda = worst_lambda.max(rel_diff(&lambda, &mono.lambda));
                    worst_fields = worst_fields.max(rel_diff(
                        &common::scalar_fields(lay, &interior),
                        &common::scalar_fields(lay, &mono.interior),
                    ));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst_lambda <= ORACLE_TOL && worst_fields <= ORACLE_TOL && secs <= ORACLE_BUDGET_S,
        format!(
            "monolithic oracle over 16 cases: traces {worst_lambda:.1e}, (y,p) {worst_fields:.1e} (tol {ORACLE_TOL:e}), {secs:.1}s (budget {ORACLE_BUDGET_S}s)"
        ),
    )
}

#[derive(Debug, Clone)]
struct StructureCase {
    n: usize,
    m: usize,
    k: usize,
    rotation: bool,
    beta: f64,
    seed: u64,
}

fn structure_strategy() -> impl Strategy<Value = StructureCase> {
    (2usize..=3, 1usize..=2, 1usize..=2, any::<bool>(), prop::sample::select(vec![1.0, 1e-4, 1e-8]), any::<u64>()).prop_map(
        |(n, m, k, rotation, beta, seed)| StructureCase {
            n,
            m,
            k,
            rotation,
            beta,
            seed,
        },
    )
}

fn check_structure(c: &StructureCase) -> Result<(), TestCaseError> {
    let test = if c.rotation { TestCase::Rotation } else { TestCase::Uniform };
    let case = CaseConfig::new(test, c.k, c.beta, c.n, c.m);
    let pipe = Pipeline::build(&case).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut rng = StdRng::seed_from_u64(c.seed);

    let (b, z) = split_bz(&pipe.system);
    let (bd, zd) = (b.to_dense(), z.to_dense());
    let scale = pipe.system.a.max_abs();
    prop_assert!((&bd - bd.transpose()).amax() <= SYMMETRY_TOL * scale, "B not symmetric");
    prop_assert!((&zd + zd.transpose()).amax() <= SYMMETRY_TOL * scale, "Z not skew");
    let z_norm = zd.norm();
    for _ in 0..10 {
        let l = DVector::from_fn(pipe.system.num_dofs(), |_, _| rng.random_range(-1.0..1.0));
        let form = l.dot(&(&zd * &l));
        prop_assert!(form.abs() <= SKEW_FORM_TOL * z_norm * l.norm_squared(), "skew form {form}");
        prop_assert!(l.dot(&(&bd * &l)) > 0.0, "B not positive");
    }

    let pre = pipe.preconditioner(case.primal).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let ng = pipe.space.num_gamma();
    let mut weights = vec![0.0; ng];
    for loc in &pre.locals {
        for (&g, d) in loc.gamma.iter().zip(&loc.scaling) {
            weights[g] += d;
        }
    }
    prop_assert!(weights.iter().all(|&w| w == 1.0), "weights do not sum to one");
    let v: Vec<f64> = (0..ng).map(|_| rng.random_range(-1.0..1.0)).collect();
    let parts: Vec<Vec<f64>> = pre.locals.iter().map(|l| l.gamma.iter().map(|&g| v[g]).collect()).collect();
    prop_assert!(pre.extend_scaled(&parts) == v, "scaled extension of a restriction differs");

    let mut robin = DMatrix::<f64>::zeros(ng, ng);
    for op in &pipe.ops {
        for r in 0..op.num_gamma() {
            for (c, val) in op.robin.row(r) {
                robin[(op.gamma[r], op.gamma[c])] += val;
            }
        }
    }
    let robin_local: f64 = pipe.ops.iter().map(|o| o.robin.max_abs()).fold(0.0, f64::max);
    prop_assert!(robin.amax() <= ROBIN_TOL, "Robin terms leave {:e}", robin.amax());
    if c.rotation {
        prop_assert!(robin_local > 0.0, "Robin terms vanish");
    }

    for me in 0..pipe.mesh.macro_edges.len() {
        for kind in [ConstraintKind::Average, ConstraintKind::FluxAverage, ConstraintKind::FluxMoment] {
            let master = edge_functional(&pipe.mesh, &pipe.space, &pipe.problem.velocity, me, kind, 1.0);
            let other = edge_functional(&pipe.mesh, &pipe.space, &pipe.problem.velocity, me, kind, -1.0);
            let sign = if kind == ConstraintKind::Average { 1.0 } else { -1.0 };
            let flipped: Vec<f64> = other.iter().map(|v| sign * v).collect();
            prop_assert!(rel_diff(&master, &flipped) <= SYMMETRY_TOL, "{kind:?} rows differ across sides");
        }
    }
    Ok(())
}

fn structural_invariants() -> Outcome {
    let start = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: 24,
        failure_persistence: None,
        ..Config::default()
    });
    let result = runner.run(&structure_strategy(), |c| check_structure(&c));
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => Outcome::new(
            secs <= STRUCTURE_BUDGET_S,
            format!("B/Z split, partition of unity, Robin cancellation, primal sign: 24 cases, {secs:.1}s (budget {STRUCTURE_BUDGET_S}s)"),
        ),
        Err(e) => Outcome::new(false, format!("structural property violated: {e}")),
    }
}

fn all_primal_exactness(runs: &mut Runs) -> Outcome {
    let mut worst_drop = f64::INFINITY;
    let mut max_iters = 0;
    for test in [TestCase::Uniform, TestCase::Rotation] {
        for beta in [1.0, 1e-6] {
            let mut case = CaseConfig::new(test, 1, beta, 2, 2);
            case.primal = PrimalSelection::AllInterfaceDofs;
            let r = run_case(&case).expect("case");
            worst_drop = worst_drop.min(r.history[0] / r.history[r.history.len() - 1]);
            max_iters = max_iters.max(r.iters);
            runs.histories.push((format!("all-primal test={} beta={beta:e}", test.index()), r.history));
        }
    }
    Outcome::new(
        max_iters == 1 && worst_drop >= ALL_PRIMAL_DROP,
        format!("every interface dof primal: max {max_iters} iteration(s), min residual drop {worst_drop:.1e} (need 1 and {ALL_PRIMAL_DROP:e})"),
    )
}

fn sweep_nsub(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut worst = 0i64;
    for test in [TestCase::Uniform, TestCase::Rotation] {
        for beta in BETAS {
            let mut counts = Vec::new();
            for n in [4, 8, 16] {
                let r = run_case(&CaseConfig::new(test, 1, beta, n, 6)).expect("case");
                let d = r.delta().expect("reference cell");
                worst = worst.max(d.abs());
                if d.abs() > NSUB_SWEEP_BAND {
                    pass = false;
                    notes.push(format!(
                        "test {} beta {beta:e} n {n}: {} iterations vs {} ({d:+})",
                        test.index(),
                        r.iters,
                        r.reference_iters.unwrap()
                    ));
                }
                counts.push(r.iters as i64);
                runs.histories.push((format!("nsub sweep test={} beta={beta:e} n={n}", test.index()), r.history));
            }
            if (counts[1] - counts[2]).abs() > NSUB_SWEEP_SPREAD {
                pass = false;
                notes.push(format!("test {} beta {beta:e}: n=8 vs n=16 counts {} and {}", test.index(), counts[1], counts[2]));
            }
        }
    }
    let mut out = Outcome::new(
        pass,
        format!("fixed H/h sweep, 24 cells: max |delta| {worst} (band {NSUB_SWEEP_BAND}), n=8 vs 16 spread <= {NSUB_SWEEP_SPREAD}"),
    );
    out.notes = notes;
    out
}

fn sweep_hh(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut worst = 0i64;
    for test in [TestCase::Uniform, TestCase::Rotation] {
        for beta in BETAS {
            let mut counts = Vec::new();
            for m in [4, 8, 16] {
                let r = run_case(&CaseConfig::new(test, 1, beta, 6, m)).expect("case");
                let d = r.delta().expect("reference cell");
                worst = worst.max(d.abs());
                if d.abs() > HH_SWEEP_BAND {
                    pass = false;
                    notes.push(format!(
                        "test {} beta {beta:e} m {m}: {} iterations vs {} ({d:+})",
                        test.index(),
                        r.iters,
                        r.reference_iters.unwrap()
                    ));
                }
                counts.push(r.iters as i64);
                runs.histories.push((format!("hh sweep test={} beta={beta:e} m={m}", test.index()), r.history));
            }
            let monotone = counts.windows(2).all(|w| w[1] >= w[0]);
            let growth = counts[2] - counts[0];
            if !monotone || growth > HH_SWEEP_GROWTH {
                pass = false;
                notes.push(format!("test {} beta {beta:e}: counts {counts:?} not mildly increasing", test.index()));
            }
        }
    }
    let mut out = Outcome::new(
        pass,
        format!("fixed H sweep, 24 cells: max |delta| {worst} (band {HH_SWEEP_BAND}), monotone growth <= {HH_SWEEP_GROWTH}"),
    );
    out.notes = notes;
    out
}

fn discretization_order() -> Outcome {
    let errors: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&m| run_case(&CaseConfig::new(TestCase::Uniform, 1, 1.0, 2, m)).expect("case").l2err_y)
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Outcome::new(
        orders.iter().all(|&o| o >= MIN_ORDER),
        format!(
            "L2 order of y over m = 2, 4, 8: {:.3}, {:.3} (need >= {MIN_ORDER}); errors {:.3e}, {:.3e}, {:.3e}",
            orders[0], orders[1], errors[0], errors[1], errors[2]
        ),
    )
}

fn bound_factor_arithmetic() -> Outcome {
    let mut worst = 0.0f64;
    for big_h in [0.5, 0.25, 0.125, 1.0 / 16.0, 1.0 / 32.0] {
        for ratio in [1.0, 2.0, 4.0, 6.0, 8.0, 16.0, 20.0] {
            let h = big_h / ratio;
            let b = bound_factors(1.0, big_h, h);
            let c0 = h + 1.0;
            let direct = ((1.0 + c0 * big_h) * c0 * (1.0 + big_h) * (1.0 + (big_h / h).ln())).powi(2);
            worst = worst.max((b.cu_factor - direct).abs() / direct);
        }
    }
    let (mut checked, mut rate_ok) = (0, true);
    for beta in [1.0, 1e-2, 1e-4, 1e-6, 1e-8] {
        for big_h in [0.25, 1e-2, 1e-3, 1e-4, 1e-6] {
            for ratio in [1.0, 2.0, 6.0] {
                let b = bound_factors(beta, big_h, big_h / ratio);
                if b.cl_factor > 0.0 {
                    checked += 1;
                    rate_ok &= (1..=40).all(|m| b.predicted_rate(m).is_some_and(|r| r > 0.0 && r < 1.0));
                } else {
                    rate_ok &= b.predicted_rate(1).is_none();
                }
            }
        }
    }
    Outcome::new(
        worst <= FACTOR_TOL && rate_ok && checked > 0,
        format!("upper factor vs direct form: {worst:.1e} (tol {FACTOR_TOL:e}); rate in (0,1) on {checked} parameter sets with cl > 0"),
    )
}

fn gmres_suite(runs: &Runs) -> Outcome {
    let b: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
    let id = gmres(|x| x.to_vec(), |x| x.to_vec(), &b, &GmresConfig::default());
    let identity_ok = id.iterations == 1 && id.converged;

    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = DMatrix::from_fn(20, 20, |_, _| rng.random_range(-1.0..1.0));
        let rhs: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rep = gmres(
            |x| (&a * DVector::from_column_slice(x)).as_slice().to_vec(),
            |x| x.to_vec(),
            &rhs,
            &GmresConfig::default(),
        );
        let exact = a.clone().lu().solve(&DVector::from_column_slice(&rhs)).expect("nonsingular");
        worst = worst.max(rel_diff(&rep.x, exact.as_slice()));
    }
    let bad: Vec<&str> = runs
        .histories
        .iter()
        .filter(|(_, h)| !is_monotone(h))
        .map(|(name, _)| name.as_str())
        .collect();
    let mut out = Outcome::new(
        identity_ok && worst <= DENSE_GMRES_TOL && bad.is_empty() && !runs.histories.is_empty(),
        format!(
            "identity in {} step(s); random 20x20 vs dense LU {worst:.1e} (tol {DENSE_GMRES_TOL:e}); {} of {} suite histories monotone",
            id.iterations,
            runs.histories.len() - bad.len(),
            runs.histories.len()
        ),
    );
    out.notes = bad.iter().map(|s| format!("non-monotone history: {s}")).collect();
    out
}

fn run(id: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Outcome::new(false, format!("panicked: {msg}"))
    });
    println!(
        "criterion {id} [{}] {title}: {} ({:.1}s)",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.summary,
        start.elapsed().as_secs_f64()
    );
    for note in &outcome.notes {
        println!("    {note}");
    }
    outcome.pass
}

fn main() {
    let mut runs = Runs::default();
    let results = [
        run(1, "monolithic equivalence", || monolithic_equivalence(&mut runs)),
        run(2, "structural invariants", structural_invariants),
        run(3, "all-primal exactness", || all_primal_exactness(&mut runs)),
        run(4, "subdomain-count sweep", || sweep_nsub(&mut runs)),
        run(5, "H/h sweep", || sweep_hh(&mut runs)),
        run(6, "discretization order", discretization_order),
        run(7, "bound-factor arithmetic", bound_factor_arithmetic),
        run(8, "GMRES suite", || gmres_suite(&runs)),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
