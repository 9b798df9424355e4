use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use optiq::baseline::{bfgs_solve, forward_euler_solve, newton_damped_solve, sr1_solve, LineSearchConfig, StepPolicy};
use optiq::quiescence::{solve, OptiQConfig};
use optiq::SolverResult;
use rayon::prelude::*;

use crate::error::BenchError;
use crate::report::{write_trace_csv, BenchmarkReport, Metadata, Row, StartRecord};
use crate::suite::{ProblemSpec, SolverKind, SuiteSpec};

/// Workers to use given a requested count, capped by `OPTIQ_THREADS`.
pub fn worker_count(requested: usize) -> usize {
    let cap = std::env::var("OPTIQ_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&c| c > 0);
    let n = requested.max(1);
    cap.map_or(n, |c| n.min(c))
}

/// Runs one solver on one problem. Returns the result and the time spent
/// inside the solve call.
pub fn run_one(spec: &SuiteSpec, problem: &ProblemSpec, solver: SolverKind) -> Result<(SolverResult, f64), BenchError> {
    let n = problem.dimension()?;
    let obj = problem.problem()?.build(Some(n))?;
    let x0 = DVector::from_vec(problem.start()?);
    let ls = LineSearchConfig::default();
    let (eta, max_it) = (spec.eta, spec.max_iterations);
    let started = Instant::now();
    let result = match solver {
        SolverKind::Optiq => {
            let cfg = OptiQConfig { dequiescence: spec.dequiescence_rule()?, ..OptiQConfig::with_tolerance(eta, max_it) };
            solve(obj.as_ref(), &x0, &cfg)
        }
        SolverKind::Newton => newton_damped_solve(obj.as_ref(), &x0, eta, max_it, &ls),
        SolverKind::Bfgs => bfgs_solve(obj.as_ref(), &x0, eta, max_it, &ls),
        SolverKind::Sr1 => sr1_solve(obj.as_ref(), &x0, eta, max_it, &ls),
        SolverKind::ForwardEuler => {
            let policy = match spec.fe_dt {
                Some(dt) => StepPolicy::Fixed(dt),
                None => StepPolicy::BoundBased { safety: spec.fe_safety },
            };
            forward_euler_solve(obj.as_ref(), &x0, policy, eta, max_it)
        }
    }?;
    Ok((result, started.elapsed().as_secs_f64()))
}

fn row_for(spec: &SuiteSpec, problem: &ProblemSpec, solver: SolverKind) -> Row {
    let n = problem.dimension().unwrap_or(0);
    match run_one(spec, problem, solver) {
        Ok((res, secs)) => {
            let mut message = res.message.clone();
            if let Some(dir) = &spec.trace_dir {
                let path = dir.join(format!("{}_n{}_{}.csv", problem.name, n, solver));
                if let Err(e) = write_trace_csv(&res.trace, &path) {
                    message = Some(format!("trace not written: {e}"));
                }
            }
            Row {
                problem: problem.name.clone(),
                n,
                solver: solver.as_str().to_string(),
                status: res.status.as_str().to_string(),
                iterations: res.iterations,
                wall_time_s: secs,
                f_final: res.f_final,
                grad_norm_final: res.grad_norm_final,
                factored_block_sizes: res.factorizations.histogram(),
                runtime_vs_newton: None,
                message,
            }
        }
        Err(e) => Row::failed(&problem.name, n, solver.as_str(), e.to_string()),
    }
}

fn starts(spec: &SuiteSpec) -> Vec<StartRecord> {
    spec.problems
        .iter()
        .filter_map(|p| {
            Some(StartRecord { problem: p.name.clone(), n: p.dimension().ok()?, x0: p.start().ok()? })
        })
        .collect()
}

/// Runs every (problem, solver) pair of `spec` on up to `parallel`
/// workers. Failed runs become rows with status `error`; rows are sorted
/// by (problem, n, solver).
pub fn run_suite(spec: &SuiteSpec, parallel: usize) -> Result<BenchmarkReport, BenchError> {
    spec.validate()?;
    if let Some(dir) = &spec.trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(&ProblemSpec, SolverKind)> =
        spec.problems.iter().flat_map(|p| spec.solvers.iter().map(move |&s| (p, s))).collect();
    let workers = worker_count(parallel);
    let mut rows: Vec<Row> = if workers == 1 {
        jobs.iter().map(|&(p, s)| row_for(spec, p, s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(|&(p, s)| row_for(spec, p, s)).collect())
    };
    rows.sort_by(|a, b| (&a.problem, a.n, &a.solver).cmp(&(&b.problem, b.n, &b.solver)));
    normalize_to_newton(&mut rows);
    Ok(BenchmarkReport {
        metadata: Metadata {
            eta: spec.eta,
            max_iterations: spec.max_iterations,
            starts: starts(spec),
            config: spec.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        rows,
    })
}

fn normalize_to_newton(rows: &mut [Row]) {
    let newton: BTreeMap<(String, usize), f64> = rows
        .iter()
        .filter(|r| r.solver == SolverKind::Newton.as_str() && r.status != "error")
        .map(|r| ((r.problem.clone(), r.n), r.wall_time_s))
        .collect();
    for r in rows.iter_mut() {
        if let Some(&t) = newton.get(&(r.problem.clone(), r.n)) {
            if t > 0.0 && r.status != "error" {
                r.runtime_vs_newton = Some(r.wall_time_s / t);
            }
        }
    }
}
