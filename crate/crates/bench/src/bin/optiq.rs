use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use optiq::diagnostics::{fe_stability_bound, lyapunov_value};
use optiq::quiescence::{initial_time_constants, OptiQConfig};
use optiq_bench::{emit_report, run_one, run_suite, write_trace_csv, BenchError, Format, ProblemSpec, SolverKind, SuiteSpec};

#[derive(Parser)]
#[command(name = "optiq", version, about = "Quiescence-driven optimization and baseline benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one test problem.
    Solve {
        #[arg(long)]
        problem: String,
        /// Dimension for variable-size problems.
        #[arg(long)]
        n: Option<usize>,
        /// Start point, comma separated (default: the problem's standard start).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// optiq, newton, bfgs, sr1 or forward_euler.
        #[arg(long, default_value = "optiq")]
        solver: String,
        /// Convergence tolerance on the squared gradient norm.
        #[arg(long, default_value = "1e-12")]
        eta: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// gradient_drift or trajectory_residual.
        #[arg(long, default_value = "gradient_drift")]
        dequiescence: String,
        /// Safety factor of the bound-based forward-Euler step.
        #[arg(long, default_value_t = 0.9)]
        fe_safety: f64,
        /// Fixed forward-Euler step (overrides --fe-safety).
        #[arg(long)]
        fe_dt: Option<f64>,
        /// Write the per-iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a JSON suite and write a report.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Worker threads (capped by OPTIQ_THREADS).
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Print stability and time-scale diagnostics at a point.
    Diagnose {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "inadmissible".to_string(), |t| format!("{t:e}"))
}

fn run(cli: Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::Solve { problem, n, x0, solver, eta, max_iters, dequiescence, fe_safety, fe_dt, trace } => {
            let solver: SolverKind = solver.parse()?;
            let mut spec = SuiteSpec::new(vec![ProblemSpec { name: problem, n, x0 }], vec![solver]);
            spec.eta = eta;
            spec.max_iterations = max_iters;
            spec.dequiescence = dequiescence;
            spec.fe_safety = fe_safety;
            spec.fe_dt = fe_dt;
            spec.validate()?;
            let (res, secs) = run_one(&spec, &spec.problems[0], solver)?;
            if let Some(path) = trace {
                write_trace_csv(&res.trace, &path)?;
            }
            println!("problem: {}", spec.problems[0].name);
            println!("solver: {solver}");
            println!("status: {}", res.status);
            println!("iterations: {}", res.iterations);
            println!("f_final: {:e}", res.f_final);
            println!("grad_norm_final: {:e}", res.grad_norm_final);
            let x: Vec<String> = res.x_final.iter().map(|v| format!("{v}")).collect();
            println!("x_final: {}", x.join(","));
            println!("wall_time_s: {secs:e}");
            if let Some(m) = &res.message {
                println!("message: {m}");
            }
            Ok(res.converged())
        }
        Command::Bench { suite, out, format, parallel } => {
            let format: Format = format.parse()?;
            let spec = SuiteSpec::load(&suite)?;
            let report = run_suite(&spec, parallel)?;
            emit_report(&report, format, &out)?;
            let failed = report.rows.iter().filter(|r| !r.converged()).count();
            println!("{} runs, {} not converged, report written to {}", report.rows.len(), failed, out.display());
            Ok(failed == 0)
        }
        Command::Diagnose { problem, n, x0 } => {
            let spec = ProblemSpec { name: problem, n, x0 };
            let dim = spec.dimension()?;
            let obj = spec.problem()?.build(Some(dim))?;
            let x = DVector::from_vec(spec.start()?);
            let g = obj.gradient(&x);
            println!("f: {:e}", obj.value(&x));
            println!("grad_norm: {:e}", g.norm());
            println!("lyapunov: {:e}", lyapunov_value(&-&g));
            match fe_stability_bound(obj.as_ref(), &x) {
                Ok(b) => println!("fe_bound: {b:e}"),
                Err(e) => println!("fe_bound: not applicable ({e})"),
            }
            let floor = OptiQConfig::default().velocity_floor;
            let taus: Vec<String> =
                initial_time_constants(obj.as_ref(), &x, floor)?.into_iter().map(fmt_opt).collect();
            println!("time_constants: {}", taus.join(","));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
