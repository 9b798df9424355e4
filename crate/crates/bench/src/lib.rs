//! Suite runner, report serialization and command-line front end for the
//! `optiq` solvers.
//!
//! A suite is a flat JSON document listing problems and solvers; every
//! (problem, solver) pair becomes one row of a [`BenchmarkReport`]:
//!
//! ```json
//! {
//!   "problems": [{ "name": "booth" }, { "name": "extended_wood", "n": 256 }],
//!   "solvers": ["optiq", "newton", "bfgs", "sr1"],
//!   "eta": 1e-12,
//!   "max_iterations": 10000
//! }
//! ```

// NaN-aware comparisons like `!(x <= tol)` are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod report;
pub mod runner;
pub mod suite;

pub use error::BenchError;
pub use report::{emit_report, write_trace_csv, BenchmarkReport, Format, Metadata, Row};
pub use runner::{run_one, run_suite, worker_count};
pub use suite::{ProblemSpec, SolverKind, SuiteSpec};
