//! Quiescence-driven second-order optimization.
//!
//! The central solver ([`quiescence::solve`]) integrates the gradient flow
//! `ẋ = −∇f(x)` with forward-Euler steps whose size equals the smallest
//! estimated first-order time constant among the still-active variables.
//! Each step pushes the fastest variables into quiescence (`ẍ = 0`), after
//! which they are slaved to the remaining ones through the principal block of
//! the Hessian. Only that block is ever factorized.
//!
//! The crate also ships the comparison methods used to benchmark it (damped
//! Newton, BFGS, SR1, fixed/bounded forward Euler and an adaptive
//! Bogacki–Shampine reference integrator), a closed-form test-function suite
//! and a handful of analysis helpers.
//!
//! ```
//! use optiq::functions::make_test_function;
//! use optiq::quiescence::{solve, OptiQConfig};
//! use nalgebra::DVector;
//!
//! let f = make_test_function("quadratic_example", None).unwrap();
//! let res = solve(f.as_ref(), &DVector::from_vec(vec![0.0, 0.0]), &OptiQConfig::default()).unwrap();
//! assert_eq!(res.iterations, 2);
//! ```

// NaN-aware comparisons like `!(x <= tol)` are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod diagnostics;
pub mod error;
pub mod functions;
pub mod linalg;
pub mod objective;
pub mod quiescence;
pub mod state;

pub use error::{Error, Result};
pub use objective::Objective;
pub use state::{SolverResult, SolverState, Status, StepKind, TraceRecord};
