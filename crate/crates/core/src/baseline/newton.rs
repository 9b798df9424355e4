//! Damped Newton–Raphson with Armijo backtracking.

use nalgebra::DVector;

use super::line_search::LineSearchConfig;
use super::{check_start, search_with_reset, Run};
use crate::error::Result;
use crate::linalg::solve_general;
use crate::objective::Objective;
use crate::state::{SolverResult, Status, StepKind};

/// Newton direction from a full dense factorization of `∇²f` each
/// iteration; steepest descent when the factorization fails or the Newton
/// direction does not descend. Stops when `‖∇f‖² ≤ η`.
pub fn newton_damped_solve(
    obj: &dyn Objective,
    x0: &DVector<f64>,
    eta: f64,
    max_iterations: usize,
    ls: &LineSearchConfig,
) -> Result<SolverResult> {
    check_start(obj, x0, eta, max_iterations)?;
    ls.validate()?;
    let mut run = Run::new(obj, x0);
    loop {
        if let Some(status) = run.check(eta, max_iterations) {
            return Ok(run.finish(status, None));
        }
        let h = obj.hessian(&run.x);
        let n = h.nrows();
        let direction = solve_general(&h, &-&run.g, &mut run.log)
            .filter(|d| d.dot(&run.g) < 0.0)
            .unwrap_or_else(|| -&run.g);
        let (d, alpha, _) = match search_with_reset(&run, direction, ls) {
            Ok(step) => step,
            Err(e) => return Ok(run.finish(Status::NumericalFailure, Some(e.to_string()))),
        };
        if !run.advance(&d, alpha, StepKind::LineSearch, Some(n)) {
            return Ok(run.finish(Status::Diverged, Some("iterate left the divergence bound".into())));
        }
    }
}
