//! Comparison methods: damped Newton, BFGS and SR1 with Armijo
//! backtracking, forward-Euler gradient descent, and an adaptive
//! Bogacki–Shampine integrator for gradient-flow ground truth.

pub mod euler;
pub mod line_search;
pub mod newton;
pub mod quasi_newton;
pub mod reference;

use std::time::Instant;

use nalgebra::DVector;

pub use euler::{forward_euler_solve, StepPolicy};
pub use line_search::{armijo_backtrack, LineSearchConfig};
pub use newton::newton_damped_solve;
pub use quasi_newton::{bfgs_solve, sr1_solve, sr1_solve_detailed, BfgsState, Sr1State};
pub use reference::{reference_integrate, Trajectory};

use crate::error::{Error, Result};
use crate::linalg::FactorizationLog;
use crate::objective::Objective;
use crate::quiescence::DIVERGENCE_LIMIT;
use crate::state::{SolverResult, Status, StepKind, TraceRecord};

pub(crate) fn check_start(obj: &dyn Objective, x0: &DVector<f64>, eta: f64, max_iterations: usize) -> Result<()> {
    if x0.len() != obj.dimension() {
        return Err(Error::config(format!(
            "start point has {} entries, objective expects {}",
            x0.len(),
            obj.dimension()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("start point is not finite"));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::config(format!("eta must be positive, got {eta}")));
    }
    if max_iterations == 0 {
        return Err(Error::config("max_iterations must be positive"));
    }
    Ok(())
}

/// Iterate bookkeeping shared by the line-search and Euler methods.
pub(crate) struct Run<'a> {
    obj: &'a dyn Objective,
    started: Instant,
    pub x: DVector<f64>,
    pub f: f64,
    pub g: DVector<f64>,
    pub t: f64,
    pub trace: Vec<TraceRecord>,
    pub log: FactorizationLog,
}

impl<'a> Run<'a> {
    pub fn new(obj: &'a dyn Objective, x0: &DVector<f64>) -> Self {
        let x = x0.clone();
        Self {
            obj,
            started: Instant::now(),
            f: obj.value(&x),
            g: obj.gradient(&x),
            x,
            t: 0.0,
            trace: Vec::new(),
            log: FactorizationLog::new(),
        }
    }

    pub fn iteration(&self) -> usize {
        self.trace.len()
    }

    /// Terminal status before taking another step, if any.
    pub fn check(&self, eta: f64, max_iterations: usize) -> Option<Status> {
        if !self.f.is_finite() || self.g.iter().any(|v| !v.is_finite()) {
            Some(Status::NumericalFailure)
        } else if self.g.norm_squared() <= eta {
            Some(Status::Converged)
        } else if self.iteration() >= max_iterations {
            Some(Status::MaxIterations)
        } else {
            None
        }
    }

    /// Moves to `x + step·direction`; returns `false` if the new iterate
    /// left the divergence bound.
    pub fn advance(&mut self, direction: &DVector<f64>, step: f64, kind: StepKind, factored_size: Option<usize>) -> bool {
        let energy = 0.5 * self.g.norm_squared();
        self.x += direction * step;
        self.t += step;
        self.f = self.obj.value(&self.x);
        let diverged = !self.f.is_finite() || self.f.abs() > DIVERGENCE_LIMIT || !(self.x.norm() <= DIVERGENCE_LIMIT);
        if !diverged {
            self.g = self.obj.gradient(&self.x);
        }
        self.trace.push(TraceRecord {
            iteration: self.trace.len() + 1,
            t: self.t,
            dt: step,
            f_value: self.f,
            grad_norm: if diverged { f64::NAN } else { self.g.norm() },
            quiescent_count: 0,
            promoted_count: 0,
            demoted_count: 0,
            factored_size,
            nq_velocity_energy: energy,
            kind,
        });
        !diverged
    }

    pub fn finish(self, status: Status, message: Option<String>) -> SolverResult {
        SolverResult {
            status,
            grad_norm_final: self.g.norm(),
            iterations: self.trace.len(),
            wall_time: self.started.elapsed(),
            x_final: self.x,
            f_final: self.f,
            trace: self.trace,
            factorizations: self.log,
            message,
        }
    }
}

/// Line search along `direction`, falling back once to steepest descent.
///
/// Returns the direction actually used, the accepted step, and whether the
/// fallback fired. A second failure is a numerical failure.
pub(crate) fn search_with_reset(
    run: &Run<'_>,
    direction: DVector<f64>,
    cfg: &LineSearchConfig,
) -> Result<(DVector<f64>, f64, bool)> {
    let obj = run.obj;
    let steepest = -&run.g;
    let descent = direction.dot(&run.g) < 0.0;
    if descent {
        match line_search::armijo_backtrack_with(obj, &run.x, run.f, &run.g, &direction, cfg) {
            Ok(alpha) => return Ok((direction, alpha, false)),
            Err(Error::LineSearchFailure { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    match line_search::armijo_backtrack_with(obj, &run.x, run.f, &run.g, &steepest, cfg) {
        Ok(alpha) => Ok((steepest, alpha, true)),
        Err(e) => Err(Error::numerical(format!("line search failed along steepest descent: {e}"))),
    }
}
