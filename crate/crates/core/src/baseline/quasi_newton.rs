//! BFGS (inverse-Hessian form) and SR1 (Hessian form), both with Armijo
//! backtracking.

use nalgebra::{DMatrix, DVector};

use super::line_search::LineSearchConfig;
use super::{check_start, search_with_reset, Run};
use crate::error::Result;
use crate::linalg::solve_general;
use crate::objective::Objective;
use crate::state::{SolverResult, Status, StepKind};

/// Inverse-Hessian estimate maintained by BFGS.
#[derive(Debug, Clone, PartialEq)]
pub struct BfgsState {
    pub inverse_hessian: DMatrix<f64>,
}

impl BfgsState {
    pub fn identity(n: usize) -> Self {
        Self { inverse_hessian: DMatrix::identity(n, n) }
    }

    /// `B⁺ = (I−ρsyᵀ)B(I−ρysᵀ) + ρssᵀ`, `ρ = 1/yᵀs`. Skipped (returns
    /// `false`) when `yᵀs ≤ 1e-10·‖y‖‖s‖`.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        let ys = y.dot(s);
        if !(ys > 1e-10 * y.norm() * s.norm()) {
            return false;
        }
        let rho = 1.0 / ys;
        let by = &self.inverse_hessian * y;
        let y_by = y.dot(&by);
        // Expanded product form, O(n²).
        let b = &mut self.inverse_hessian;
        b.ger(-rho, s, &by, 1.0);
        b.ger(-rho, &by, s, 1.0);
        b.ger(rho * rho * y_by + rho, s, s, 1.0);
        let sym = (&*b + b.transpose()) * 0.5;
        *b = sym;
        true
    }

    pub fn direction(&self, gradient: &DVector<f64>) -> DVector<f64> {
        -(&self.inverse_hessian * gradient)
    }
}

/// Hessian estimate maintained by SR1.
#[derive(Debug, Clone, PartialEq)]
pub struct Sr1State {
    pub hessian: DMatrix<f64>,
    pub updates: usize,
}

impl Sr1State {
    pub fn identity(n: usize) -> Self {
        Self { hessian: DMatrix::identity(n, n), updates: 0 }
    }

    /// `H⁺ = H + rrᵀ/(rᵀs)` with `r = y − Hs`. Skipped (returns `false`)
    /// when `|rᵀs| ≤ 1e-8·‖s‖‖r‖`.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        let r = y - &self.hessian * s;
        let denom = r.dot(s);
        if !(denom.abs() > 1e-8 * s.norm() * r.norm()) {
            return false;
        }
        self.hessian.ger(1.0 / denom, &r, &r, 1.0);
        self.updates += 1;
        true
    }
}

pub fn bfgs_solve(
    obj: &dyn Objective,
    x0: &DVector<f64>,
    eta: f64,
    max_iterations: usize,
    ls: &LineSearchConfig,
) -> Result<SolverResult> {
    check_start(obj, x0, eta, max_iterations)?;
    ls.validate()?;
    let mut run = Run::new(obj, x0);
    let mut state = BfgsState::identity(x0.len());
    loop {
        if let Some(status) = run.check(eta, max_iterations) {
            return Ok(run.finish(status, None));
        }
        let mut direction = state.direction(&run.g);
        if !(direction.dot(&run.g) < 0.0) {
            state = BfgsState::identity(x0.len());
            direction = -&run.g;
        }
        let (d, alpha, reset) = match search_with_reset(&run, direction, ls) {
            Ok(step) => step,
            Err(e) => return Ok(run.finish(Status::NumericalFailure, Some(e.to_string()))),
        };
        if reset {
            state = BfgsState::identity(x0.len());
        }
        let g_old = run.g.clone();
        if !run.advance(&d, alpha, StepKind::LineSearch, None) {
            return Ok(run.finish(Status::Diverged, Some("iterate left the divergence bound".into())));
        }
        state.update(&(&d * alpha), &(&run.g - g_old));
    }
}

pub fn sr1_solve(
    obj: &dyn Objective,
    x0: &DVector<f64>,
    eta: f64,
    max_iterations: usize,
    ls: &LineSearchConfig,
) -> Result<SolverResult> {
    sr1_solve_detailed(obj, x0, eta, max_iterations, ls).map(|(res, _)| res)
}

/// [`sr1_solve`] that also hands back the final Hessian estimate.
pub fn sr1_solve_detailed(
    obj: &dyn Objective,
    x0: &DVector<f64>,
    eta: f64,
    max_iterations: usize,
    ls: &LineSearchConfig,
) -> Result<(SolverResult, Sr1State)> {
    check_start(obj, x0, eta, max_iterations)?;
    ls.validate()?;
    let n = x0.len();
    let mut run = Run::new(obj, x0);
    let mut state = Sr1State::identity(n);
    loop {
        if let Some(status) = run.check(eta, max_iterations) {
            return Ok((run.finish(status, None), state));
        }
        let direction = solve_general(&state.hessian, &-&run.g, &mut run.log)
            .filter(|d| d.dot(&run.g) < 0.0)
            .unwrap_or_else(|| -&run.g);
        let (d, alpha, _) = match search_with_reset(&run, direction, ls) {
            Ok(step) => step,
            Err(e) => return Ok((run.finish(Status::NumericalFailure, Some(e.to_string())), state)),
        };
        let g_old = run.g.clone();
        if !run.advance(&d, alpha, StepKind::LineSearch, Some(n)) {
            return Ok((run.finish(Status::Diverged, Some("iterate left the divergence bound".into())), state));
        }
        state.update(&(&d * alpha), &(&run.g - g_old));
    }
}
