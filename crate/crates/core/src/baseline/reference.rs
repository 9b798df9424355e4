//! Adaptive Bogacki–Shampine 3(2) integration of `ẋ = −∇f(x)`, used as
//! ground truth for the gradient-flow trajectory.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objective::Objective;

const MIN_STEP: f64 = 1e-14;
const SAFETY: f64 = 0.9;
const PI_ALPHA: f64 = 0.7 / 3.0;
const PI_BETA: f64 = 0.4 / 3.0;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Accepted `(t, x)` samples, starting with `(0, x0)` and ending at `t_end`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<(f64, DVector<f64>)>,
    pub rejected_steps: usize,
    pub gradient_evaluations: usize,
}

impl Trajectory {
    pub fn endpoint(&self) -> &DVector<f64> {
        &self.samples.last().expect("trajectory always holds x0").1
    }

    pub fn accepted_steps(&self) -> usize {
        self.samples.len() - 1
    }
}

struct Flow<'a> {
    obj: &'a dyn Objective,
    evaluations: usize,
}

impl Flow<'_> {
    fn eval(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.evaluations += 1;
        let v = -self.obj.gradient(x);
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Error::numerical("non-finite gradient during integration"))
        }
    }
}

fn error_norm(err: &DVector<f64>, y: &DVector<f64>, y_new: &DVector<f64>, rel_tol: f64, abs_tol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = (0..err.len())
        .map(|i| {
            let sc = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn scaled_norm(v: &DVector<f64>, y: &DVector<f64>, rel_tol: f64, abs_tol: f64) -> f64 {
    error_norm(v, y, y, rel_tol, abs_tol)
}

fn initial_step(
    flow: &mut Flow<'_>,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let d0 = scaled_norm(y0, y0, rel_tol, abs_tol);
    let d1 = scaled_norm(f0, y0, rel_tol, abs_tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = y0 + f0 * h0;
    let f1 = flow.eval(&y1)?;
    let d2 = scaled_norm(&(f1 - f0), y0, rel_tol, abs_tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 3.0)
    };
    Ok((100.0 * h0).min(h1))
}

pub fn reference_integrate(
    obj: &dyn Objective,
    x0: &DVector<f64>,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory> {
    if x0.len() != obj.dimension() {
        return Err(Error::config("start point dimension does not match the objective"));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::config(format!("t_end must be finite and nonnegative, got {t_end}")));
    }
    if !(rel_tol > 0.0 && abs_tol > 0.0) {
        return Err(Error::config("tolerances must be positive"));
    }
    let mut flow = Flow { obj, evaluations: 0 };
    let mut samples = vec![(0.0, x0.clone())];
    let mut rejected = 0;
    if t_end == 0.0 {
        return Ok(Trajectory { samples, rejected_steps: 0, gradient_evaluations: 0 });
    }

    let mut t = 0.0;
    let mut y = x0.clone();
    let mut k1 = flow.eval(&y)?;
    let mut h = initial_step(&mut flow, &y, &k1, rel_tol, abs_tol)?;
    let mut err_prev = 1.0f64;
    let mut last_rejected = false;

    while t < t_end {
        if h < MIN_STEP {
            return Err(Error::numerical(format!("step size underflow at t = {t}")));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let k2 = flow.eval(&(&y + &k1 * (0.5 * h)))?;
        let k3 = flow.eval(&(&y + &k2 * (0.75 * h)))?;
        let y_new = &y + (&k1 * (2.0 / 9.0) + &k2 * (1.0 / 3.0) + &k3 * (4.0 / 9.0)) * h;
        let k4 = flow.eval(&y_new)?;
        let err = (&k1 * (2.0 / 9.0 - 7.0 / 24.0) + &k2 * (1.0 / 3.0 - 0.25) + &k3 * (4.0 / 9.0 - 1.0 / 3.0)
            - &k4 * 0.125)
            * h;
        let e = error_norm(&err, &y, &y_new, rel_tol, abs_tol);

        if e <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            k1 = k4;
            samples.push((t, y.clone()));
            let factor = if e == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * e.powf(-PI_ALPHA) * err_prev.powf(PI_BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h *= if last_rejected { factor.min(1.0) } else { factor };
            err_prev = e.max(1e-4);
            last_rejected = false;
        } else {
            rejected += 1;
            h *= (SAFETY * e.powf(-1.0 / 3.0)).max(MIN_FACTOR);
            last_rejected = true;
        }
    }
    Ok(Trajectory { samples, rejected_steps: rejected, gradient_evaluations: flow.evaluations })
}
