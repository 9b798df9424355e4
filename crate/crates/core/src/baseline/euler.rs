//! Explicit Euler discretization of the gradient flow, `x ← x − Δt·∇f(x)`.

use nalgebra::DVector;

use super::{check_start, Run};
use crate::error::{Error, Result};
use crate::linalg::max_eigenvalue;
use crate::objective::Objective;
use crate::state::{SolverResult, Status, StepKind};

const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    Fixed(f64),
    /// `Δt = safety·2/λ_max(∇²f(x))`, re-evaluated every iteration.
    ///
    /// Where the Hessian has no positive eigenvalue the previous step is
    /// reused (or `safety` on the first iteration).
    BoundBased { safety: f64 },
}

impl StepPolicy {
    fn validate(&self) -> Result<()> {
        match *self {
            StepPolicy::Fixed(dt) if !(dt.is_finite() && dt > 0.0) => {
                Err(Error::config(format!("fixed step must be positive, got {dt}")))
            }
            StepPolicy::BoundBased { safety } if !(safety.is_finite() && safety > 0.0) => {
                Err(Error::config(format!("safety factor must be positive, got {safety}")))
            }
            _ => Ok(()),
        }
    }
}

pub fn forward_euler_solve(
    obj: &dyn Objective,
    x0: &DVector<f64>,
    policy: StepPolicy,
    eta: f64,
    max_iterations: usize,
) -> Result<SolverResult> {
    check_start(obj, x0, eta, max_iterations)?;
    policy.validate()?;
    let mut run = Run::new(obj, x0);
    let mut previous: Option<f64> = None;
    loop {
        if let Some(status) = run.check(eta, max_iterations) {
            return Ok(run.finish(status, None));
        }
        let dt = match policy {
            StepPolicy::Fixed(dt) => dt,
            StepPolicy::BoundBased { safety } => {
                let est = match max_eigenvalue(&obj.hessian(&run.x), EIGEN_TOL, EIGEN_MAX_ITER) {
                    Ok(est) => est,
                    Err(e) => return Ok(run.finish(Status::NumericalFailure, Some(e.to_string()))),
                };
                if est.value > 0.0 {
                    safety * 2.0 / est.value
                } else {
                    previous.unwrap_or(safety)
                }
            }
        };
        previous = Some(dt);
        let direction = -&run.g;
        if !run.advance(&direction, dt, StepKind::ForwardEuler, None) {
            return Ok(run.finish(Status::Diverged, Some("iterate left the divergence bound".into())));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::QuadraticExample;
    use crate::objective::Quadratic;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn lambda_max() -> f64 {
        (201.0 + 40001f64.sqrt()) / 2.0
    }

    #[test]
    fn half_bound_converges_slowly() {
        let dt = 0.5 * 2.0 / lambda_max();
        assert!((dt - 0.004988).abs() < 1e-6);
        let res = forward_euler_solve(&QuadraticExample, &DVector::zeros(2), StepPolicy::Fixed(dt), 1e-12, 10_000).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(res.iterations > 1000, "{}", res.iterations);
    }

    #[test]
    fn beyond_bound_diverges() {
        let dt = 1.2 * 2.0 / lambda_max();
        let res = forward_euler_solve(&QuadraticExample, &DVector::zeros(2), StepPolicy::Fixed(dt), 1e-12, 10_000).unwrap();
        assert_eq!(res.status, Status::Diverged);
    }

    #[test]
    fn minimizer_start_takes_no_steps() {
        let x = DVector::from_vec(vec![1.0, 1.0]);
        for policy in [StepPolicy::Fixed(3.0), StepPolicy::BoundBased { safety: 0.9 }] {
            let res = forward_euler_solve(&QuadraticExample, &x, policy, 1e-12, 10).unwrap();
            assert_eq!(res.iterations, 0);
            assert!(res.converged());
        }
    }

    #[test]
    fn rejects_bad_policy() {
        let x = DVector::zeros(2);
        assert!(matches!(
            forward_euler_solve(&QuadraticExample, &x, StepPolicy::Fixed(0.0), 1e-12, 10),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            forward_euler_solve(&QuadraticExample, &x, StepPolicy::BoundBased { safety: -1.0 }, 1e-12, 10),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn bound_based_never_diverges_on_convex_quadratics(
            n in 1usize..6,
            seed in proptest::collection::vec(-1.0f64..1.0, 36),
            shift in 0.05f64..2.0,
            safety in 0.1f64..0.99,
        ) {
            let a = DMatrix::from_fn(n, n, |i, j| seed[i * 6 + j]);
            let q = &a * a.transpose() + DMatrix::identity(n, n) * shift;
            let b = DVector::from_fn(n, |i, _| seed[30 + i]);
            let f = Quadratic::new(q, b).unwrap();
            let res = forward_euler_solve(&f, &DVector::zeros(n), StepPolicy::BoundBased { safety }, 1e-12, 300).unwrap();
            prop_assert!(matches!(res.status, Status::Converged | Status::MaxIterations));
            let g0 = f.gradient(&DVector::zeros(n)).norm();
            prop_assert!(res.grad_norm_final <= g0 * (1.0 + 1e-9));
        }
    }
}
