//! Analysis quantities for gradient-flow runs and closed-form oracles for
//! quadratic objectives.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::max_eigenvalue;
use crate::objective::Objective;
use crate::state::{StepKind, TraceRecord};

const BOUND_RTOL: f64 = 1e-9;

/// `½‖ẋ‖²`.
pub fn lyapunov_value(xdot: &DVector<f64>) -> f64 {
    0.5 * xdot.norm_squared()
}

/// Largest stable forward-Euler step at `x`, `2/λ_max(∇²f(x))`.
pub fn fe_stability_bound(obj: &dyn Objective, x: &DVector<f64>) -> Result<f64> {
    let est = max_eigenvalue(&obj.hessian(x), 1e-12, 100_000)?;
    if est.value <= 0.0 {
        return Err(Error::NotApplicable(format!(
            "largest Hessian eigenvalue {} is not positive",
            est.value
        )));
    }
    Ok(2.0 / est.value)
}

fn spd_eigen(q: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !q.is_square() || q.nrows() == 0 {
        return Err(Error::Contract("expected a non-empty square matrix".into()));
    }
    let sym = (q + q.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Contract("matrix is not positive definite".into()));
    }
    Ok(eig)
}

/// Exact solution of `ẋ = −(Qx + b)` at time `t` for SPD `Q`.
///
/// `t = ∞` returns the minimizer.
pub fn gradient_flow_oracle_quadratic(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    let eig = spd_eigen(q)?;
    if b.len() != q.nrows() || x0.len() != q.nrows() {
        return Err(Error::Contract("dimension mismatch".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Contract(format!("time must be nonnegative, got {t}")));
    }
    let v = &eig.eigenvectors;
    let x_star = -(v * DVector::from_fn(b.len(), |i, _| (v.column(i).dot(b)) / eig.eigenvalues[i]));
    let c = v.transpose() * (x0 - &x_star);
    let decayed = DVector::from_fn(c.len(), |i, _| c[i] * (-eig.eigenvalues[i] * t).exp());
    Ok(x_star + v * decayed)
}

/// Extreme eigenvalues of a quadratic's Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSpectrum {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl QuadraticSpectrum {
    pub fn from_matrix(q: &DMatrix<f64>) -> Result<Self> {
        let eig = spd_eigen(q)?;
        Ok(Self { lambda_min: eig.eigenvalues.min(), lambda_max: eig.eigenvalues.max() })
    }

    /// `[1/λ_max, 1/λ_min]`.
    pub fn step_interval(&self) -> (f64, f64) {
        (1.0 / self.lambda_max, 1.0 / self.lambda_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCheck {
    Pass,
    /// Inside the interval and equal (to `1e-9` relative) to an endpoint.
    PassWithEquality,
    Fail,
    NotChecked,
}

/// Checks every quiescence step against `1/λ_max ≤ Δt ≤ 1/λ_min`.
///
/// Without a spectrum (non-quadratic objective) and for steps that are not
/// quiescence steps, the entry is [`BoundCheck::NotChecked`].
pub fn step_bound_report(trace: &[TraceRecord], spectrum: Option<&QuadraticSpectrum>) -> Vec<BoundCheck> {
    trace
        .iter()
        .map(|rec| match spectrum {
            Some(sp) if rec.kind == StepKind::Quiescence => {
                let (lo, hi) = sp.step_interval();
                let dt = rec.dt;
                let near = |bound: f64| (dt - bound).abs() <= BOUND_RTOL * bound;
                if near(lo) || near(hi) {
                    BoundCheck::PassWithEquality
                } else if lo <= dt && dt <= hi {
                    BoundCheck::Pass
                } else {
                    BoundCheck::Fail
                }
            }
            _ => BoundCheck::NotChecked,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::QuadraticExample;
    use crate::objective::Quadratic;
    use crate::quiescence::{solve, OptiQConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn example_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[101.0, -100.0, -100.0, 100.0])
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(lyapunov_value(&DVector::zeros(3)), 0.0);
        assert_eq!(lyapunov_value(&DVector::from_vec(vec![1.0, 0.0])), 0.5);
        assert_eq!(lyapunov_value(&DVector::from_vec(vec![3.0, 4.0])), 12.5);
    }

    #[test]
    fn fe_bound_examples() {
        let bound = fe_stability_bound(&QuadraticExample, &DVector::zeros(2)).unwrap();
        assert_relative_eq!(bound, 4.0 / (201.0 + 40001f64.sqrt()), max_relative = 1e-10);
        assert!((bound - 0.009975).abs() < 1e-6);

        let id = Quadratic::new(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        assert_relative_eq!(fe_stability_bound(&id, &DVector::zeros(3)).unwrap(), 2.0, max_relative = 1e-12);

        let neg = Quadratic::new(-DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(matches!(fe_stability_bound(&neg, &DVector::zeros(2)), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn oracle_examples() {
        let q = example_matrix();
        let b = DVector::from_vec(vec![-1.0, 0.0]);
        let x0 = DVector::zeros(2);
        assert_relative_eq!(gradient_flow_oracle_quadratic(&q, &b, &x0, 0.0).unwrap(), x0, epsilon = 1e-14);
        let star = DVector::from_vec(vec![1.0, 1.0]);
        assert_relative_eq!(gradient_flow_oracle_quadratic(&q, &b, &x0, f64::INFINITY).unwrap(), star, epsilon = 1e-10);
        let x30 = gradient_flow_oracle_quadratic(&q, &b, &x0, 30.0).unwrap();
        // slow mode leaves e^{-λ_min·30} ≈ 3e-7 of the initial offset
        assert!((x30 - &star).norm() < 1e-6);
        assert!(gradient_flow_oracle_quadratic(&-q, &b, &x0, 1.0).is_err());
    }

    #[test]
    fn worked_example_steps_within_bounds() {
        let res = solve(&QuadraticExample, &DVector::zeros(2), &OptiQConfig::default()).unwrap();
        let sp = QuadraticSpectrum::from_matrix(&example_matrix()).unwrap();
        assert_eq!(step_bound_report(&res.trace, Some(&sp)), vec![BoundCheck::Pass, BoundCheck::Pass]);
        assert_eq!(step_bound_report(&res.trace, None), vec![BoundCheck::NotChecked; 2]);
    }

    #[test]
    fn scalar_step_hits_bound_exactly() {
        let q = DMatrix::from_element(1, 1, 4.0);
        let f = Quadratic::new(q.clone(), DVector::from_element(1, -2.0)).unwrap();
        let res = solve(&f, &DVector::zeros(1), &OptiQConfig::default()).unwrap();
        let sp = QuadraticSpectrum::from_matrix(&q).unwrap();
        assert_eq!(step_bound_report(&res.trace, Some(&sp)), vec![BoundCheck::PassWithEquality]);
    }

    proptest! {
        #[test]
        fn lyapunov_positive_off_origin(v in proptest::collection::vec(-1e3f64..1e3, 1..8)) {
            let x = DVector::from_vec(v);
            let val = lyapunov_value(&x);
            prop_assert!(val >= 0.0);
            prop_assert_eq!(val == 0.0, x.iter().all(|c| *c == 0.0));
        }

        #[test]
        fn oracle_satisfies_the_flow(
            n in 1usize..5,
            seed in proptest::collection::vec(-1.0f64..1.0, 30),
            t in 0.05f64..3.0,
        ) {
            let a = DMatrix::from_fn(n, n, |i, j| seed[i * 5 + j]);
            let q = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
            let b = DVector::from_fn(n, |i, _| seed[25 + i]);
            let x0 = DVector::from_fn(n, |i, _| seed[20 + i] * 3.0);
            let h = 1e-5;
            let plus = gradient_flow_oracle_quadratic(&q, &b, &x0, t + h).unwrap();
            let minus = gradient_flow_oracle_quadratic(&q, &b, &x0, t - h).unwrap();
            let x = gradient_flow_oracle_quadratic(&q, &b, &x0, t).unwrap();
            let deriv = (plus - minus) / (2.0 * h);
            let rhs = -(&q * &x + &b);
            prop_assert!((deriv - &rhs).norm() <= 1e-6 * (1.0 + rhs.norm()));
        }
    }
}
