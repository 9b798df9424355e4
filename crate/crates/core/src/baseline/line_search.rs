//! Backtracking line search on the Armijo sufficient-decrease condition.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// Sufficient-decrease constant `c₁ ∈ (0, 1)`.
    pub c1: f64,
    /// Backtracking factor in `(0, 1)`.
    pub shrink: f64,
    pub alpha0: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { c1: 1e-4, shrink: 0.5, alpha0: 1.0, max_backtracks: 60 }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.c1) || !unit(self.shrink) || !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::Config(format!("invalid line search settings {self:?}")));
        }
        Ok(())
    }

    /// The `k`-th trial step `α₀·shrinkᵏ`.
    pub fn trial(&self, k: usize) -> f64 {
        self.alpha0 * self.shrink.powi(k as i32)
    }
}

/// First `α ∈ {α₀, α₀s, α₀s², …}` with
/// `f(x + αd) ≤ f(x) + c₁·α·∇f(x)ᵀd`.
///
/// `direction` must be a descent direction.
pub fn armijo_backtrack(obj: &dyn Objective, x: &DVector<f64>, direction: &DVector<f64>, cfg: &LineSearchConfig) -> Result<f64> {
    armijo_backtrack_with(obj, x, obj.value(x), &obj.gradient(x), direction, cfg)
}

/// [`armijo_backtrack`] with `f(x)` and `∇f(x)` already at hand.
pub fn armijo_backtrack_with(
    obj: &dyn Objective,
    x: &DVector<f64>,
    fx: f64,
    gradient: &DVector<f64>,
    direction: &DVector<f64>,
    cfg: &LineSearchConfig,
) -> Result<f64> {
    let slope = gradient.dot(direction);
    if !(slope < 0.0) {
        return Err(Error::Contract(format!("not a descent direction (slope {slope})")));
    }
    for k in 0..=cfg.max_backtracks {
        let alpha = cfg.trial(k);
        let trial = x + direction * alpha;
        // NaN never satisfies the inequality, so it backtracks too.
        if obj.value(&trial) <= fx + cfg.c1 * alpha * slope {
            return Ok(alpha);
        }
    }
    Err(Error::LineSearchFailure { backtracks: cfg.max_backtracks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::Rosenbrock;
    use crate::objective::Quadratic;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn unit_step_on_scalar_quadratic() {
        let f = Quadratic::new(DMatrix::identity(1, 1), DVector::zeros(1)).unwrap();
        let a = armijo_backtrack(&f, &DVector::from_element(1, 1.0), &DVector::from_element(1, -1.0), &LineSearchConfig::default());
        assert_eq!(a.unwrap(), 1.0);
    }

    #[test]
    fn newton_step_accepted_on_quadratic() {
        let q = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = Quadratic::new(q.clone(), DVector::from_vec(vec![1.0, -2.0])).unwrap();
        let x = DVector::from_vec(vec![3.0, 5.0]);
        let d = -q.lu().solve(&f.gradient(&x)).unwrap();
        assert_eq!(armijo_backtrack(&f, &x, &d, &LineSearchConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn rosenbrock_step_is_first_acceptable_on_grid() {
        let cfg = LineSearchConfig::default();
        let x = DVector::from_vec(vec![-1.2, 1.0]);
        let g = Rosenbrock.gradient(&x);
        let d = -&g;
        let alpha = armijo_backtrack(&Rosenbrock, &x, &d, &cfg).unwrap();
        let fx = Rosenbrock.value(&x);
        let ok = |a: f64| Rosenbrock.value(&(&x + &d * a)) <= fx + cfg.c1 * a * g.dot(&d);
        assert!(ok(alpha));
        // exhaustive scan of the geometric grid finds the same first hit
        let first = (0..=cfg.max_backtracks).map(|k| cfg.trial(k)).find(|&a| ok(a)).unwrap();
        assert_eq!(first, alpha);
        assert!(!ok(alpha / cfg.shrink) || alpha == cfg.alpha0);
    }

    #[test]
    fn rejects_ascent_direction_and_reports_exhaustion() {
        let f = Quadratic::new(DMatrix::identity(1, 1), DVector::zeros(1)).unwrap();
        let x = DVector::from_element(1, 1.0);
        assert!(matches!(
            armijo_backtrack(&f, &x, &DVector::from_element(1, 1.0), &LineSearchConfig::default()),
            Err(Error::Contract(_))
        ));
        let cfg = LineSearchConfig { max_backtracks: 2, alpha0: 1e6, ..Default::default() };
        assert_eq!(
            armijo_backtrack(&f, &x, &DVector::from_element(1, -1.0), &cfg),
            Err(Error::LineSearchFailure { backtracks: 2 })
        );
    }

    proptest! {
        #[test]
        fn accepted_steps_satisfy_armijo(
            entries in proptest::collection::vec(-2.0f64..2.0, 9),
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            c1 in 1e-5f64..0.5,
            shrink in 0.1f64..0.9,
        ) {
            let a = DMatrix::from_row_slice(3, 3, &entries);
            let q = &a * a.transpose() + DMatrix::identity(3, 3) * 0.1;
            let f = Quadratic::new(q, DVector::from_vec(vec![1.0, 0.0, -1.0])).unwrap();
            let x = DVector::from_vec(x);
            let g = f.gradient(&x);
            prop_assume!(g.norm() > 1e-8);
            let cfg = LineSearchConfig { c1, shrink, ..Default::default() };
            let d = -&g;
            let alpha = armijo_backtrack(&f, &x, &d, &cfg).unwrap();
            prop_assert!(f.value(&(&x + &d * alpha)) <= f.value(&x) + c1 * alpha * g.dot(&d));
        }

        #[test]
        fn accepted_steps_satisfy_armijo_on_rosenbrock(x0 in -2.0f64..2.0, x1 in -1.0f64..3.0) {
            let x = DVector::from_vec(vec![x0, x1]);
            let g = Rosenbrock.gradient(&x);
            prop_assume!(g.norm() > 1e-8);
            let cfg = LineSearchConfig::default();
            let d = -&g;
            let alpha = armijo_backtrack(&Rosenbrock, &x, &d, &cfg).unwrap();
            prop_assert!(Rosenbrock.value(&(&x + &d * alpha)) <= Rosenbrock.value(&x) + cfg.c1 * alpha * g.dot(&d));
        }
    }
}
