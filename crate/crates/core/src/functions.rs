//! Built-in test functions with closed-form gradients and Hessians.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objective::{LeastSquares, Objective};

/// Identifiers of the built-in problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Problem {
    /// `½(x₁−1)² + 50(x₁−x₂)²`, minimizer `(1, 1)`.
    QuadraticExample,
    Booth,
    ThreeHump,
    Himmelblau,
    Rosenbrock,
    ExtendedWood,
    LeastSquaresSynthetic,
}

impl Problem {
    pub const ALL: [Problem; 7] = [
        Problem::QuadraticExample,
        Problem::Booth,
        Problem::ThreeHump,
        Problem::Himmelblau,
        Problem::Rosenbrock,
        Problem::ExtendedWood,
        Problem::LeastSquaresSynthetic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Problem::QuadraticExample => "quadratic_example",
            Problem::Booth => "booth",
            Problem::ThreeHump => "three_hump",
            Problem::Himmelblau => "himmelblau",
            Problem::Rosenbrock => "rosenbrock",
            Problem::ExtendedWood => "extended_wood",
            Problem::LeastSquaresSynthetic => "least_squares_synthetic",
        }
    }

    /// `None` for the fixed two-dimensional functions.
    pub fn default_dimension(self) -> Option<usize> {
        match self {
            Problem::ExtendedWood => Some(4),
            Problem::LeastSquaresSynthetic => Some(8),
            _ => None,
        }
    }

    /// Dimension actually used for a requested `n`; the fixed-dimension
    /// functions ignore the request.
    pub fn resolve_dimension(self, n: Option<usize>) -> Result<usize> {
        match self {
            Problem::ExtendedWood => {
                let n = n.unwrap_or(4);
                if n == 0 || !n.is_multiple_of(4) {
                    return Err(Error::config(format!(
                        "extended_wood needs a positive dimension divisible by 4, got {n}"
                    )));
                }
                Ok(n)
            }
            Problem::LeastSquaresSynthetic => {
                let n = n.unwrap_or(8);
                if n == 0 {
                    return Err(Error::config("least_squares_synthetic needs n ≥ 1"));
                }
                Ok(n)
            }
            _ => Ok(2),
        }
    }

    pub fn default_start(self, n: Option<usize>) -> Result<DVector<f64>> {
        let n = self.resolve_dimension(n)?;
        let v = match self {
            Problem::QuadraticExample | Problem::Booth | Problem::Himmelblau => vec![0.0, 0.0],
            Problem::ThreeHump => vec![0.75, -0.5],
            Problem::Rosenbrock => vec![-1.2, 1.0],
            Problem::ExtendedWood => [-3.0, -1.0, -3.0, -1.0].iter().copied().cycle().take(n).collect(),
            Problem::LeastSquaresSynthetic => [2.0, 0.5].iter().copied().cycle().take(n).collect(),
        };
        Ok(DVector::from_vec(v))
    }

    pub fn build(self, n: Option<usize>) -> Result<Box<dyn Objective>> {
        let n = self.resolve_dimension(n)?;
        Ok(match self {
            Problem::QuadraticExample => Box::new(QuadraticExample),
            Problem::Booth => Box::new(Booth),
            Problem::ThreeHump => Box::new(ThreeHump),
            Problem::Himmelblau => Box::new(Himmelblau),
            Problem::Rosenbrock => Box::new(Rosenbrock),
            Problem::ExtendedWood => Box::new(ExtendedWood::new(n)?),
            Problem::LeastSquaresSynthetic => Box::new(synthetic_least_squares(n)?),
        })
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown problem `{s}`")))
    }
}

/// Looks up a built-in function by name. `n` only matters for
/// `extended_wood` (default 4) and `least_squares_synthetic` (default 8).
pub fn make_test_function(name: &str, n: Option<usize>) -> Result<Box<dyn Objective>> {
    name.parse::<Problem>()?.build(n)
}

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

fn m2(a: f64, b: f64, d: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, b, b, d])
}

#[derive(Debug, Clone, Copy)]
pub struct QuadraticExample;

impl Objective for QuadraticExample {
    fn dimension(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x[0] - 1.0).powi(2) + 50.0 * (x[0] - x[1]).powi(2)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = x[0] - x[1];
        v2(x[0] - 1.0 + 100.0 * d, -100.0 * d)
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        m2(101.0, -100.0, 100.0)
    }
    fn name(&self) -> &str {
        "quadratic_example"
    }
}

/// `(x+2y−7)² + (2x+y−5)²`, minimizer `(1, 3)`.
#[derive(Debug, Clone, Copy)]
pub struct Booth;

impl Objective for Booth {
    fn dimension(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (x[0] + 2.0 * x[1] - 7.0).powi(2) + (2.0 * x[0] + x[1] - 5.0).powi(2)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        v2(10.0 * x[0] + 8.0 * x[1] - 34.0, 8.0 * x[0] + 10.0 * x[1] - 38.0)
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        m2(10.0, 8.0, 10.0)
    }
    fn name(&self) -> &str {
        "booth"
    }
}

/// Three-hump camel, `2x² − 1.05x⁴ + x⁶/6 + xy + y²`.
#[derive(Debug, Clone, Copy)]
pub struct ThreeHump;

impl Objective for ThreeHump {
    fn dimension(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let (a, b) = (x[0], x[1]);
        2.0 * a * a - 1.05 * a.powi(4) + a.powi(6) / 6.0 + a * b + b * b
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (a, b) = (x[0], x[1]);
        v2(4.0 * a - 4.2 * a.powi(3) + a.powi(5) + b, a + 2.0 * b)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let a = x[0];
        m2(4.0 - 12.6 * a * a + 5.0 * a.powi(4), 1.0, 2.0)
    }
    fn name(&self) -> &str {
        "three_hump"
    }
}

/// `(x²+y−11)² + (x+y²−7)²`, four global minima with `f = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Himmelblau;

impl Objective for Himmelblau {
    fn dimension(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let (a, b) = (x[0], x[1]);
        (a * a + b - 11.0).powi(2) + (a + b * b - 7.0).powi(2)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (a, b) = (x[0], x[1]);
        let p = a * a + b - 11.0;
        let q = a + b * b - 7.0;
        v2(4.0 * a * p + 2.0 * q, 2.0 * p + 4.0 * b * q)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (a, b) = (x[0], x[1]);
        let p = a * a + b - 11.0;
        let q = a + b * b - 7.0;
        m2(4.0 * p + 8.0 * a * a + 2.0, 4.0 * (a + b), 2.0 + 4.0 * q + 8.0 * b * b)
    }
    fn name(&self) -> &str {
        "himmelblau"
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Rosenbrock;

impl Objective for Rosenbrock {
    fn dimension(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (a, b) = (x[0], x[1]);
        v2(-400.0 * a * (b - a * a) - 2.0 * (1.0 - a), 200.0 * (b - a * a))
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (a, b) = (x[0], x[1]);
        m2(1200.0 * a * a - 400.0 * b + 2.0, -400.0 * a, 200.0)
    }
    fn name(&self) -> &str {
        "rosenbrock"
    }
}

/// Extended Wood: the four-variable Wood function tiled over `n/4` blocks.
///
/// Per block `(a, b, c, d)`:
/// `100(b−a²)² + (1−a)² + 90(d−c²)² + (1−c)² + 10(b+d−2)² + 0.1(b−d)²`.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedWood {
    n: usize,
}

impl ExtendedWood {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(4) {
            return Err(Error::config(format!("extended_wood dimension must be a positive multiple of 4, got {n}")));
        }
        Ok(Self { n })
    }
}

impl Objective for ExtendedWood {
    fn dimension(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        x.as_slice()
            .chunks_exact(4)
            .map(|w| {
                let (a, b, c, d) = (w[0], w[1], w[2], w[3]);
                100.0 * (b - a * a).powi(2)
                    + (1.0 - a).powi(2)
                    + 90.0 * (d - c * c).powi(2)
                    + (1.0 - c).powi(2)
                    + 10.0 * (b + d - 2.0).powi(2)
                    + 0.1 * (b - d).powi(2)
            })
            .sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n);
        for (k, w) in x.as_slice().chunks_exact(4).enumerate() {
            let (a, b, c, d) = (w[0], w[1], w[2], w[3]);
            let i = 4 * k;
            g[i] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a);
            g[i + 1] = 200.0 * (b - a * a) + 20.0 * (b + d - 2.0) + 0.2 * (b - d);
            g[i + 2] = -360.0 * c * (d - c * c) - 2.0 * (1.0 - c);
            g[i + 3] = 180.0 * (d - c * c) + 20.0 * (b + d - 2.0) - 0.2 * (b - d);
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for (k, w) in x.as_slice().chunks_exact(4).enumerate() {
            let (a, b, c, d) = (w[0], w[1], w[2], w[3]);
            let i = 4 * k;
            h[(i, i)] = 1200.0 * a * a - 400.0 * b + 2.0;
            h[(i, i + 1)] = -400.0 * a;
            h[(i + 1, i)] = -400.0 * a;
            h[(i + 1, i + 1)] = 220.2;
            h[(i + 1, i + 3)] = 19.8;
            h[(i + 3, i + 1)] = 19.8;
            h[(i + 2, i + 2)] = 1080.0 * c * c - 360.0 * d + 2.0;
            h[(i + 2, i + 3)] = -360.0 * c;
            h[(i + 3, i + 2)] = -360.0 * c;
            h[(i + 3, i + 3)] = 200.2;
        }
        h
    }

    fn name(&self) -> &str {
        "extended_wood"
    }
}

/// Nonlinear least-squares chain: `rᵢ = xᵢ² − 1` for every node and
/// `2(xᵢ − xᵢ₊₁)` for every link of the path `1 – 2 – … – n`.
///
/// The global minima are `±(1, …, 1)` with `f = 0`. Second derivatives are
/// analytic: only the node residuals curve, each with `∇²rᵢ = 2eᵢeᵢᵀ`.
pub fn synthetic_least_squares(n: usize) -> Result<LeastSquares> {
    if n == 0 {
        return Err(Error::config("least_squares_synthetic needs n ≥ 1"));
    }
    let m = 2 * n - 1;
    let ls = LeastSquares::new(
        n,
        m,
        move |x| {
            let mut r = DVector::zeros(m);
            for i in 0..n {
                r[i] = x[i] * x[i] - 1.0;
            }
            for i in 0..n - 1 {
                r[n + i] = 2.0 * (x[i] - x[i + 1]);
            }
            r
        },
        move |x| {
            let mut j = DMatrix::zeros(m, n);
            for i in 0..n {
                j[(i, i)] = 2.0 * x[i];
            }
            for i in 0..n - 1 {
                j[(n + i, i)] = 2.0;
                j[(n + i, i + 1)] = -2.0;
            }
            j
        },
    )?;
    Ok(ls
        .with_second_order_term(move |_x, r| DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 2.0 * r[i])))
        .with_name("least_squares_synthetic"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{finite_difference_gradient, finite_difference_hessian};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_functions() -> Vec<Box<dyn Objective>> {
        let mut v: Vec<Box<dyn Objective>> = Problem::ALL
            .iter()
            .filter(|p| p.default_dimension().is_none())
            .map(|p| p.build(None).unwrap())
            .collect();
        v.push(Problem::ExtendedWood.build(Some(4)).unwrap());
        v.push(Problem::ExtendedWood.build(Some(8)).unwrap());
        v.push(Problem::LeastSquaresSynthetic.build(Some(5)).unwrap());
        v
    }

    #[test]
    fn quadratic_example_values() {
        let f = make_test_function("quadratic_example", None).unwrap();
        assert_eq!(f.value(&v2(1.0, 1.0)), 0.0);
        assert_eq!(f.gradient(&v2(1.0, 1.0)), v2(0.0, 0.0));
        let g0 = f.gradient(&v2(0.0, 0.0));
        assert_eq!(g0, v2(-1.0, 0.0));
        let fd = finite_difference_gradient(f.as_ref(), &v2(0.0, 0.0), 1e-6);
        assert_relative_eq!(fd, g0, epsilon = 1e-8);
    }

    #[test]
    fn quadratic_example_hessian_is_constant() {
        let f = QuadraticExample;
        let expected = m2(101.0, -100.0, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = v2(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            assert_eq!(f.hessian(&x), expected);
            assert_relative_eq!(finite_difference_hessian(&f, &x, 1e-6), expected, epsilon = 1e-5);
        }
    }

    #[test]
    fn known_minimizers() {
        assert_eq!(Himmelblau.value(&v2(3.0, 2.0)), 0.0);
        assert_eq!(Booth.value(&v2(1.0, 3.0)), 0.0);
        assert_eq!(Rosenbrock.gradient(&v2(1.0, 1.0)).norm(), 0.0);
        let wood = ExtendedWood::new(4).unwrap();
        let ones = DVector::from_element(4, 1.0);
        assert_eq!(wood.value(&ones), 0.0);
        assert_eq!(wood.gradient(&ones).norm(), 0.0);
        let ls = synthetic_least_squares(6).unwrap();
        assert_eq!(ls.value(&DVector::from_element(6, 1.0)), 0.0);
        assert_eq!(ls.value(&DVector::from_element(6, -1.0)), 0.0);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in all_functions() {
            for _ in 0..100 {
                let x = DVector::from_fn(f.dimension(), |_, _| rng.random_range(-5.0..5.0));
                let g = f.gradient(&x);
                let fd = finite_difference_gradient(f.as_ref(), &x, 1e-6);
                let err = (&g - &fd).norm() / g.norm().max(1.0);
                assert!(err <= 1e-5, "{}: rel err {err} at {x}", f.name());
            }
        }
    }

    #[test]
    fn analytic_hessians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for f in all_functions() {
            for _ in 0..20 {
                let x = DVector::from_fn(f.dimension(), |_, _| rng.random_range(-5.0..5.0));
                let h = f.hessian(&x);
                let fd = finite_difference_hessian(f.as_ref(), &x, 1e-6);
                let err = (&h - &fd).norm() / h.norm().max(1.0);
                assert!(err <= 1e-4, "{}: rel err {err}", f.name());
                assert!((&h - h.transpose()).norm() <= 1e-12 * h.norm().max(1.0));
            }
        }
    }

    #[test]
    fn names_round_trip_and_reject_unknown() {
        for p in Problem::ALL {
            assert_eq!(p.as_str().parse::<Problem>().unwrap(), p);
        }
        assert!(matches!(make_test_function("nope", None), Err(Error::Config(_))));
        assert!(matches!(make_test_function("extended_wood", Some(6)), Err(Error::Config(_))));
        assert!(matches!(make_test_function("extended_wood", Some(0)), Err(Error::Config(_))));
        // fixed-dimension functions ignore n
        assert_eq!(make_test_function("booth", Some(17)).unwrap().dimension(), 2);
    }

    #[test]
    fn default_starts_have_matching_dimension() {
        for p in Problem::ALL {
            let f = p.build(None).unwrap();
            assert_eq!(p.default_start(None).unwrap().len(), f.dimension());
        }
        let x0 = Problem::ExtendedWood.default_start(Some(8)).unwrap();
        assert_eq!(x0.as_slice(), &[-3.0, -1.0, -3.0, -1.0, -3.0, -1.0, -3.0, -1.0]);
    }
}
