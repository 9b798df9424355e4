//! Objective-function contract and the two generic objective families
//! (quadratics and sums of squared residuals).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A twice continuously differentiable objective `f: ℝⁿ → ℝ`.
///
/// Implementations must be pure: evaluating at the same point always yields
/// the same result, and evaluation may happen concurrently from several
/// threads. Gradients have length [`dimension`](Objective::dimension) and
/// Hessians are symmetric `n × n`.
pub trait Objective: Send + Sync {
    fn dimension(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Short identifier used in reports.
    fn name(&self) -> &str {
        "objective"
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (**self).hessian(x)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

/// `f(x) = ½ xᵀQx + bᵀx` with symmetric `Q`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: DMatrix<f64>,
    b: DVector<f64>,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != b.len() || b.is_empty() {
            return Err(Error::config(format!(
                "quadratic needs square Q matching b, got {}x{} and {}",
                q.nrows(),
                q.ncols(),
                b.len()
            )));
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self { q, b })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.b
    }
}

impl Objective for Quadratic {
    fn dimension(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.b.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.b
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }

    fn name(&self) -> &str {
        "quadratic"
    }
}

type ResidualFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type JacobianFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type SecondOrderFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// `f(x) = ‖r(x)‖²` for a residual map `r: ℝⁿ → ℝᵐ` with analytic Jacobian.
///
/// The Hessian is `2JᵀJ + 2Σᵢ rᵢ∇²rᵢ`. When no analytic second-order term is
/// supplied the `∇²rᵢ` are taken from central differences of the Jacobian with step
/// `1e-6·(1+|xⱼ|)`, and the assembled matrix is symmetrized.
pub struct LeastSquares {
    name: String,
    n: usize,
    m: usize,
    residual: Box<ResidualFn>,
    jacobian: Box<JacobianFn>,
    second_order: Option<Box<SecondOrderFn>>,
}

impl std::fmt::Debug for LeastSquares {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LeastSquares")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("analytic_second_derivatives", &self.second_order.is_some())
            .finish()
    }
}

impl LeastSquares {
    pub fn new<R, J>(n: usize, m: usize, residual: R, jacobian: J) -> Result<Self>
    where
        R: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        if n == 0 || m == 0 {
            return Err(Error::config("least squares needs n ≥ 1 and m ≥ 1"));
        }
        Ok(Self {
            name: "least_squares".to_owned(),
            n,
            m,
            residual: Box::new(residual),
            jacobian: Box::new(jacobian),
            second_order: None,
        })
    }

    /// Supplies analytic `∇²rᵢ` for every residual, replacing the
    /// finite-difference second-order term.
    pub fn with_residual_hessians<H>(self, hessians: H) -> Self
    where
        H: Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.with_second_order_term(move |x, r| {
            let n = x.len();
            hessians(x)
                .into_iter()
                .zip(r.iter())
                .fold(DMatrix::zeros(n, n), |acc, (h, ri)| acc + h * *ri)
        })
    }

    /// Supplies `Σᵢ rᵢ∇²rᵢ` directly as a function of `(x, r(x))`. Cheaper
    /// than [`with_residual_hessians`](Self::with_residual_hessians) when the
    /// residual Hessians are sparse.
    pub fn with_second_order_term<S>(mut self, term: S) -> Self
    where
        S: Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.second_order = Some(Box::new(term));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn residual_count(&self) -> usize {
        self.m
    }

    /// Residual vector, rejecting non-finite entries.
    pub fn residual_checked(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let r = (self.residual)(x);
        if r.len() != self.m {
            return Err(Error::Contract(format!(
                "residual returned {} entries, expected {}",
                r.len(),
                self.m
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite residual"));
        }
        Ok(r)
    }

    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.residual)(x)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.jacobian)(x)
    }

    fn second_order_term(&self, x: &DVector<f64>, r: &DVector<f64>) -> DMatrix<f64> {
        if let Some(term) = &self.second_order {
            return term(x, r);
        }
        let mut acc = DMatrix::zeros(self.n, self.n);
        // Column j of ∇²rᵢ is ∂/∂xⱼ of row i of the Jacobian.
        for j in 0..self.n {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let dj = ((self.jacobian)(&xp) - (self.jacobian)(&xm)) / (2.0 * h);
            // dj[(i, k)] = ∂²rᵢ/∂xₖ∂xⱼ
            for i in 0..self.m {
                for k in 0..self.n {
                    acc[(k, j)] += r[i] * dj[(i, k)];
                }
            }
        }
        acc
    }
}

impl Objective for LeastSquares {
    fn dimension(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residual(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residual(x);
        self.jacobian(x).transpose() * r * 2.0
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let r = self.residual(x);
        let j = self.jacobian(x);
        let h = (j.transpose() * &j + self.second_order_term(x, &r)) * 2.0;
        (&h + h.transpose()) * 0.5
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Central-difference gradient with per-coordinate step `h·(1+|xᵢ|)`.
pub fn finite_difference_gradient(obj: &dyn Objective, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let step = h * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += step;
        xm[i] -= step;
        (obj.value(&xp) - obj.value(&xm)) / (2.0 * step)
    })
}

/// Symmetrized central differences of the analytic gradient.
pub fn finite_difference_hessian(obj: &dyn Objective, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let step = h * (1.0 + x[j].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;
        let col = (obj.gradient(&xp) - obj.gradient(&xm)) / (2.0 * step);
        out.set_column(j, &col);
    }
    (&out + out.transpose()) * 0.5
}
