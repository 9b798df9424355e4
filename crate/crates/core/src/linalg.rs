//! Dense symmetric kernels: principal-block extraction, instrumented
//! factorization with regularization fallbacks, and a dominant-eigenvalue
//! estimate.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Orders of every matrix factorized during one solver run.
///
/// Owned by the run; kernels that factorize take it by `&mut`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactorizationLog {
    sizes: Vec<usize>,
}

impl FactorizationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, size: usize) {
        self.sizes.push(size);
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn largest(&self) -> Option<usize> {
        self.sizes.iter().copied().max()
    }

    /// Factorization count keyed by matrix order.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for &s in &self.sizes {
            *h.entry(s).or_insert(0) += 1;
        }
        h
    }
}

/// Row/column index selection into a square source matrix.
#[derive(Debug, Clone, Copy)]
pub struct BlockView<'a> {
    pub source: &'a DMatrix<f64>,
    pub row_idx: &'a [usize],
    pub col_idx: &'a [usize],
}

impl<'a> BlockView<'a> {
    pub fn new(source: &'a DMatrix<f64>, row_idx: &'a [usize], col_idx: &'a [usize]) -> Result<Self> {
        let n = source.nrows();
        if !source.is_square() {
            return Err(Error::Contract(format!("block source must be square, got {}x{}", n, source.ncols())));
        }
        check_indices(row_idx, n)?;
        check_indices(col_idx, n)?;
        Ok(Self { source, row_idx, col_idx })
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.row_idx.len(), self.col_idx.len(), |i, j| {
            self.source[(self.row_idx[i], self.col_idx[j])]
        })
    }
}

fn check_indices(idx: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n {
            return Err(Error::Contract(format!("index {i} out of range for dimension {n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Contract(format!("duplicate index {i}")));
        }
    }
    Ok(())
}

/// The four blocks of a symmetric matrix under a quiescent /
/// non-quiescent split.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    pub qq: DMatrix<f64>,
    pub q_nq: DMatrix<f64>,
    pub nq_nq: DMatrix<f64>,
    pub nq_q: DMatrix<f64>,
}

/// Copies out `H_qq`, `H_q,nq`, `H_nq,nq` and `H_nq,q`.
///
/// `q_idx` and `nq_idx` must partition `0..n`.
pub fn extract_blocks(h: &DMatrix<f64>, q_idx: &[usize], nq_idx: &[usize]) -> Result<HessianBlocks> {
    let n = h.nrows();
    if q_idx.len() + nq_idx.len() != n {
        return Err(Error::Contract(format!(
            "partition sizes {} + {} do not cover dimension {n}",
            q_idx.len(),
            nq_idx.len()
        )));
    }
    let all: Vec<usize> = q_idx.iter().chain(nq_idx).copied().collect();
    check_indices(&all, n)?;
    let block = |r: &[usize], c: &[usize]| BlockView::new(h, r, c).map(|v| v.to_matrix());
    Ok(HessianBlocks {
        qq: block(q_idx, q_idx)?,
        q_nq: block(q_idx, nq_idx)?,
        nq_nq: block(nq_idx, nq_idx)?,
        nq_q: block(nq_idx, q_idx)?,
    })
}

/// Puts the blocks back into an `n × n` matrix.
pub fn assemble_blocks(blocks: &HessianBlocks, q_idx: &[usize], nq_idx: &[usize]) -> DMatrix<f64> {
    let n = q_idx.len() + nq_idx.len();
    let mut h = DMatrix::zeros(n, n);
    let parts = [
        (&blocks.qq, q_idx, q_idx),
        (&blocks.q_nq, q_idx, nq_idx),
        (&blocks.nq_nq, nq_idx, nq_idx),
        (&blocks.nq_q, nq_idx, q_idx),
    ];
    for (m, rows, cols) in parts {
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                h[(r, c)] = m[(i, j)];
            }
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Cholesky,
    ShiftedCholesky,
    PivotedLu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdSolution {
    pub solution: DMatrix<f64>,
    /// Diagonal shift that made the Cholesky factorization succeed (0 if
    /// none was needed or the LU fallback was used).
    pub shift_used: f64,
    pub size: usize,
    pub method: SolveMethod,
}

/// Maximum number of shift doublings before giving up on Cholesky.
pub const MAX_SHIFT_DOUBLINGS: usize = 40;

/// Solves `A·X = B` for symmetric `A`.
///
/// Tries Cholesky first. On failure it retries with `A + μI`, starting at
/// `μ = shift_seed·max(1, maxᵢ|Aᵢᵢ|)` and doubling up to
/// [`MAX_SHIFT_DOUBLINGS`] times, then falls back to a fully pivoted LU of
/// the unshifted matrix. The order of `A` is recorded in `log` once per call.
pub fn solve_spd_with_fallback(
    a: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    shift_seed: f64,
    log: &mut FactorizationLog,
) -> Result<SpdSolution> {
    let n = a.nrows();
    if !a.is_square() || rhs.nrows() != n {
        return Err(Error::Contract(format!(
            "solve needs square A matching rhs rows, got {}x{} and {} rows",
            n,
            a.ncols(),
            rhs.nrows()
        )));
    }
    log.record(n);
    if n == 0 {
        return Ok(SpdSolution { solution: rhs.clone(), shift_used: 0.0, size: 0, method: SolveMethod::Cholesky });
    }
    if a.iter().any(|v| !v.is_finite()) || rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite entries in linear system"));
    }

    let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());

    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(rhs);
        if finite(&x) {
            return Ok(SpdSolution { solution: x, shift_used: 0.0, size: n, method: SolveMethod::Cholesky });
        }
    }

    let max_diag = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut mu = shift_seed * max_diag.max(1.0);
    for _ in 0..=MAX_SHIFT_DOUBLINGS {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] += mu;
        }
        if let Some(chol) = shifted.cholesky() {
            let x = chol.solve(rhs);
            if finite(&x) {
                return Ok(SpdSolution { solution: x, shift_used: mu, size: n, method: SolveMethod::ShiftedCholesky });
            }
        }
        mu *= 2.0;
    }

    let lu = a.clone().full_piv_lu();
    match lu.solve(rhs) {
        Some(x) if finite(&x) => Ok(SpdSolution { solution: x, shift_used: 0.0, size: n, method: SolveMethod::PivotedLu }),
        _ => Err(Error::numerical(format!("{n}x{n} system is singular beyond all fallbacks"))),
    }
}

/// Vector right-hand-side convenience wrapper.
pub fn solve_spd_vector(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    shift_seed: f64,
    log: &mut FactorizationLog,
) -> Result<(DVector<f64>, SpdSolution)> {
    let sol = solve_spd_with_fallback(a, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()), shift_seed, log)?;
    let x = sol.solution.column(0).into_owned();
    Ok((x, sol))
}

/// Partially pivoted LU solve of a general square system, recorded in `log`.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_general(a: &DMatrix<f64>, rhs: &DVector<f64>, log: &mut FactorizationLog) -> Option<DVector<f64>> {
    log.record(a.nrows());
    let x = a.clone().lu().solve(rhs)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric matrix by shifted power iteration.
///
/// The matrix is shifted by its Gershgorin lower bound so the algebraically
/// largest eigenvalue dominates, iterated from the normalized all-ones
/// vector, and un-shifted. If the all-ones vector is itself an eigenvector
/// (so it carries no component along any other eigenvector) the iteration
/// is repeated from `e₁` restricted to its orthogonal complement and the
/// larger of the two Rayleigh quotients wins.
pub fn max_eigenvalue(h: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<EigenEstimate> {
    let n = h.nrows();
    if n == 0 || !h.is_square() {
        return Err(Error::Contract("max_eigenvalue needs a non-empty square matrix".into()));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite matrix entries"));
    }
    let gershgorin_low = (0..n)
        .map(|i| h[(i, i)] - (0..n).filter(|&j| j != i).map(|j| h[(i, j)].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let shift = (-gershgorin_low).max(0.0);
    let mut b = h.clone();
    for i in 0..n {
        b[(i, i)] += shift;
    }

    let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let bu = &b * &ones;
    let mu_ones = ones.dot(&bu);
    let residual = (&bu - &ones * mu_ones).norm();
    let scale = bu.norm().max(f64::MIN_POSITIVE);

    if residual > 1e-12 * scale || n == 1 {
        let est = power_iterate(&b, ones, None, shift, tol, max_iter);
        return Ok(est);
    }

    let mut start = DVector::zeros(n);
    start[0] = 1.0;
    start -= &ones * ones.dot(&start);
    let first = EigenEstimate { value: mu_ones - shift, iterations: 1, converged: true };
    if start.norm() == 0.0 {
        return Ok(first);
    }
    let start = start.normalize();
    let second = power_iterate(&b, start, Some(&ones), shift, tol, max_iter);
    Ok(if second.value > first.value {
        EigenEstimate { iterations: second.iterations + 1, ..second }
    } else {
        EigenEstimate { iterations: second.iterations + 1, ..first }
    })
}

fn power_iterate(
    b: &DMatrix<f64>,
    mut v: DVector<f64>,
    deflate: Option<&DVector<f64>>,
    shift: f64,
    tol: f64,
    max_iter: usize,
) -> EigenEstimate {
    let mut lambda = v.dot(&(b * &v));
    for it in 1..=max_iter {
        let mut w = b * &v;
        if let Some(u) = deflate {
            w -= u * u.dot(&w);
        }
        let norm = w.norm();
        if norm == 0.0 {
            // v lies in the null space of the shifted matrix.
            return EigenEstimate { value: -shift, iterations: it, converged: true };
        }
        v = w / norm;
        let next = v.dot(&(b * &v));
        let value = next - shift;
        if (next - lambda).abs() < tol * (1.0 + value.abs()) {
            return EigenEstimate { value, iterations: it, converged: true };
        }
        lambda = next;
    }
    EigenEstimate { value: lambda - shift, iterations: max_iter, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn blocks_of_identity() {
        let h = DMatrix::identity(3, 3);
        let b = extract_blocks(&h, &[0], &[1, 2]).unwrap();
        assert_eq!(b.qq, DMatrix::identity(1, 1));
        assert_eq!(b.q_nq, DMatrix::zeros(1, 2));
        assert_eq!(b.nq_nq, DMatrix::identity(2, 2));
    }

    #[test]
    fn blocks_of_worked_quadratic() {
        let h = DMatrix::from_row_slice(2, 2, &[101.0, -100.0, -100.0, 100.0]);
        let b = extract_blocks(&h, &[0], &[1]).unwrap();
        assert_eq!(b.qq[(0, 0)], 101.0);
        assert_eq!(b.q_nq[(0, 0)], -100.0);
        assert_eq!(b.nq_q, b.q_nq.transpose());
    }

    #[test]
    fn empty_quiescent_set_leaves_everything_in_nq() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let b = extract_blocks(&h, &[], &[0, 1]).unwrap();
        assert_eq!(b.qq.shape(), (0, 0));
        assert_eq!(b.nq_nq, h);
    }

    #[test]
    fn block_index_violations() {
        let h = DMatrix::identity(3, 3);
        assert!(matches!(extract_blocks(&h, &[0, 0], &[1]), Err(Error::Contract(_))));
        assert!(matches!(extract_blocks(&h, &[0], &[1, 3]), Err(Error::Contract(_))));
        assert!(matches!(extract_blocks(&h, &[0], &[1]), Err(Error::Contract(_))));
    }

    #[test]
    fn solve_identity() {
        let mut log = FactorizationLog::new();
        let b = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let (x, d) = solve_spd_vector(&DMatrix::identity(3, 3), &b, 1e-10, &mut log).unwrap();
        assert_eq!(x, b);
        assert_eq!(d.method, SolveMethod::Cholesky);
        assert_eq!(log.sizes(), &[3]);
    }

    #[test]
    fn solve_two_by_two() {
        let mut log = FactorizationLog::new();
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let (x, _) = solve_spd_vector(&a, &DVector::from_vec(vec![2.0, 3.0]), 1e-10, &mut log).unwrap();
        assert_relative_eq!(x, DVector::from_vec(vec![0.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn zero_matrix_takes_shift_path() {
        let mut log = FactorizationLog::new();
        let (x, d) = solve_spd_vector(&DMatrix::zeros(1, 1), &DVector::from_element(1, 1.0), 1e-10, &mut log).unwrap();
        assert!(x[0].is_finite());
        assert!(d.shift_used > 0.0);
        assert_eq!(d.method, SolveMethod::ShiftedCholesky);
    }

    #[test]
    fn strongly_indefinite_falls_back_to_lu() {
        let mut log = FactorizationLog::new();
        // zero diagonal keeps the shift tiny, so no doubling reaches 1e6
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1e6, 1e6, 0.0]);
        let (x, d) = solve_spd_vector(&a, &DVector::from_vec(vec![1.0, 2.0]), 1e-10, &mut log).unwrap();
        assert_eq!(d.method, SolveMethod::PivotedLu);
        assert_relative_eq!(x, DVector::from_vec(vec![2e-6, 1e-6]), epsilon = 1e-18);
    }

    #[test]
    fn eigen_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_relative_eq!(max_eigenvalue(&d, 1e-12, 10_000).unwrap().value, 3.0, epsilon = 1e-9);
        let q = DMatrix::from_row_slice(2, 2, &[101.0, -100.0, -100.0, 100.0]);
        let expected = (201.0 + 40001f64.sqrt()) / 2.0;
        let est = max_eigenvalue(&q, 1e-14, 10_000).unwrap();
        assert!(est.converged);
        assert_relative_eq!(est.value, expected, max_relative = 1e-10);
        assert_relative_eq!(max_eigenvalue(&DMatrix::identity(4, 4), 1e-12, 100).unwrap().value, 1.0);
    }

    #[test]
    fn eigen_when_ones_is_a_minor_eigenvector() {
        // Path-graph Laplacian plus identity: all-ones has eigenvalue 1, the
        // smallest one.
        let l = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 3.0, -1.0, 0.0, -1.0, 2.0]);
        let est = max_eigenvalue(&l, 1e-13, 10_000).unwrap();
        let oracle = l.clone().symmetric_eigen().eigenvalues.max();
        assert_relative_eq!(est.value, oracle, max_relative = 1e-9);
        // all-ones in the null space
        let z = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_relative_eq!(max_eigenvalue(&z, 1e-13, 1000).unwrap().value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn eigen_of_negative_definite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, -1.0, -2.0]));
        assert_relative_eq!(max_eigenvalue(&m, 1e-13, 10_000).unwrap().value, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn histogram_counts_sizes() {
        let mut log = FactorizationLog::new();
        for s in [1, 2, 2, 5] {
            log.record(s);
        }
        assert_eq!(log.largest(), Some(5));
        assert_eq!(log.histogram().get(&2), Some(&2));
    }

    fn symmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
        (&a + a.transpose()) * 0.5
    }

    proptest! {
        #[test]
        fn reassembly_is_exact(n in 1usize..7, seed in proptest::collection::vec(-10.0f64..10.0, 49), mask in 0u32..128) {
            let h = symmetric(n, &seed);
            let q: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let nq: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
            let blocks = extract_blocks(&h, &q, &nq).unwrap();
            prop_assert_eq!(assemble_blocks(&blocks, &q, &nq), h);
        }

        #[test]
        fn spd_residual_is_small(n in 1usize..9, seed in proptest::collection::vec(-1.0f64..1.0, 64), rhs in proptest::collection::vec(-5.0f64..5.0, 8)) {
            let a = DMatrix::from_fn(n, n, |i, j| seed[i * 8 + j]);
            let spd = &a * a.transpose() + DMatrix::identity(n, n) * 1e-3;
            let b = DVector::from_fn(n, |i, _| rhs[i]);
            let mut log = FactorizationLog::new();
            let (x, _) = solve_spd_vector(&spd, &b, 1e-10, &mut log).unwrap();
            prop_assert!((&spd * x - &b).norm() <= 1e-8 * (1.0 + b.norm()));
        }

        #[test]
        fn power_iteration_matches_eigendecomposition(n in 1usize..65, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let h = (&a + a.transpose()) * 0.5;
            let oracle = h.clone().symmetric_eigen().eigenvalues.max();
            let est = max_eigenvalue(&h, 1e-14, 200_000).unwrap();
            prop_assert!((est.value - oracle).abs() <= 1e-6 * oracle.abs().max(1.0),
                "n={} est={} oracle={} converged={}", n, est.value, oracle, est.converged);
        }
    }
}
