//! Iterate state, per-iteration trace records and solver results shared by
//! every method in the crate.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use nalgebra::DVector;

use crate::error::Error;
use crate::linalg::FactorizationLog;

/// Current iterate of a quiescence run.
///
/// `quiescent` is kept sorted and duplicate free; its complement in
/// `0..n` is the non-quiescent set.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DVector<f64>,
    /// Accumulated gradient-flow time.
    pub t: f64,
    pub quiescent: Vec<usize>,
    pub iteration: usize,
}

impl SolverState {
    /// All variables start non-quiescent.
    pub fn new(x0: DVector<f64>) -> Self {
        Self { x: x0, t: 0.0, quiescent: Vec::new(), iteration: 0 }
    }

    pub fn with_quiescent(mut self, mut quiescent: Vec<usize>) -> Self {
        quiescent.sort_unstable();
        quiescent.dedup();
        self.quiescent = quiescent;
        self
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    pub fn is_quiescent(&self, i: usize) -> bool {
        self.quiescent.binary_search(&i).is_ok()
    }

    pub fn non_quiescent(&self) -> Vec<usize> {
        (0..self.dimension()).filter(|i| !self.is_quiescent(*i)).collect()
    }

    pub(crate) fn insert_quiescent(&mut self, idx: impl IntoIterator<Item = usize>) {
        self.quiescent.extend(idx);
        self.quiescent.sort_unstable();
        self.quiescent.dedup();
    }

    pub(crate) fn remove_quiescent(&mut self, idx: &[usize]) {
        self.quiescent.retain(|i| !idx.contains(i));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Converged,
    MaxIterations,
    Diverged,
    NumericalFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::Diverged => "diverged",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        [Status::Converged, Status::MaxIterations, Status::Diverged, Status::NumericalFailure]
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown status `{s}`")))
    }
}

/// What produced an iteration's step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    /// Step of size `min τ̃` that drives the promoted variables to quiescence.
    Quiescence,
    /// Armijo gradient step taken when no time constant was admissible.
    Safeguard,
    /// Line-searched step of a Newton-type or quasi-Newton method.
    LineSearch,
    /// Plain forward-Euler gradient step.
    ForwardEuler,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Quiescence => "quiescence",
            StepKind::Safeguard => "safeguard",
            StepKind::LineSearch => "line_search",
            StepKind::ForwardEuler => "forward_euler",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Snapshot taken after each iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub t: f64,
    /// Step taken this iteration (`Δt` for gradient-flow methods, `α` for
    /// line-searched ones).
    pub dt: f64,
    pub f_value: f64,
    pub grad_norm: f64,
    /// `|Q|` after promotion and demotion.
    pub quiescent_count: usize,
    pub promoted_count: usize,
    pub demoted_count: usize,
    /// Order of the matrix factorized during this iteration, if any.
    pub factored_size: Option<usize>,
    /// `½‖ẋ_nq‖²` at the start of the iteration.
    pub nq_velocity_energy: f64,
    pub kind: StepKind,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub status: Status,
    pub x_final: DVector<f64>,
    pub f_final: f64,
    pub grad_norm_final: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub trace: Vec<TraceRecord>,
    pub factorizations: FactorizationLog,
    pub message: Option<String>,
}

impl SolverResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}
