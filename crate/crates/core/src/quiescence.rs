//! Quiescence-driven gradient-flow solver.
//!
//! Each iteration works on the partition `x = [x_q; x_nq]` in effect at its
//! start:
//!
//! 1. non-quiescent velocities `ẋ_nq = −∂f/∂x_nq`;
//! 2. quiescent velocities from `ẍ_q = 0`, i.e. `H_qq ẋ_q = −H_q,nq ẋ_nq`
//!    (the only factorization, of order `|Q|`);
//! 3. accelerations `ẍ_nq = −(H_nq,nq ẋ_nq + H_nq,q ẋ_q)`;
//! 4. time constants `τ̃ᵢ = −ẋᵢ/ẍᵢ` and `Δt = min τ̃`;
//! 5. a forward-Euler step of length `Δt` for both partitions;
//! 6. de-quiescence of previously quiescent variables whose error exceeds
//!    `η/N`, then promotion of the `argmin τ̃` group.
//!
//! The loop runs while `‖∇f‖² > η`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::baseline::line_search::{armijo_backtrack_with, LineSearchConfig};
use crate::error::{Error, Result};
use crate::linalg::{extract_blocks, solve_spd_vector, FactorizationLog};
use crate::objective::Objective;
use crate::state::{SolverResult, SolverState, Status, StepKind, TraceRecord};

/// Iterates whose `|f|` or `‖x‖` exceed this are treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// How quiescent variables are tested for leaving quiescence after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DequiescenceRule {
    /// `errᵢ = |∂f/∂xᵢ(x(t+Δt)) − ∂f/∂xᵢ(x(t))|`: the change of the quiescent
    /// gradient across the step, which the slaving relation holds at zero to
    /// first order. Vanishes identically on quadratics, so the threshold is
    /// raised to the rounding-error floor of the difference where that is
    /// larger (see [`gradient_noise_floor`]).
    #[default]
    GradientDrift,
    /// `errᵢ = |(xᵢ(t+Δt) − xᵢ(t))/Δt + ∂f/∂xᵢ(x(t+Δt))|`: distance of the
    /// realized quiescent velocity from the gradient flow at the new point.
    TrajectoryResidual,
}

impl DequiescenceRule {
    pub fn as_str(self) -> &'static str {
        match self {
            DequiescenceRule::GradientDrift => "gradient_drift",
            DequiescenceRule::TrajectoryResidual => "trajectory_residual",
        }
    }
}

impl fmt::Display for DequiescenceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DequiescenceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient_drift" => Ok(DequiescenceRule::GradientDrift),
            "trajectory_residual" => Ok(DequiescenceRule::TrajectoryResidual),
            _ => Err(Error::config(format!("unknown de-quiescence rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptiQConfig {
    /// Tolerance on `‖∇f‖²`.
    pub eta: f64,
    pub max_iterations: usize,
    /// Relative window for promoting numerically equal time constants
    /// together.
    pub tau_grouping_rtol: f64,
    /// Variables with `|ẋᵢ|` below this never compete for promotion.
    pub velocity_floor: f64,
    /// Initial diagonal shift when the quiescent block fails to factor.
    pub regularization_seed: f64,
    pub dequiescence: DequiescenceRule,
    /// Line search used by the safeguard step.
    pub safeguard: LineSearchConfig,
}

impl Default for OptiQConfig {
    fn default() -> Self {
        Self {
            eta: 1e-12,
            max_iterations: 10_000,
            tau_grouping_rtol: 1e-9,
            velocity_floor: 1e-14,
            regularization_seed: 1e-10,
            dequiescence: DequiescenceRule::default(),
            safeguard: LineSearchConfig::default(),
        }
    }
}

impl OptiQConfig {
    pub fn with_tolerance(eta: f64, max_iterations: usize) -> Self {
        Self { eta, max_iterations, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.eta) {
            return Err(Error::config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be positive"));
        }
        if !(self.tau_grouping_rtol.is_finite() && self.tau_grouping_rtol >= 0.0) {
            return Err(Error::config("tau_grouping_rtol must be non-negative"));
        }
        if !positive(self.velocity_floor) || !positive(self.regularization_seed) {
            return Err(Error::config("velocity_floor and regularization_seed must be positive"));
        }
        self.safeguard.validate()
    }

    /// Per-iteration de-quiescence budget `η/N`.
    pub fn dequiescence_threshold(&self) -> f64 {
        self.eta / self.max_iterations as f64
    }
}

/// Non-quiescent velocity and acceleration, ordered like the NQ index list.
#[derive(Debug, Clone, PartialEq)]
pub struct NonQuiescentDynamics {
    pub xdot: DVector<f64>,
    pub xddot: DVector<f64>,
}

/// `ẋ_nq = −∂f/∂x_nq` and `ẍ_nq = −(H_nq,nq ẋ_nq + H_nq,q ẋ_q)`.
///
/// `xdot_q` is ordered like `quiescent` and is empty when `Q = ∅`.
pub fn nonquiescent_dynamics(
    gradient: &DVector<f64>,
    hessian: &DMatrix<f64>,
    quiescent: &[usize],
    non_quiescent: &[usize],
    xdot_q: &DVector<f64>,
) -> Result<NonQuiescentDynamics> {
    if non_quiescent.is_empty() {
        return Err(Error::Contract("non-quiescent set is empty".into()));
    }
    if xdot_q.len() != quiescent.len() {
        return Err(Error::Contract("quiescent velocity length does not match Q".into()));
    }
    let xdot = DVector::from_fn(non_quiescent.len(), |k, _| -gradient[non_quiescent[k]]);
    let xddot = DVector::from_fn(non_quiescent.len(), |k, _| {
        let row = non_quiescent[k];
        let nn: f64 = non_quiescent.iter().zip(xdot.iter()).map(|(&j, v)| hessian[(row, j)] * v).sum();
        let nq: f64 = quiescent.iter().zip(xdot_q.iter()).map(|(&j, v)| hessian[(row, j)] * v).sum();
        -(nn + nq)
    });
    if xdot.iter().chain(xddot.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite gradient or Hessian entries"));
    }
    Ok(NonQuiescentDynamics { xdot, xddot })
}

/// `τ̃ᵢ = −ẋᵢ/ẍᵢ`, or `None` where the velocity is below the floor, the
/// acceleration vanishes, or the ratio is not positive.
pub fn estimate_time_constants(xdot: &DVector<f64>, xddot: &DVector<f64>, velocity_floor: f64) -> Vec<Option<f64>> {
    xdot.iter()
        .zip(xddot.iter())
        .map(|(&v, &a)| {
            if v.abs() < velocity_floor || a == 0.0 {
                return None;
            }
            let tau = -v / a;
            (tau.is_finite() && tau > 0.0).then_some(tau)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Promotion {
    pub dt: f64,
    /// Positions into the time-constant list (not global variable indices).
    pub positions: Vec<usize>,
}

/// `Δt = min τ̃` and every position with `τ̃ᵢ ≤ Δt·(1 + rtol)`.
///
/// `None` means no admissible time constant exists and the caller must fall
/// back to a safeguarded step.
pub fn select_promotion(tau: &[Option<f64>], tau_grouping_rtol: f64) -> Option<Promotion> {
    let dt = tau.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !dt.is_finite() {
        return None;
    }
    let limit = dt * (1.0 + tau_grouping_rtol);
    let positions = tau
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.filter(|&t| t <= limit).map(|_| i))
        .collect();
    Some(Promotion { dt, positions })
}

/// Solves `H_qq ẋ_q = −H_q,nq ẋ_nq` by factorizing the principal block only.
pub fn quiescent_velocity(
    h_qq: &DMatrix<f64>,
    h_q_nq: &DMatrix<f64>,
    xdot_nq: &DVector<f64>,
    regularization_seed: f64,
    log: &mut FactorizationLog,
) -> Result<DVector<f64>> {
    if h_qq.nrows() == 0 {
        return Err(Error::Contract("quiescent set is empty".into()));
    }
    if h_q_nq.nrows() != h_qq.nrows() || h_q_nq.ncols() != xdot_nq.len() {
        return Err(Error::Contract("block shapes do not match the partition".into()));
    }
    let rhs = -(h_q_nq * xdot_nq);
    solve_spd_vector(h_qq, &rhs, regularization_seed, log).map(|(x, _)| x)
}

/// Advances `x_q` by `Δt·ẋ_q` and `x_nq` by `Δt·ẋ_nq` using the state's own
/// partition, and advances `t` and the iteration counter.
pub fn apply_step(state: &SolverState, dt: f64, xdot_q: &DVector<f64>, xdot_nq: &DVector<f64>) -> Result<SolverState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Contract(format!("step must be positive, got {dt}")));
    }
    let nq = state.non_quiescent();
    if xdot_q.len() != state.quiescent.len() || xdot_nq.len() != nq.len() {
        return Err(Error::Contract("velocity lengths do not match the partition".into()));
    }
    let mut next = state.clone();
    for (&i, v) in state.quiescent.iter().zip(xdot_q.iter()) {
        next.x[i] += dt * v;
    }
    for (&i, v) in nq.iter().zip(xdot_nq.iter()) {
        next.x[i] += dt * v;
    }
    if next.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("non-finite iterate after step".into()));
    }
    next.t += dt;
    next.iteration += 1;
    Ok(next)
}

/// Quiescent indices of `state_new` whose trajectory residual
/// `|(x_q(t+Δt) − x_q(t))/Δt + ∂f/∂x_q(x(t+Δt))|` exceeds `η/N`.
///
/// `x_old_q` holds `x_q(t)` ordered like `state_new.quiescent`.
pub fn dequiescence_check(
    obj: &dyn Objective,
    x_old_q: &DVector<f64>,
    state_new: &SolverState,
    dt: f64,
    eta: f64,
    max_iterations: usize,
) -> Vec<usize> {
    let g = obj.gradient(&state_new.x);
    trajectory_residual_demotions(&g, x_old_q, state_new, dt, eta / max_iterations as f64)
}

fn trajectory_residual_demotions(
    gradient_new: &DVector<f64>,
    x_old_q: &DVector<f64>,
    state_new: &SolverState,
    dt: f64,
    threshold: f64,
) -> Vec<usize> {
    state_new
        .quiescent
        .iter()
        .zip(x_old_q.iter())
        .filter(|(&i, &old)| {
            let velocity = (state_new.x[i] - old) / dt;
            let err = (velocity + gradient_new[i]).abs();
            !(err <= threshold)
        })
        .map(|(&i, _)| i)
        .collect()
}

/// Quiescent indices whose gradient component moved by more than
/// `max(threshold, noise_floor[i])` across the step.
pub fn gradient_drift_check(
    gradient_old: &DVector<f64>,
    gradient_new: &DVector<f64>,
    quiescent: &[usize],
    threshold: f64,
    noise_floor: &DVector<f64>,
) -> Vec<usize> {
    quiescent
        .iter()
        .copied()
        .filter(|&i| !((gradient_new[i] - gradient_old[i]).abs() <= threshold.max(noise_floor[i])))
        .collect()
}

/// Rounding-error scale of `g_new − g_old`, per entry:
/// `16ε·(|g_old| + |g_new| + |H|(|x_old| + |x_new|))`.
pub fn gradient_noise_floor(
    hessian: &DMatrix<f64>,
    x_old: &DVector<f64>,
    x_new: &DVector<f64>,
    gradient_old: &DVector<f64>,
    gradient_new: &DVector<f64>,
) -> DVector<f64> {
    let mag = x_old.abs() + x_new.abs();
    let hx = hessian.abs() * mag;
    (gradient_old.abs() + gradient_new.abs() + hx) * (16.0 * f64::EPSILON)
}

/// Everything computed before the state moves.
#[derive(Debug, Clone, PartialEq)]
pub struct QuiescenceStep {
    pub dt: f64,
    /// Global indices entering quiescence.
    pub promoted: Vec<usize>,
    pub xdot_nq: DVector<f64>,
    pub xdot_q: DVector<f64>,
    /// One entry per non-quiescent index, `None` when inadmissible.
    pub tau_tilde: Vec<Option<f64>>,
}

/// Outcome of planning one iteration from a state.
#[derive(Debug, Clone, PartialEq)]
pub enum StepPlan {
    Quiescence(QuiescenceStep),
    /// No admissible time constant. Velocities are still reported.
    SafeguardNeeded { xdot_nq: DVector<f64>, xdot_q: DVector<f64> },
}

/// Steps 1–4 of an iteration for the state's current partition.
pub fn plan_step(
    gradient: &DVector<f64>,
    hessian: &DMatrix<f64>,
    state: &SolverState,
    config: &OptiQConfig,
    log: &mut FactorizationLog,
) -> Result<StepPlan> {
    let q = &state.quiescent;
    let nq = state.non_quiescent();
    let xdot_nq = DVector::from_fn(nq.len(), |k, _| -gradient[nq[k]]);
    let xdot_q = if q.is_empty() {
        DVector::zeros(0)
    } else {
        let blocks = extract_blocks(hessian, q, &nq)?;
        quiescent_velocity(&blocks.qq, &blocks.q_nq, &xdot_nq, config.regularization_seed, log)?
    };
    let dynamics = nonquiescent_dynamics(gradient, hessian, q, &nq, &xdot_q)?;
    let tau_tilde = estimate_time_constants(&dynamics.xdot, &dynamics.xddot, config.velocity_floor);
    Ok(match select_promotion(&tau_tilde, config.tau_grouping_rtol) {
        Some(p) => StepPlan::Quiescence(QuiescenceStep {
            dt: p.dt,
            promoted: p.positions.iter().map(|&k| nq[k]).collect(),
            xdot_nq: dynamics.xdot,
            xdot_q,
            tau_tilde,
        }),
        None => StepPlan::SafeguardNeeded { xdot_nq: dynamics.xdot, xdot_q },
    })
}

fn out_of_bounds(f: f64, x: &DVector<f64>) -> bool {
    !f.is_finite() || f.abs() > DIVERGENCE_LIMIT || !(x.norm() <= DIVERGENCE_LIMIT)
}

/// Runs the quiescence solver from `x0`.
///
/// Configuration problems (bad dimension, non-finite start, invalid
/// settings) are returned as errors; numerical trouble during the run ends
/// it with the corresponding [`Status`].
pub fn solve(obj: &dyn Objective, x0: &DVector<f64>, config: &OptiQConfig) -> Result<SolverResult> {
    config.validate()?;
    if x0.len() != obj.dimension() {
        return Err(Error::config(format!("start point has {} entries, objective expects {}", x0.len(), obj.dimension())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("start point is not finite"));
    }

    let started = Instant::now();
    let mut log = FactorizationLog::new();
    let mut trace = Vec::new();
    let mut state = SolverState::new(x0.clone());
    let mut f = obj.value(&state.x);
    let mut g = obj.gradient(&state.x);
    let threshold = config.dequiescence_threshold();

    let finish = |status: Status,
                  state: SolverState,
                  f: f64,
                  g: &DVector<f64>,
                  trace: Vec<TraceRecord>,
                  log: FactorizationLog,
                  message: Option<String>| {
        SolverResult {
            status,
            x_final: state.x,
            f_final: f,
            grad_norm_final: g.norm(),
            iterations: trace.len(),
            wall_time: started.elapsed(),
            trace,
            factorizations: log,
            message,
        }
    };

    loop {
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Ok(finish(Status::NumericalFailure, state, f, &g, trace, log, Some("non-finite objective or gradient".into())));
        }
        if g.norm_squared() <= config.eta {
            return Ok(finish(Status::Converged, state, f, &g, trace, log, None));
        }
        if state.iteration >= config.max_iterations {
            return Ok(finish(Status::MaxIterations, state, f, &g, trace, log, None));
        }

        let hessian = obj.hessian(&state.x);
        if hessian.iter().any(|v| !v.is_finite()) {
            return Ok(finish(Status::NumericalFailure, state, f, &g, trace, log, Some("non-finite Hessian".into())));
        }

        let mut demoted_count = 0;
        if state.quiescent.len() == state.dimension() {
            // All variables quiescent but not converged: release the one
            // with the largest gradient component.
            let worst = *state
                .quiescent
                .iter()
                .max_by(|&&a, &&b| g[a].abs().total_cmp(&g[b].abs()))
                .expect("dimension is positive");
            state.remove_quiescent(&[worst]);
            demoted_count += 1;
        }

        let factorizations_before = log.count();
        let plan = match plan_step(&g, &hessian, &state, config, &mut log) {
            Ok(p) => p,
            Err(e) => return Ok(finish(Status::NumericalFailure, state, f, &g, trace, log, Some(e.to_string()))),
        };
        let factored_size = (log.count() > factorizations_before).then_some(state.quiescent.len());

        match plan {
            StepPlan::Quiescence(step) => {
                let energy = 0.5 * step.xdot_nq.norm_squared();
                let x_old = state.x.clone();
                let mut next = match apply_step(&state, step.dt, &step.xdot_q, &step.xdot_nq) {
                    Ok(s) => s,
                    Err(e) => return Ok(finish(Status::Diverged, state, f, &g, trace, log, Some(e.to_string()))),
                };
                let f_new = obj.value(&next.x);
                if out_of_bounds(f_new, &next.x) {
                    return Ok(finish(Status::Diverged, next, f_new, &g, trace, log, Some("iterate left the divergence bound".into())));
                }
                let g_new = obj.gradient(&next.x);
                let demoted = match config.dequiescence {
                    DequiescenceRule::GradientDrift => {
                        let floor = gradient_noise_floor(&hessian, &x_old, &next.x, &g, &g_new);
                        gradient_drift_check(&g, &g_new, &next.quiescent, threshold, &floor)
                    }
                    DequiescenceRule::TrajectoryResidual => {
                        let x_old_q = DVector::from_iterator(next.quiescent.len(), next.quiescent.iter().map(|&i| x_old[i]));
                        trajectory_residual_demotions(&g_new, &x_old_q, &next, step.dt, threshold)
                    }
                };
                next.remove_quiescent(&demoted);
                next.insert_quiescent(step.promoted.iter().copied());
                demoted_count += demoted.len();

                trace.push(TraceRecord {
                    iteration: next.iteration,
                    t: next.t,
                    dt: step.dt,
                    f_value: f_new,
                    grad_norm: g_new.norm(),
                    quiescent_count: next.quiescent.len(),
                    promoted_count: step.promoted.len(),
                    demoted_count,
                    factored_size,
                    nq_velocity_energy: energy,
                    kind: StepKind::Quiescence,
                });
                state = next;
                f = f_new;
                g = g_new;
            }
            StepPlan::SafeguardNeeded { xdot_nq, .. } => {
                let energy = 0.5 * xdot_nq.norm_squared();
                let direction = -&g;
                let alpha = match armijo_backtrack_with(obj, &state.x, f, &g, &direction, &config.safeguard) {
                    Ok(a) => a,
                    Err(e) => return Ok(finish(Status::NumericalFailure, state, f, &g, trace, log, Some(e.to_string()))),
                };
                let x_old = state.x.clone();
                state.x += &direction * alpha;
                state.t += alpha;
                state.iteration += 1;
                f = obj.value(&state.x);
                if out_of_bounds(f, &state.x) {
                    return Ok(finish(Status::Diverged, state, f, &g, trace, log, Some("iterate left the divergence bound".into())));
                }
                let g_new = obj.gradient(&state.x);
                let demoted = match config.dequiescence {
                    DequiescenceRule::GradientDrift => {
                        let floor = gradient_noise_floor(&hessian, &x_old, &state.x, &g, &g_new);
                        gradient_drift_check(&g, &g_new, &state.quiescent, threshold, &floor)
                    }
                    DequiescenceRule::TrajectoryResidual => {
                        let x_old_q = DVector::from_iterator(state.quiescent.len(), state.quiescent.iter().map(|&i| x_old[i]));
                        trajectory_residual_demotions(&g_new, &x_old_q, &state, alpha, threshold)
                    }
                };
                state.remove_quiescent(&demoted);
                demoted_count += demoted.len();
                g = g_new;
                trace.push(TraceRecord {
                    iteration: state.iteration,
                    t: state.t,
                    dt: alpha,
                    f_value: f,
                    grad_norm: g.norm(),
                    quiescent_count: state.quiescent.len(),
                    promoted_count: 0,
                    demoted_count,
                    factored_size,
                    nq_velocity_energy: energy,
                    kind: StepKind::Safeguard,
                });
            }
        }
    }
}

/// Time constants of every variable at `x` with nothing quiescent, as
/// reported by the `diagnose` command.
pub fn initial_time_constants(obj: &dyn Objective, x: &DVector<f64>, velocity_floor: f64) -> Result<Vec<Option<f64>>> {
    let g = obj.gradient(x);
    let h = obj.hessian(x);
    let all: Vec<usize> = (0..x.len()).collect();
    let d = nonquiescent_dynamics(&g, &h, &[], &all, &DVector::zeros(0))?;
    Ok(estimate_time_constants(&d.xdot, &d.xddot, velocity_floor))
}
