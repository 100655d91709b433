//! Wirtinger Flow (WF) and Accelerated Wirtinger Flow (AWF).
//!
//! WF iterates `s ← s − μ ∇J(s)`. AWF adds Nesterov momentum:
//!
//! ```text
//! v_{t+1} = s_t − μ ∇J(s_t)
//! q_{t+1} = (1 + sqrt(1 + 4 q_t²)) / 2
//! s_{t+1} = v_{t+1} + ((q_t − 1) / q_{t+1}) (v_{t+1} − v_t)
//! ```
//!
//! with `q_1 = 1` and `v_1 = s_1`. Both use the same analytical `μ` unless
//! overridden.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::field::Field2D;
use crate::objective::{cost_and_gradient, gradient, step_size, MeasurementSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Wf,
    Awf,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Wf => "wf",
            Algorithm::Awf => "awf",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wf" => Ok(Algorithm::Wf),
            "awf" => Ok(Algorithm::Awf),
            other => Err(Error::invalid(format!(
                "unknown algorithm '{other}' (expected wf or awf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Manual step size; the analytical one is used when `None`.
    pub step_override: Option<f64>,
    /// Stop once `‖∇J‖₂ ≤ grad_tol`.
    pub grad_tol: f64,
    pub record_trace: bool,
    pub algorithm: Algorithm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step_override: None,
            grad_tol: 0.0,
            record_trace: true,
            algorithm: Algorithm::Awf,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::invalid(format!(
                "grad_tol must be non-negative, got {}",
                self.grad_tol
            )));
        }
        if let Some(mu) = self.step_override {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::invalid(format!(
                    "step size must be positive, got {mu}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-iteration history. Index 0 holds the initial point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace {
    pub costs: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub step_size_used: f64,
    pub iterations_run: usize,
    pub final_cost: f64,
    pub final_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Current iterate (the gradient evaluation point).
    pub s: Field2D,
    /// AWF auxiliary sequence.
    pub v: Field2D,
    /// AWF momentum scalar.
    pub q: f64,
    pub iter: usize,
}

impl SolverState {
    pub fn new(s0: Field2D) -> Self {
        Self {
            v: s0.clone(),
            s: s0,
            q: 1.0,
            iter: 0,
        }
    }
}

/// Fourier-domain variable of a constant image `amplitude · e^{j·phase}`:
/// a DC spike of magnitude `amplitude · sqrt(n1·n2)`.
pub fn init_constant(n1: usize, n2: usize, amplitude: f64, phase: f64) -> Field2D {
    let value = Complex64::from_polar(amplitude, phase);
    fft2(&Field2D::from_fn(n1, n2, |_, _| value))
}

/// `q_{t+1} = (1 + sqrt(1 + 4 q_t²)) / 2`.
pub fn next_q(q: f64) -> f64 {
    0.5 + 0.5 * (1.0 + 4.0 * q * q).sqrt()
}

/// Nesterov coefficient `(q_t − 1) / q_{t+1}`.
pub fn nesterov_momentum(q: f64, q_next: f64) -> f64 {
    (q - 1.0) / q_next
}

fn check_step(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "step size must be positive, got {mu}"
        )))
    }
}

fn finite_gradient(grad: &Field2D, iter: usize) -> Result<()> {
    if grad.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalFailure {
            iter,
            what: "non-finite gradient".into(),
        })
    }
}

fn apply_wf(state: &SolverState, grad: &Field2D, mu: f64) -> SolverState {
    SolverState {
        s: state.s.axpy(Complex64::new(-mu, 0.0), grad),
        v: state.v.clone(),
        q: state.q,
        iter: state.iter + 1,
    }
}

fn apply_awf(
    state: &SolverState,
    grad: &Field2D,
    mu: f64,
    momentum: impl Fn(f64, f64) -> f64,
) -> Result<SolverState> {
    let v_next = state.s.axpy(Complex64::new(-mu, 0.0), grad);
    let q_next = next_q(state.q);
    let beta = momentum(state.q, q_next);
    let s_next = v_next.axpy(Complex64::new(beta, 0.0), &v_next.sub(&state.v));
    if !s_next.is_finite() || !q_next.is_finite() {
        return Err(Error::NumericalFailure {
            iter: state.iter,
            what: "non-finite accelerated iterate".into(),
        });
    }
    Ok(SolverState {
        s: s_next,
        v: v_next,
        q: q_next,
        iter: state.iter + 1,
    })
}

/// One WF iteration; `v` and `q` are carried over unchanged.
pub fn wf_step(state: &SolverState, meas: &MeasurementSet, mu: f64) -> Result<SolverState> {
    check_step(mu)?;
    let grad = gradient(&state.s, meas)?;
    finite_gradient(&grad, state.iter)?;
    Ok(apply_wf(state, &grad, mu))
}

/// One AWF iteration with the Nesterov momentum coefficient.
pub fn awf_step(state: &SolverState, meas: &MeasurementSet, mu: f64) -> Result<SolverState> {
    awf_step_with_momentum(state, meas, mu, nesterov_momentum)
}

/// AWF iteration with a caller-supplied momentum rule `(q_t, q_{t+1}) ↦ β`.
pub fn awf_step_with_momentum(
    state: &SolverState,
    meas: &MeasurementSet,
    mu: f64,
    momentum: impl Fn(f64, f64) -> f64,
) -> Result<SolverState> {
    check_step(mu)?;
    if !(state.q >= 1.0) {
        return Err(Error::invalid(format!(
            "momentum scalar must be at least 1, got {}",
            state.q
        )));
    }
    let grad = gradient(&state.s, meas)?;
    finite_gradient(&grad, state.iter)?;
    apply_awf(state, &grad, mu, momentum)
}

/// Runs WF or AWF from `s0` until `max_iters` steps or `‖∇J‖ ≤ grad_tol`.
///
/// The trace records `J` and `‖∇J‖` at every gradient evaluation point
/// `s_t`, starting with `s0`.
pub fn run(
    meas: &MeasurementSet,
    cfg: &SolverConfig,
    s0: Field2D,
) -> Result<(Field2D, SolverTrace)> {
    cfg.validate()?;
    if s0.shape() != meas.grid() {
        return Err(Error::invalid(format!(
            "initial estimate is {}x{}, expected {}x{}",
            s0.rows(),
            s0.cols(),
            meas.grid().0,
            meas.grid().1
        )));
    }
    let mu = match cfg.step_override {
        Some(mu) => mu,
        None => {
            let (n1, n2) = meas.grid();
            step_size(meas.pupil(), meas.plan(), n1, n2)?
        }
    };

    let mut trace = SolverTrace {
        step_size_used: mu,
        ..SolverTrace::default()
    };
    let mut state = SolverState::new(s0);
    let (mut cost, mut grad) = evaluate(&state, meas)?;
    let mut grad_norm = grad.norm();
    if cfg.record_trace {
        trace.costs.push(cost);
        trace.grad_norms.push(grad_norm);
    }

    while state.iter < cfg.max_iters && grad_norm > cfg.grad_tol {
        state = match cfg.algorithm {
            Algorithm::Wf => apply_wf(&state, &grad, mu),
            Algorithm::Awf => apply_awf(&state, &grad, mu, nesterov_momentum)?,
        };
        (cost, grad) = evaluate(&state, meas)?;
        grad_norm = grad.norm();
        if cfg.record_trace {
            trace.costs.push(cost);
            trace.grad_norms.push(grad_norm);
        }
    }

    trace.iterations_run = state.iter;
    trace.final_cost = cost;
    trace.final_grad_norm = grad_norm;
    Ok((state.s, trace))
}

fn evaluate(state: &SolverState, meas: &MeasurementSet) -> Result<(f64, Field2D)> {
    let (cost, grad) = cost_and_gradient(&state.s, meas)?;
    if !cost.is_finite() {
        return Err(Error::NumericalFailure {
            iter: state.iter,
            what: "non-finite cost".into(),
        });
    }
    finite_gradient(&grad, state.iter)?;
    Ok((cost, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    pub bound_holds: bool,
    pub min_grad_sq: f64,
    pub bound_value: f64,
}

/// Checks `min_t ‖∇J(s_t)‖² ≤ J(s_1) / (μ T)` over the `T` gradients that
/// drove the run, using `0` as the lower bound on the optimal cost.
pub fn stationarity_check(trace: &SolverTrace, mu: f64) -> StationarityReport {
    assert!(
        !trace.grad_norms.is_empty() && !trace.costs.is_empty(),
        "stationarity check needs a recorded trace"
    );
    let steps = trace.iterations_run.max(1).min(trace.grad_norms.len());
    let min_grad_sq = trace.grad_norms[..steps]
        .iter()
        .map(|g| g * g)
        .fold(f64::INFINITY, f64::min);
    let bound_value = trace.costs[0] / (mu * steps as f64);
    StationarityReport {
        bound_holds: min_grad_sq <= bound_value,
        min_grad_sq,
        bound_value,
    }
}
