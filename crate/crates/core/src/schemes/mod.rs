//! Time steppers for the oscillator and the trajectories they produce.

mod euler;
mod minimizing;

pub use euler::{
    euler_coefficients, euler_residuals, euler_step, temperature_roots, EulerCoefficients,
};
pub use minimizing::{
    convexity_condition, feasible_interval, global_small_step, max_reduced_temperature, mm_step,
    mm_step_from, reduced_objective, reduced_temperature, MmOptions,
};

use crate::diagnostics::RunReport;
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::oscillator::{energy, OscillatorParams, State};

/// Constraint tolerance of [`incremental_g`], relative to `1 + |candidate|`.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Time grid `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    nodes: Vec<f64>,
}

impl Partition {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidPartition("need at least one step".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidPartition(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPartition("nodes must be finite".into()));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPartition(format!(
                "nodes must increase strictly ({} after {})",
                w[1], w[0]
            )));
        }
        Ok(Self { nodes })
    }

    /// Steps of size `tau` from 0; the last step is shortened to land on `horizon`
    /// when `tau` does not divide it.
    pub fn uniform(horizon: f64, tau: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite() && tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidPartition(format!(
                "horizon and step must be positive, got T = {horizon}, tau = {tau}"
            )));
        }
        let steps = (horizon / tau - 1e-9).ceil().max(1.0) as usize;
        let mut nodes: Vec<f64> = (0..steps).map(|k| k as f64 * tau).collect();
        nodes.push(horizon);
        Self::new(nodes)
    }

    /// `steps` equal steps of size `horizon / steps`.
    pub fn uniform_steps(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidPartition("need at least one step".into()));
        }
        let tau = horizon / steps as f64;
        let mut nodes: Vec<f64> = (0..steps).map(|k| k as f64 * tau).collect();
        nodes.push(horizon);
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// `tau_i = t_i - t_{i-1}` for `i = 1..=N`.
    pub fn step(&self, i: usize) -> f64 {
        self.nodes[i] - self.nodes[i - 1]
    }

    pub fn step_sizes(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Largest step.
    pub fn diameter(&self) -> f64 {
        self.step_sizes().into_iter().fold(0.0, f64::max)
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Index `i >= 1` with `t in (t_{i-1}, t_i]`; `t` is clamped to `[0, T]`
    /// and `t = 0` maps to the first interval.
    fn interval(&self, t: f64) -> usize {
        let i = self.nodes.partition_point(|&node| node < t);
        i.clamp(1, self.steps())
    }
}

/// Discrete states on a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub partition: Partition,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn new(partition: Partition, states: Vec<State>) -> Result<Self> {
        if states.len() != partition.nodes().len() {
            return Err(Error::InvalidPartition(format!(
                "{} states for {} nodes",
                states.len(),
                partition.nodes().len()
            )));
        }
        states.iter().try_for_each(State::validate)?;
        Ok(Self { partition, states })
    }

    pub fn initial(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        self.partition.nodes()
    }

    /// Backward piecewise-constant interpolant: `y_i` on `(t_{i-1}, t_i]`,
    /// `y_0` at `t = 0`. Times outside `[0, T]` are clamped.
    pub fn piecewise_constant(&self, t: f64) -> State {
        if t <= 0.0 {
            return self.states[0];
        }
        self.states[self.partition.interval(t)]
    }

    /// Piecewise-linear interpolant through `(t_i, y_i)`. Times outside
    /// `[0, T]` are clamped.
    pub fn piecewise_linear(&self, t: f64) -> State {
        let nodes = self.partition.nodes();
        let t = t.clamp(0.0, self.partition.horizon());
        let i = self.partition.interval(t);
        if t == nodes[i] {
            return self.states[i];
        }
        let s = (t - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
        State::lerp(&self.states[i - 1], &self.states[i], s)
    }
}

/// Per-step record of a stepper.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// `G(tau, y_prev; y)` at the accepted state.
    pub g_value: Extended,
    pub newton_iterations: usize,
    /// Small-step convexity condition held for this step.
    pub convex: bool,
    /// Open interval `(p_hat - r_hat, p_hat + r_hat)` where `f > 0`.
    pub interval: (f64, f64),
    pub fallback_used: bool,
    /// `E(y) + kappa |dq|^2/2 + |dp|^2/(2m) - E(y_prev)`.
    pub energy_residual: f64,
}

impl StepDiagnostics {
    /// Diagnostics of an externally computed step (no Newton solve).
    pub fn evaluate(prev: &State, next: &State, tau: f64, params: &OscillatorParams) -> Self {
        let (centre, radius) = feasible_interval(prev, tau, params);
        Self {
            g_value: incremental_g(prev, next, tau, params),
            newton_iterations: 0,
            convex: convexity_condition(prev, tau, params),
            interval: (centre - radius, centre + radius),
            fallback_used: false,
            energy_residual: energy_identity_residual(prev, next, params),
        }
    }
}

/// Defect of the discrete energy balance of one step.
pub fn energy_identity_residual(prev: &State, next: &State, params: &OscillatorParams) -> f64 {
    let dq = next.q - prev.q;
    let dp = next.p - prev.p;
    energy(params, next) + 0.5 * params.kappa * dq * dq + dp * dp / (2.0 * params.m)
        - energy(params, prev)
}

/// Incremental functional `G(tau, prev; cand)`.
///
/// `+inf` when `theta <= 0` or when the position and heat constraints
///
/// ```text
/// (q - q_prev)/tau = p/m
/// c (theta - theta_prev)/tau = -kappa q p/m - p (p - p_prev)/(m tau)
/// ```
///
/// fail by more than `CONSTRAINT_TOL * (1 + |cand|)`.
pub fn incremental_g(prev: &State, cand: &State, tau: f64, params: &OscillatorParams) -> Extended {
    let OscillatorParams {
        m,
        nu,
        kappa,
        lambda,
        c,
    } = *params;
    if !cand.is_valid() || !prev.is_valid() {
        return Extended::PosInfinity;
    }
    let tol = CONSTRAINT_TOL * (1.0 + cand.norm());
    let position = (cand.q - prev.q) / tau - cand.p / m;
    let heat = c * (cand.theta - prev.theta) / tau
        + kappa * cand.q * cand.p / m
        + cand.p * (cand.p - prev.p) / (m * tau);
    if position.abs() > tol || heat.abs() > tol {
        return Extended::PosInfinity;
    }
    let force = (cand.p - prev.p) / tau + kappa * cand.q + lambda * cand.theta;
    Extended::Finite(
        lambda * cand.q - c * cand.theta.ln()
            + tau / (2.0 * nu * cand.theta) * force * force
            + tau * nu * cand.p * cand.p / (2.0 * m * m * cand.theta)
            - lambda * prev.q
            + c * prev.theta.ln(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    MinimizingMovements,
    ImplicitEuler,
}

impl Scheme {
    pub fn step(
        self,
        prev: &State,
        tau: f64,
        params: &OscillatorParams,
        opts: &MmOptions,
    ) -> Result<(State, StepDiagnostics)> {
        match self {
            Scheme::MinimizingMovements => mm_step(prev, tau, params, opts),
            Scheme::ImplicitEuler => {
                let next = euler_step(prev, tau, params)?;
                Ok((next, StepDiagnostics::evaluate(prev, &next, tau, params)))
            }
        }
    }
}

/// A completed run.
#[derive(Debug, Clone)]
pub struct Run {
    pub trajectory: Trajectory,
    pub report: RunReport,
}

/// A run aborted at `step`, with the states computed so far.
#[derive(Debug, Clone)]
pub struct RunFailure {
    /// 1-based index of the failing step.
    pub step: usize,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub source: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {} failed: {}", self.step, self.source)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Steps `scheme` across `partition` starting from `y0`.
pub fn run(
    scheme: Scheme,
    y0: &State,
    partition: &Partition,
    params: &OscillatorParams,
    opts: &MmOptions,
) -> std::result::Result<Run, RunFailure> {
    if let Err(source) = y0.validate() {
        return Err(RunFailure {
            step: 0,
            times: vec![],
            states: vec![],
            source,
        });
    }
    let mut states = Vec::with_capacity(partition.nodes().len());
    let mut steps = Vec::with_capacity(partition.steps());
    states.push(*y0);
    for i in 1..=partition.steps() {
        let prev = states[i - 1];
        match scheme.step(&prev, partition.step(i), params, opts) {
            Ok((next, diag)) => {
                states.push(next);
                steps.push(diag);
            }
            Err(source) => {
                return Err(RunFailure {
                    step: i,
                    times: partition.nodes()[..i].to_vec(),
                    states,
                    source,
                })
            }
        }
    }
    let trajectory = Trajectory {
        partition: partition.clone(),
        states,
    };
    let report = RunReport::new(&trajectory, params, steps);
    Ok(Run { trajectory, report })
}
