//! Minimizing-movements step for the oscillator.
//!
//! The two constraints of the incremental problem fix `q_i` and `theta_i` as
//! functions of `p_i`:
//!
//! ```text
//! q_i     = q_prev + tau p_i / m
//! theta_i = f(p_i) = theta_prev - a p_i^2 + b p_i
//! a = tau^2 kappa / (m^2 c) + 1 / (m c)
//! b = (p_prev - tau kappa q_prev) / (m c)
//! ```
//!
//! so the step reduces to minimizing a scalar objective `F(p)` over the open
//! interval where `f > 0`. `F` has a logarithmic barrier at both ends.

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::oscillator::{OscillatorParams, State};
use crate::schemes::{incremental_g, StepDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmOptions {
    /// Stop when `|F'| <= newton_tol * (sum of magnitudes of the terms of F')`.
    pub newton_tol: f64,
    pub max_newton_iterations: usize,
    /// Grid size of the multistart search used when convexity is not certified.
    pub multistart_points: usize,
    /// The search interval is `p_hat +- (1 - interval_shrink) r_hat`.
    pub interval_shrink: f64,
}

impl Default for MmOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            max_newton_iterations: 50,
            multistart_points: 64,
            interval_shrink: 1e-12,
        }
    }
}

/// Centre and half-width `(p_hat, r_hat)` of the interval where `f > 0`.
pub fn feasible_interval(prev: &State, tau: f64, params: &OscillatorParams) -> (f64, f64) {
    let OscillatorParams { m, kappa, c, .. } = *params;
    let shift = prev.p - tau * kappa * prev.q;
    let denom = 2.0 + 2.0 * tau * tau * kappa / m;
    let disc = shift * shift + 4.0 * (1.0 + tau * tau * kappa / m) * m * c * prev.theta;
    (shift / denom, disc.sqrt() / denom)
}

/// `f(p)`: the temperature implied by the constraints.
pub fn reduced_temperature(prev: &State, tau: f64, params: &OscillatorParams, p: f64) -> f64 {
    let OscillatorParams { m, kappa, c, .. } = *params;
    prev.theta
        - tau * tau * kappa / (m * m * c) * p * p
        - tau * kappa / (m * c) * p * prev.q
        - p * p / (m * c)
        + p * prev.p / (m * c)
}

/// `max f = (p_prev - tau kappa q_prev)^2 / (4 (tau^2 kappa c + m c)) + theta_prev`.
pub fn max_reduced_temperature(prev: &State, tau: f64, params: &OscillatorParams) -> f64 {
    let OscillatorParams { m, kappa, c, .. } = *params;
    let shift = prev.p - tau * kappa * prev.q;
    shift * shift / (4.0 * (tau * tau * kappa * c + m * c)) + prev.theta
}

/// Small-step condition `max f <= 2 nu c / (tau lambda^2)`, sufficient for
/// strict convexity of `F`.
pub fn convexity_condition(prev: &State, tau: f64, params: &OscillatorParams) -> bool {
    max_reduced_temperature(prev, tau, params) <= convexity_bound(tau, params)
}

/// Partition-wide version: `c0 <= 2 nu c / (tau_max lambda^2)`, where `c0`
/// bounds `max f` along the whole run.
pub fn global_small_step(c0: f64, tau_max: f64, params: &OscillatorParams) -> bool {
    c0 <= convexity_bound(tau_max, params)
}

fn convexity_bound(tau: f64, params: &OscillatorParams) -> f64 {
    2.0 * params.nu * params.c / (tau * params.lambda * params.lambda)
}

/// `F(p)` and `F'(p)`; fails when `f(p) <= 0`.
pub fn reduced_objective(
    prev: &State,
    tau: f64,
    params: &OscillatorParams,
    p: f64,
) -> Result<(f64, f64)> {
    let problem = ReducedProblem::new(*prev, tau, *params);
    let value = problem.objective(p)?;
    let d = problem.derivatives(p)?;
    Ok((value, d.first))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Derivatives {
    pub first: f64,
    pub second: f64,
    /// Sum of the magnitudes of the terms of `F'`, for scaled tolerances.
    pub scale: f64,
}

/// The scalar problem `min F(p)` subject to `f(p) > 0`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ReducedProblem {
    prev: State,
    tau: f64,
    params: OscillatorParams,
    a: f64,
    b: f64,
}

impl ReducedProblem {
    pub fn new(prev: State, tau: f64, params: OscillatorParams) -> Self {
        let OscillatorParams { m, kappa, c, .. } = params;
        Self {
            prev,
            tau,
            params,
            a: tau * tau * kappa / (m * m * c) + 1.0 / (m * c),
            b: (prev.p - tau * kappa * prev.q) / (m * c),
        }
    }

    fn f(&self, p: f64) -> f64 {
        reduced_temperature(&self.prev, self.tau, &self.params, p)
    }

    fn f_prime(&self, p: f64) -> f64 {
        -2.0 * self.a * p + self.b
    }

    /// Residual of the momentum balance inside the dual potential:
    /// `(p - p_prev)/tau + kappa q(p) + lambda f(p)`.
    fn force(&self, p: f64, f: f64) -> f64 {
        let OscillatorParams {
            m, kappa, lambda, ..
        } = self.params;
        (p - self.prev.p) / self.tau + self.tau * kappa * p / m + kappa * self.prev.q + lambda * f
    }

    fn domain(&self, p: f64) -> Result<f64> {
        let f = self.f(p);
        if f > 0.0 && f.is_finite() {
            Ok(f)
        } else {
            Err(Error::OutOfDomain { p, f })
        }
    }

    pub fn objective(&self, p: f64) -> Result<f64> {
        let f = self.domain(p)?;
        let OscillatorParams {
            m, nu, lambda, c, ..
        } = self.params;
        let tau = self.tau;
        let u = self.force(p, f);
        Ok(tau * lambda * p / m - c * f.ln()
            + tau / (2.0 * nu * f) * u * u
            + tau * nu * p * p / (2.0 * m * m * f)
            + c * self.prev.theta.ln())
    }

    pub fn derivatives(&self, p: f64) -> Result<Derivatives> {
        let f = self.domain(p)?;
        let OscillatorParams {
            m,
            nu,
            kappa,
            lambda,
            c,
        } = self.params;
        let tau = self.tau;
        let df = self.f_prime(p);
        let ddf = -2.0 * self.a;
        let u = self.force(p, f);
        let du = 1.0 / tau + tau * kappa / m + lambda * df;
        let ddu = lambda * ddf;
        let k2 = tau / (2.0 * nu);
        let k3 = tau * nu / (2.0 * m * m);

        let t0 = tau * lambda / m;
        let t1 = -c * df / f;
        let t2 = k2 * (2.0 * u * du / f - u * u * df / (f * f));
        let t3 = k3 * (2.0 * p / f - p * p * df / (f * f));

        let s1 = c * (df * df - ddf * f) / (f * f);
        let s2 = k2
            * (2.0 * du * du / f + 2.0 * u * ddu / f
                - 4.0 * u * du * df / (f * f)
                - u * u * ddf / (f * f)
                + 2.0 * u * u * df * df / (f * f * f));
        let s3 = k3
            * (2.0 / f - 4.0 * p * df / (f * f) - p * p * ddf / (f * f)
                + 2.0 * p * p * df * df / (f * f * f));

        Ok(Derivatives {
            first: t0 + t1 + t2 + t3,
            second: s1 + s2 + s3,
            scale: t0.abs() + t1.abs() + t2.abs() + t3.abs(),
        })
    }

    /// Safeguarded Newton on `F'` inside `[lo, hi]`, assuming `F'(lo) < 0 < F'(hi)`.
    ///
    /// The bracket is updated from the sign of `F'` at every iterate, so the
    /// limit is a sign change from negative to positive, i.e. a local minimum.
    pub fn solve_bracketed(
        &self,
        mut lo: f64,
        mut hi: f64,
        start: f64,
        opts: &MmOptions,
    ) -> std::result::Result<(f64, usize), usize> {
        let centre = 0.5 * (lo + hi);
        let mut x = start.clamp(lo, hi);
        if x <= lo || x >= hi {
            x = centre;
        }
        for it in 1..=opts.max_newton_iterations {
            let d = match self.derivatives(x) {
                Ok(d) => d,
                Err(_) => {
                    // Rounding put x on the barrier; shrink from that side.
                    if x < centre {
                        lo = x;
                    } else {
                        hi = x;
                    }
                    x = 0.5 * (lo + hi);
                    continue;
                }
            };
            if d.first.abs() <= opts.newton_tol * d.scale.max(1.0) {
                return Ok((x, it));
            }
            if d.first < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - d.first / d.second;
            let next = if d.second > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let resolution = 4.0 * f64::EPSILON * (1.0 + x.abs());
            if (next - x).abs() <= resolution || hi - lo <= resolution {
                return Ok((next, it));
            }
            x = next;
        }
        Err(opts.max_newton_iterations)
    }
}

/// One minimizing-movements step from `prev` with step `tau`.
pub fn mm_step(
    prev: &State,
    tau: f64,
    params: &OscillatorParams,
    opts: &MmOptions,
) -> Result<(State, StepDiagnostics)> {
    mm_step_from(prev, tau, params, opts, prev.p)
}

/// [`mm_step`] with an explicit Newton starting momentum.
pub fn mm_step_from(
    prev: &State,
    tau: f64,
    params: &OscillatorParams,
    opts: &MmOptions,
    start: f64,
) -> Result<(State, StepDiagnostics)> {
    prev.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidPartition(format!(
            "step must be positive, got {tau}"
        )));
    }
    let problem = ReducedProblem::new(*prev, tau, *params);
    let (centre, radius) = feasible_interval(prev, tau, params);
    let inner = radius * (1.0 - opts.interval_shrink);
    let (lo, hi) = (centre - inner, centre + inner);
    let convex = convexity_condition(prev, tau, params);

    let mut diagnostics = StepDiagnostics {
        g_value: Extended::PosInfinity,
        newton_iterations: 0,
        convex,
        interval: (centre - radius, centre + radius),
        fallback_used: !convex,
        energy_residual: f64::NAN,
    };

    let solved = if convex {
        problem.solve_bracketed(lo, hi, start, opts)
    } else {
        multistart(&problem, lo, hi, opts)
    };
    let (p, iterations) = match solved {
        Ok(v) => v,
        Err(iterations) => {
            diagnostics.newton_iterations = iterations;
            return Err(Error::SolverFailure {
                iterations,
                diagnostics: Box::new(diagnostics),
            });
        }
    };

    let next = State {
        q: tau * p / params.m + prev.q,
        p,
        theta: reduced_temperature(prev, tau, params, p),
    };
    next.validate()?;
    diagnostics.newton_iterations = iterations;
    diagnostics.g_value = incremental_g(prev, &next, tau, params);
    diagnostics.energy_residual = super::energy_identity_residual(prev, &next, params);
    Ok((next, diagnostics))
}

/// Grid search over the interval, local refinement of every grid-local
/// minimum, global best wins.
fn multistart(
    problem: &ReducedProblem,
    lo: f64,
    hi: f64,
    opts: &MmOptions,
) -> std::result::Result<(f64, usize), usize> {
    let n = opts.multistart_points.max(3);
    let width = (hi - lo) / n as f64;
    let grid: Vec<f64> = (0..n).map(|k| lo + (k as f64 + 0.5) * width).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&x| problem.objective(x).unwrap_or(f64::INFINITY))
        .collect();

    let mut best: Option<(f64, f64)> = None;
    let mut total_iterations = 0;
    for k in 0..n {
        let left = if k == 0 { f64::INFINITY } else { values[k - 1] };
        let right = if k + 1 == n {
            f64::INFINITY
        } else {
            values[k + 1]
        };
        if !(values[k] <= left && values[k] <= right) {
            continue;
        }
        let sub_lo = if k == 0 { lo } else { grid[k - 1] };
        let sub_hi = if k + 1 == n { hi } else { grid[k + 1] };
        // Interior sub-bracket ends must show the sign pattern of a minimum.
        let bracketed = (k == 0 || problem.derivatives(sub_lo).is_ok_and(|d| d.first < 0.0))
            && (k + 1 == n || problem.derivatives(sub_hi).is_ok_and(|d| d.first > 0.0));
        if !bracketed {
            continue;
        }
        let Ok((x, it)) = problem.solve_bracketed(sub_lo, sub_hi, grid[k], opts) else {
            continue;
        };
        total_iterations += it;
        let value = problem.objective(x).unwrap_or(f64::INFINITY);
        if best.is_none_or(|(_, v)| value < v) {
            best = Some((x, value));
        }
    }
    match best {
        Some((x, _)) => Ok((x, total_iterations)),
        None => problem
            .solve_bracketed(lo, hi, 0.5 * (lo + hi), opts)
            .map(|(x, it)| (x, it + total_iterations)),
    }
}
