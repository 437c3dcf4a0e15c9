//! Post-processing of discrete trajectories: energy bookkeeping, entropy
//! monotonicity, the a-posteriori estimator `sum (G)^+`, uniform errors
//! against a reference solution and convergence-order fits.

use std::thread;

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::oscillator::{energy, OscillatorParams, State};
use crate::reference::ReferenceSolution;
use crate::schemes::{
    energy_identity_residual, incremental_g, run, MmOptions, Partition, Scheme, StepDiagnostics,
    Trajectory,
};

/// `S(y)` for a state already known to be valid.
fn entropy_of(params: &OscillatorParams, y: &State) -> f64 {
    -params.lambda * y.q + params.c + params.c * y.theta.ln()
}

/// Aggregated diagnostics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// `E(y_i)`, `i = 0..=N`.
    pub energy: Vec<f64>,
    /// `S(y_i)`, `i = 0..=N`.
    pub entropy: Vec<f64>,
    /// `D^q_j = sum_{i<=j} kappa |q_i - q_{i-1}|^2 / 2`, `j = 1..=N`.
    pub dissipation_q: Vec<f64>,
    /// `D^p_j = sum_{i<=j} |p_i - p_{i-1}|^2 / (2m)`, `j = 1..=N`.
    pub dissipation_p: Vec<f64>,
    /// `G(tau_i, y_{i-1}; y_i)`, `i = 1..=N`.
    pub g_values: Vec<Extended>,
    pub g_plus_total: Extended,
    pub min_theta: f64,
    pub max_energy_residual: f64,
    pub steps: Vec<StepDiagnostics>,
}

impl RunReport {
    pub fn new(traj: &Trajectory, params: &OscillatorParams, steps: Vec<StepDiagnostics>) -> Self {
        let g_values: Vec<Extended> = steps.iter().map(|s| s.g_value).collect();
        let (dissipation_q, dissipation_p) = dissipation_sums(traj, params);
        Self {
            energy: traj.states.iter().map(|y| energy(params, y)).collect(),
            entropy: traj.states.iter().map(|y| entropy_of(params, y)).collect(),
            dissipation_q,
            dissipation_p,
            g_plus_total: positive_sum(&g_values),
            g_values,
            min_theta: traj
                .states
                .iter()
                .map(|y| y.theta)
                .fold(f64::INFINITY, f64::min),
            max_energy_residual: energy_identity_residuals(traj, params)
                .into_iter()
                .fold(0.0, |acc, r| acc.max(r.abs())),
            steps,
        }
    }
}

fn positive_sum(values: &[Extended]) -> Extended {
    values
        .iter()
        .map(|g| g.positive_part())
        .try_fold(Extended::Finite(0.0), |acc, g| acc.checked_add(g))
        .unwrap_or(Extended::PosInfinity)
}

/// `G(tau_i, y_{i-1}; y_i)` along a trajectory.
pub fn g_series(traj: &Trajectory, params: &OscillatorParams) -> Vec<Extended> {
    let taus = traj.partition.step_sizes();
    traj.states
        .windows(2)
        .zip(taus)
        .map(|(w, tau)| incremental_g(&w[0], &w[1], tau, params))
        .collect()
}

/// A-posteriori estimator `sum_i (G(tau_i, y_{i-1}; y_i))^+`.
///
/// `+inf` as soon as one step leaves the constraint set of `G`.
pub fn g_plus_sum(traj: &Trajectory, params: &OscillatorParams) -> Extended {
    positive_sum(&g_series(traj, params))
}

/// Per-step defect `E(y_i) + kappa |dq|^2/2 + |dp|^2/(2m) - E(y_{i-1})`.
pub fn energy_identity_residuals(traj: &Trajectory, params: &OscillatorParams) -> Vec<f64> {
    traj.states
        .windows(2)
        .map(|w| energy_identity_residual(&w[0], &w[1], params))
        .collect()
}

/// Cumulative numerical dissipation `(D^q_j, D^p_j)`, `j = 1..=N`.
pub fn dissipation_sums(traj: &Trajectory, params: &OscillatorParams) -> (Vec<f64>, Vec<f64>) {
    let mut dq_sum = 0.0;
    let mut dp_sum = 0.0;
    traj.states
        .windows(2)
        .map(|w| {
            let dq = w[1].q - w[0].q;
            let dp = w[1].p - w[0].p;
            dq_sum += 0.5 * params.kappa * dq * dq;
            dp_sum += dp * dp / (2.0 * params.m);
            (dq_sum, dp_sum)
        })
        .unzip()
}

/// Indices `i` with `S(y_i) < S(y_{i-1}) - tol`.
pub fn entropy_violations(traj: &Trajectory, params: &OscillatorParams, tol: f64) -> Vec<usize> {
    let s: Vec<f64> = traj.states.iter().map(|y| entropy_of(params, y)).collect();
    (1..s.len()).filter(|&i| s[i] < s[i - 1] - tol).collect()
}

/// Quantity compared by [`sup_error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Position,
    Momentum,
    Temperature,
    /// `|E(y_hat(t)) - E(y_0)|`, measured against the initial energy.
    Energy,
}

impl Quantity {
    fn component(self, y: &State) -> f64 {
        match self {
            Quantity::Position => y.q,
            Quantity::Momentum => y.p,
            Quantity::Temperature | Quantity::Energy => y.theta,
        }
    }
}

/// `max_t |quantity(y_hat(t)) - quantity(y_ref(t))|` over the reference nodes,
/// with `y_hat` the piecewise-linear interpolant of `traj`.
pub fn sup_error(
    traj: &Trajectory,
    reference: &ReferenceSolution,
    params: &OscillatorParams,
    quantity: Quantity,
) -> Result<f64> {
    let (t_traj, t_ref) = (traj.partition.horizon(), reference.horizon());
    if (t_traj - t_ref).abs() > 1e-12 * t_ref.max(1.0) {
        return Err(Error::HorizonMismatch {
            trajectory: t_traj,
            reference: t_ref,
        });
    }
    let e0 = energy(params, traj.initial());
    let worst = reference
        .samples()
        .map(|(t, y_ref)| {
            let y = traj.piecewise_linear(t);
            match quantity {
                Quantity::Energy => (energy(params, &y) - e0).abs(),
                _ => (quantity.component(&y) - quantity.component(y_ref)).abs(),
            }
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Least-squares slope of `log(error)` against `log(tau)`.
///
/// Cells that are missing or not strictly positive are skipped; `None` with
/// fewer than two usable points.
pub fn fit_order(taus: &[f64], errors: &[Option<f64>]) -> Option<f64> {
    let points: Vec<(f64, f64)> = taus
        .iter()
        .zip(errors)
        .filter_map(|(&tau, e)| match e {
            Some(e) if *e > 0.0 && tau > 0.0 => Some((tau.ln(), e.ln())),
            _ => None,
        })
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Uniform errors of one scheme at one step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellErrors {
    pub theta: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    /// `None` when the scheme failed at this step size.
    pub mm: Option<CellErrors>,
    pub euler: Option<CellErrors>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Slopes {
    pub theta_mm: Option<f64>,
    pub theta_euler: Option<f64>,
    pub energy_mm: Option<f64>,
    pub energy_euler: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    /// Ordered by strictly decreasing `tau`.
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn taus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.tau).collect()
    }

    /// Fitted orders over rows with `tau_min <= tau <= tau_max`.
    pub fn slopes(&self, tau_min: f64, tau_max: f64) -> Slopes {
        let rows: Vec<&ConvergenceRow> = self
            .rows
            .iter()
            .filter(|r| r.tau >= tau_min && r.tau <= tau_max)
            .collect();
        let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
        let column = |pick: fn(&ConvergenceRow) -> Option<f64>| {
            let errors: Vec<Option<f64>> = rows.iter().map(|r| pick(r)).collect();
            fit_order(&taus, &errors)
        };
        Slopes {
            theta_mm: column(|r| r.mm.map(|c| c.theta)),
            theta_euler: column(|r| r.euler.map(|c| c.theta)),
            energy_mm: column(|r| r.mm.map(|c| c.energy)),
            energy_euler: column(|r| r.euler.map(|c| c.energy)),
        }
    }
}

/// `tau_n = 2^-n` for `n = n_min..=n_max`.
pub fn dyadic_steps(n_min: i32, n_max: i32) -> Vec<f64> {
    (n_min..=n_max).map(|n| 2f64.powi(-n)).collect()
}

fn cell(
    scheme: Scheme,
    y0: &State,
    partition: &Partition,
    params: &OscillatorParams,
    reference: &ReferenceSolution,
    opts: &MmOptions,
) -> Option<CellErrors> {
    let traj = run(scheme, y0, partition, params, opts).ok()?.trajectory;
    Some(CellErrors {
        theta: sup_error(&traj, reference, params, Quantity::Temperature).ok()?,
        energy: sup_error(&traj, reference, params, Quantity::Energy).ok()?,
    })
}

/// Runs both schemes for every step size in `taus` (sorted to decreasing
/// order) against `reference`. Step sizes run concurrently; rows come back in
/// table order regardless.
pub fn convergence_study(
    params: &OscillatorParams,
    y0: &State,
    reference: &ReferenceSolution,
    taus: &[f64],
    opts: &MmOptions,
) -> Result<ConvergenceTable> {
    let mut taus = taus.to_vec();
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    let horizon = reference.horizon();
    let partitions = taus
        .iter()
        .map(|&tau| Partition::uniform(horizon, tau))
        .collect::<Result<Vec<_>>>()?;

    let rows = thread::scope(|scope| {
        let handles: Vec<_> = taus
            .iter()
            .zip(&partitions)
            .map(|(&tau, partition)| {
                scope.spawn(move || ConvergenceRow {
                    tau,
                    mm: cell(
                        Scheme::MinimizingMovements,
                        y0,
                        partition,
                        params,
                        reference,
                        opts,
                    ),
                    euler: cell(
                        Scheme::ImplicitEuler,
                        y0,
                        partition,
                        params,
                        reference,
                        opts,
                    ),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("convergence cell panicked"))
            .collect()
    });
    Ok(ConvergenceTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::solve_reference;
    use crate::schemes::Partition;

    #[test]
    fn fit_order_recovers_exact_power_laws() {
        let taus = dyadic_steps(2, 8);
        let linear: Vec<Option<f64>> = taus.iter().map(|&t| Some(t)).collect();
        assert!((fit_order(&taus, &linear).unwrap() - 1.0).abs() < 1e-12);
        let quadratic: Vec<Option<f64>> = taus.iter().map(|&t| Some(3.0 * t * t)).collect();
        assert!((fit_order(&taus, &quadratic).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_order_skips_missing_cells() {
        let taus = [1.0, 0.5, 0.25];
        assert_eq!(fit_order(&taus, &[None, Some(0.0), Some(1.0)]), None);
        let slope = fit_order(&taus, &[None, Some(0.5), Some(0.25)]).unwrap();
        assert!((slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_trajectory_has_no_entropy_violations() {
        let params = OscillatorParams::unit();
        let y = State::new(-1.0, 0.0, 1.0).unwrap();
        let traj = Trajectory::new(Partition::uniform(1.0, 0.25).unwrap(), vec![y; 5]).unwrap();
        assert!(entropy_violations(&traj, &params, 0.0).is_empty());
        assert_eq!(energy_identity_residuals(&traj, &params), vec![0.0; 4]);
        let (dq, dp) = dissipation_sums(&traj, &params);
        assert_eq!((dq, dp), (vec![0.0; 4], vec![0.0; 4]));
    }

    #[test]
    fn reference_sampled_at_its_own_nodes_has_zero_error() {
        let params = OscillatorParams::unit();
        let y0 = State::new(1.0, 1.0, 1.0).unwrap();
        let reference = solve_reference(&params, &y0, 1.0, 1e-8, 1e-2).unwrap();
        let partition = Partition::new(reference.times().to_vec()).unwrap();
        let traj = Trajectory::new(partition, reference.states().to_vec()).unwrap();
        for quantity in [
            Quantity::Position,
            Quantity::Momentum,
            Quantity::Temperature,
        ] {
            assert_eq!(
                sup_error(&traj, &reference, &params, quantity).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let params = OscillatorParams::unit();
        let y0 = State::new(1.0, 1.0, 1.0).unwrap();
        let reference = solve_reference(&params, &y0, 1.0, 1e-8, 1e-2).unwrap();
        let traj = Trajectory::new(Partition::uniform(2.0, 1.0).unwrap(), vec![y0; 3]).unwrap();
        assert!(matches!(
            sup_error(&traj, &reference, &params, Quantity::Temperature),
            Err(Error::HorizonMismatch { .. })
        ));
    }

    #[test]
    fn positive_sum_saturates_at_infinity() {
        let values = [
            Extended::Finite(-1.0),
            Extended::Finite(0.5),
            Extended::PosInfinity,
        ];
        assert_eq!(positive_sum(&values), Extended::PosInfinity);
        assert_eq!(positive_sum(&values[..2]), Extended::Finite(0.5));
    }
}
