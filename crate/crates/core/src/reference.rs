//! High-accuracy reference trajectories.
//!
//! Dormand-Prince 5(4) with an absolute-only error norm, a hard cap on the
//! step size and Hairer's fourth-order continuous extension for evaluation
//! between nodes.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::oscillator::{rhs_unchecked, OscillatorParams, State};

pub const DEFAULT_ABS_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_STEP: f64 = 1e-4;

// The system is autonomous, so the stage nodes c_i never enter.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Dense reference trajectory on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    times: Vec<f64>,
    states: Vec<State>,
    /// Continuous-extension coefficients of each accepted step.
    dense: Vec<[Vector3<f64>; 5]>,
    pub stats: SolverStats,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl ReferenceSolution {
    /// Integrator nodes; consecutive nodes are at most `max_step` apart.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last(&self) -> &State {
        self.states.last().unwrap()
    }

    /// `(t, y(t))` on the node grid.
    pub fn samples(&self) -> impl Iterator<Item = (f64, &State)> + '_ {
        self.times.iter().copied().zip(self.states.iter())
    }

    /// State at any `t in [0, T]` (clamped) by dense output.
    pub fn eval(&self, t: f64) -> State {
        let t = t.clamp(0.0, self.horizon());
        let k = self
            .times
            .partition_point(|&node| node <= t)
            .clamp(1, self.times.len() - 1)
            - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        if t == t1 {
            return self.states[k + 1];
        }
        let s = (t - t0) / (t1 - t0);
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.dense[k];
        let y = r1 + (r2 + (r3 + (r4 + r5 * s1) * s) * s1) * s;
        State {
            q: y[0],
            p: y[1],
            theta: y[2],
        }
    }
}

/// Integrates the oscillator from `y0` over `[0, horizon]`.
pub fn solve_reference(
    params: &OscillatorParams,
    y0: &State,
    horizon: f64,
    abs_tol: f64,
    max_step: f64,
) -> Result<ReferenceSolution> {
    y0.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidPartition(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(abs_tol > 0.0 && max_step > 0.0) {
        return Err(Error::ReferenceFailure {
            t: 0.0,
            reason: format!("tolerance {abs_tol} and max step {max_step} must be positive"),
        });
    }
    let f = |y: &Vector3<f64>| {
        rhs_unchecked(
            params,
            &State {
                q: y[0],
                p: y[1],
                theta: y[2],
            },
        )
    };

    let mut stats = SolverStats::default();
    let mut t = 0.0;
    let mut y = y0.to_vector();
    let mut k1 = f(&y);
    stats.evaluations += 1;
    let mut h = max_step.min(horizon);
    let min_step = 1e-14 * horizon;

    let mut times = vec![0.0];
    let mut states = vec![*y0];
    let mut dense = Vec::new();

    while t < horizon {
        let last = t + h >= horizon;
        if last {
            h = horizon - t;
        }
        let k2 = f(&(y + h * A21 * k1));
        let k3 = f(&(y + h * (A31 * k1 + A32 * k2)));
        let k4 = f(&(y + h * (A41 * k1 + A42 * k2 + A43 * k3)));
        let k5 = f(&(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)));
        let k6 = f(&(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)));
        let y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
        let k7 = f(&y_new);
        stats.evaluations += 6;

        let err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let err = err_vec.amax() / abs_tol;
        if !err.is_finite() {
            return Err(Error::ReferenceFailure {
                t,
                reason: "non-finite error estimate".into(),
            });
        }

        if err <= 1.0 {
            if y_new[2] <= 0.0 {
                return Err(Error::ReferenceFailure {
                    t: t + h,
                    reason: format!("temperature left the domain ({})", y_new[2]),
                });
            }
            let diff = y_new - y;
            let bspl = h * k1 - diff;
            dense.push([
                y,
                diff,
                bspl,
                diff - h * k7 - bspl,
                h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
            ]);
            t = if last { horizon } else { t + h };
            y = y_new;
            k1 = k7;
            times.push(t);
            states.push(State {
                q: y[0],
                p: y[1],
                theta: y[2],
            });
            stats.accepted += 1;
            let factor = (SAFETY * err.max(1e-10).powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR);
            h = (h * factor).min(max_step);
        } else {
            stats.rejected += 1;
            let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            h *= factor;
            if h < min_step {
                return Err(Error::ReferenceFailure {
                    t,
                    reason: format!("step size underflow ({h})"),
                });
            }
        }
    }

    Ok(ReferenceSolution {
        times,
        states,
        dense,
        stats,
        abs_tol,
        max_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::energy;

    #[test]
    fn equilibrium_stays_put() {
        let params = OscillatorParams::unit();
        let y0 = State::new(-1.0, 0.0, 1.0).unwrap();
        let sol = solve_reference(&params, &y0, 2.0, 1e-8, 1e-2).unwrap();
        for (_, y) in sol.samples() {
            assert!(
                (y.q + 1.0).abs() < 1e-10 && y.p.abs() < 1e-10 && (y.theta - 1.0).abs() < 1e-10
            );
        }
    }

    #[test]
    fn node_spacing_respects_max_step() {
        let params = OscillatorParams::unit();
        let y0 = State::new(1.0, 1.0, 1.0).unwrap();
        let sol = solve_reference(&params, &y0, 3.0, 1e-8, 1e-2).unwrap();
        assert_eq!(sol.times()[0], 0.0);
        assert_eq!(sol.horizon(), 3.0);
        assert!(sol
            .times()
            .windows(2)
            .all(|w| w[1] - w[0] <= 1e-2 * (1.0 + 1e-12)));
        assert_eq!(sol.stats.accepted + 1, sol.times().len());
    }

    #[test]
    fn dense_output_matches_nodes_and_finer_solve() {
        let params = OscillatorParams::new(1.3, 0.8, 2.1, 0.6, 1.7).unwrap();
        let y0 = State::new(1.0, -0.5, 2.0).unwrap();
        let coarse = solve_reference(&params, &y0, 2.0, 1e-10, 0.05).unwrap();
        let fine = solve_reference(&params, &y0, 2.0, 1e-12, 1e-3).unwrap();
        for (t, y) in coarse.samples() {
            assert_eq!(coarse.eval(t), *y);
        }
        for k in 0..200 {
            let t = 0.0101 * k as f64;
            let a = coarse.eval(t);
            let b = fine.eval(t);
            assert!((a.to_vector() - b.to_vector()).amax() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn energy_is_conserved() {
        let params = OscillatorParams::unit();
        let y0 = State::new(1.0, 1.0, 1.0).unwrap();
        let sol = solve_reference(&params, &y0, 5.0, 1e-8, 1e-3).unwrap();
        let e0 = energy(&params, &y0);
        let drift = sol
            .states()
            .iter()
            .map(|y| (energy(&params, y) - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-8, "drift {drift}");
    }

    #[test]
    fn rejects_invalid_inputs() {
        let params = OscillatorParams::unit();
        let y0 = State::new(1.0, 1.0, 1.0).unwrap();
        assert!(solve_reference(&params, &y0, 0.0, 1e-8, 1e-3).is_err());
        assert!(solve_reference(&params, &y0, 1.0, 0.0, 1e-3).is_err());
        let cold = State {
            q: 0.0,
            p: 0.0,
            theta: 0.0,
        };
        assert!(solve_reference(&params, &cold, 1.0, 1e-8, 1e-3).is_err());
    }
}
