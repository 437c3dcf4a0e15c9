//! Implicit Euler for the oscillator, solved in closed form.
//!
//! Eliminating `q_i` and `p_i = alpha theta_i + beta` leaves the quadratic
//! `gamma theta^2 + delta theta + epsilon = 0` with `gamma < 0 < epsilon`,
//! which has exactly one positive root.

use crate::error::{Error, Result};
use crate::oscillator::{OscillatorParams, State};

/// Coefficients of the temperature equation of one implicit Euler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
}

pub fn euler_coefficients(prev: &State, tau: f64, params: &OscillatorParams) -> EulerCoefficients {
    let OscillatorParams {
        m,
        nu,
        kappa,
        lambda,
        c,
    } = *params;
    let denom = m + tau * nu + tau * tau * kappa;
    let alpha = -tau * m * lambda / denom;
    let beta = (-tau * m * kappa * prev.q + m * prev.p) / denom;
    let visc = tau * nu / (m * m * c);
    let exch = tau * lambda / (m * c);
    EulerCoefficients {
        alpha,
        beta,
        gamma: visc * alpha * alpha + exch * alpha,
        delta: 2.0 * visc * alpha * beta + exch * beta - 1.0,
        epsilon: prev.theta + visc * beta * beta,
    }
}

/// Roots of the temperature quadratic, positive one first.
pub fn temperature_roots(coeffs: &EulerCoefficients) -> Result<(f64, f64)> {
    let EulerCoefficients {
        gamma,
        delta,
        epsilon,
        ..
    } = *coeffs;
    let disc = delta * delta - 4.0 * gamma * epsilon;
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant(disc));
    }
    // Cancellation-free pair: r1 = w / gamma, r2 = epsilon / w.
    let w = -0.5 * (delta + delta.signum() * disc.sqrt());
    let (r1, r2) = (w / gamma, epsilon / w);
    Ok(if r1 > r2 { (r1, r2) } else { (r2, r1) })
}

pub fn euler_step(prev: &State, tau: f64, params: &OscillatorParams) -> Result<State> {
    prev.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidPartition(format!(
            "step must be positive, got {tau}"
        )));
    }
    let coeffs = euler_coefficients(prev, tau, params);
    let (theta, _) = temperature_roots(&coeffs)?;
    let p = coeffs.alpha * theta + coeffs.beta;
    let next = State {
        q: tau * p / params.m + prev.q,
        p,
        theta,
    };
    next.validate()?;
    Ok(next)
}

/// Residuals of the three implicit Euler equations, each divided by
/// `1 + |rate|`.
pub fn euler_residuals(
    prev: &State,
    next: &State,
    tau: f64,
    params: &OscillatorParams,
) -> [f64; 3] {
    let f = crate::oscillator::rhs_unchecked(params, next);
    let rates = [
        (next.q - prev.q) / tau,
        (next.p - prev.p) / tau,
        (next.theta - prev.theta) / tau,
    ];
    [0, 1, 2].map(|k| (rates[k] - f[k]).abs() / (1.0 + f[k].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let prev = State::new(-1.0, 0.0, 1.0).unwrap();
        for tau in [1e-3, 0.25, 1.0, 2.0] {
            let next = euler_step(&prev, tau, &OscillatorParams::unit()).unwrap();
            assert!((next.q + 1.0).abs() < 1e-15);
            assert!(next.p.abs() < 1e-15);
            assert!((next.theta - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn one_positive_root() {
        let params = OscillatorParams::new(1.3, 0.8, 2.1, 0.6, 1.7).unwrap();
        for prev in crate::oscillator::random_states(100, 17) {
            for tau in [1e-4, 0.1, 1.0, 4.0] {
                let coeffs = euler_coefficients(&prev, tau, &params);
                assert!(coeffs.gamma < 0.0 && coeffs.epsilon > 0.0);
                assert!(coeffs.epsilon / coeffs.gamma < 0.0);
                let (pos, neg) = temperature_roots(&coeffs).unwrap();
                assert!(pos > 0.0 && neg <= 0.0);
            }
        }
    }

    #[test]
    fn satisfies_the_implicit_equations() {
        let params = OscillatorParams::new(1.3, 0.8, 2.1, 0.6, 1.7).unwrap();
        for prev in crate::oscillator::random_states(100, 19) {
            for tau in [1e-3, 0.05, 0.5] {
                let next = euler_step(&prev, tau, &params).unwrap();
                let r = euler_residuals(&prev, &next, tau, &params);
                assert!(r.iter().all(|v| *v <= 1e-10), "{r:?}");
            }
        }
    }

    #[test]
    fn small_tau_limit_of_gamma() {
        // gamma = -tau^2 lambda^2 / c * (m + tau^2 kappa) / (m + tau nu + tau^2 kappa)^2
        let params = OscillatorParams::new(1.3, 0.8, 2.1, 0.6, 1.7).unwrap();
        let prev = State::new(0.2, 0.4, 1.1).unwrap();
        let tau = 0.3;
        let coeffs = euler_coefficients(&prev, tau, &params);
        let OscillatorParams {
            m,
            nu,
            kappa,
            lambda,
            c,
        } = params;
        let expected = -tau * tau * lambda * lambda / c * (m + tau * tau * kappa)
            / (m + tau * nu + tau * tau * kappa).powi(2);
        assert!((coeffs.gamma - expected).abs() < 1e-15);
    }
}
