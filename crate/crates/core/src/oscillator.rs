//! Thermodynamically consistent damped harmonic oscillator.
//!
//! State `y = (q, p, theta)`: position, momentum and absolute temperature.
//! With `E = p^2/(2m) + c theta + kappa q^2/2` and
//! `S = -lambda q + c + c ln(theta)` the dynamics
//!
//! ```text
//! q'     = p/m
//! p'     = -nu p/m - kappa q - lambda theta
//! theta' = nu p^2/(m^2 c) + lambda p theta/(m c)
//! ```
//!
//! take the GENERIC form `y' = L(y) DE(y) + K(y) DS(y)`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::generic::SystemModel;

/// Seed used for sampled structural checks unless overridden.
pub const DEFAULT_SEED: u64 = 42;

/// Feasibility tolerance of the closed-form dual potential, relative to
/// `max(1, |eta|)`.
pub const PSI_STAR_FEASIBILITY_TOL: f64 = 1e-10;

/// Material constants, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    /// Mass.
    pub m: f64,
    /// Viscosity.
    pub nu: f64,
    /// Elastic modulus.
    pub kappa: f64,
    /// Thermal-exchange coefficient.
    pub lambda: f64,
    /// Heat capacity.
    pub c: f64,
}

impl OscillatorParams {
    pub fn new(m: f64, nu: f64, kappa: f64, lambda: f64, c: f64) -> Result<Self> {
        let fields = [
            ("m", m),
            ("nu", nu),
            ("kappa", kappa),
            ("lambda", lambda),
            ("c", c),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            m,
            nu,
            kappa,
            lambda,
            c,
        })
    }

    /// `m = nu = kappa = lambda = c = 1`.
    pub fn unit() -> Self {
        Self {
            m: 1.0,
            nu: 1.0,
            kappa: 1.0,
            lambda: 1.0,
            c: 1.0,
        }
    }
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self::unit()
    }
}

/// Oscillator state `(q, p, theta)`.
///
/// [`State::new`] rejects `theta <= 0`. The fields are public so that scheme
/// internals can form trial states; every fallible operation re-checks the
/// temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub q: f64,
    pub p: f64,
    pub theta: f64,
}

impl State {
    pub fn new(q: f64, p: f64, theta: f64) -> Result<Self> {
        let s = Self { q, p, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn is_valid(&self) -> bool {
        self.q.is_finite() && self.p.is_finite() && self.theta.is_finite() && self.theta > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidState(format!(
                "(q, p, theta) = ({}, {}, {}) requires finite entries and theta > 0",
                self.q, self.p, self.theta
            )))
        }
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.q, self.p, self.theta)
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.q, self.p, self.theta])
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            q: y[0],
            p: y[1],
            theta: y[2],
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    /// `(1 - s) a + s b`.
    pub fn lerp(a: &State, b: &State, s: f64) -> State {
        State {
            q: a.q + s * (b.q - a.q),
            p: a.p + s * (b.p - a.p),
            theta: a.theta + s * (b.theta - a.theta),
        }
    }
}

pub fn energy(params: &OscillatorParams, y: &State) -> f64 {
    y.p * y.p / (2.0 * params.m) + params.c * y.theta + 0.5 * params.kappa * y.q * y.q
}

pub fn entropy(params: &OscillatorParams, y: &State) -> Result<f64> {
    y.validate()?;
    Ok(-params.lambda * y.q + params.c + params.c * y.theta.ln())
}

/// Helmholtz free energy `Phi = kappa q^2/2 + lambda q theta - c theta ln(theta)`.
pub fn free_energy(params: &OscillatorParams, y: &State) -> Result<f64> {
    y.validate()?;
    Ok(
        0.5 * params.kappa * y.q * y.q + params.lambda * y.q * y.theta
            - params.c * y.theta * y.theta.ln(),
    )
}

/// Residuals of `S = -dPhi/dtheta` and `E = p^2/(2m) + Phi + theta S`.
pub fn helmholtz_residuals(params: &OscillatorParams, y: &State) -> Result<(f64, f64)> {
    let s = entropy(params, y)?;
    let phi = free_energy(params, y)?;
    let dphi_dtheta = params.lambda * y.q - params.c * y.theta.ln() - params.c;
    let e = energy(params, y);
    Ok((
        s + dphi_dtheta,
        e - y.p * y.p / (2.0 * params.m) - phi - y.theta * s,
    ))
}

pub fn grad_energy(params: &OscillatorParams, y: &State) -> Result<Vector3<f64>> {
    y.validate()?;
    Ok(Vector3::new(params.kappa * y.q, y.p / params.m, params.c))
}

pub fn grad_entropy(params: &OscillatorParams, y: &State) -> Result<Vector3<f64>> {
    y.validate()?;
    Ok(Vector3::new(-params.lambda, 0.0, params.c / y.theta))
}

pub fn poisson_matrix(params: &OscillatorParams, y: &State) -> Result<Matrix3<f64>> {
    y.validate()?;
    let a = params.lambda * y.theta / params.c;
    Ok(Matrix3::new(
        0.0, 1.0, 0.0, //
        -1.0, 0.0, -a, //
        0.0, a, 0.0,
    ))
}

pub fn onsager_matrix(params: &OscillatorParams, y: &State) -> Result<Matrix3<f64>> {
    y.validate()?;
    let s = y.p / (params.m * params.c);
    let scale = params.nu * y.theta;
    Ok(Matrix3::new(
        0.0,
        0.0,
        0.0, //
        0.0,
        scale,
        -scale * s, //
        0.0,
        -scale * s,
        scale * s * s,
    ))
}

/// Explicit right-hand side of the first-order system.
pub fn rhs(params: &OscillatorParams, y: &State) -> Result<Vector3<f64>> {
    y.validate()?;
    Ok(rhs_unchecked(params, y))
}

pub(crate) fn rhs_unchecked(params: &OscillatorParams, y: &State) -> Vector3<f64> {
    let OscillatorParams {
        m,
        nu,
        kappa,
        lambda,
        c,
    } = *params;
    let State { q, p, theta } = *y;
    Vector3::new(
        p / m,
        -nu * p / m - kappa * q - lambda * theta,
        nu * p * p / (m * m * c) + lambda * p * theta / (m * c),
    )
}

/// `Psi(y, xi) = nu theta/2 (xi_p - p xi_theta/(m c))^2`.
pub fn psi_closed(params: &OscillatorParams, y: &State, xi: &Vector3<f64>) -> Result<f64> {
    y.validate()?;
    let d = xi[1] - y.p / (params.m * params.c) * xi[2];
    Ok(0.5 * params.nu * y.theta * d * d)
}

/// `Psi*(y, eta) = eta_p^2/(2 nu theta)` when `eta_q = 0` and
/// `p eta_p + m c eta_theta = 0`, `+inf` otherwise.
pub fn psi_star_closed(
    params: &OscillatorParams,
    y: &State,
    eta: &Vector3<f64>,
) -> Result<Extended> {
    y.validate()?;
    let atol = PSI_STAR_FEASIBILITY_TOL * eta.norm().max(1.0);
    let constraint = y.p * eta[1] + params.m * params.c * eta[2];
    if eta[0].abs() > atol || constraint.abs() > atol {
        return Ok(Extended::PosInfinity);
    }
    Ok(Extended::Finite(
        eta[1] * eta[1] / (2.0 * params.nu * y.theta),
    ))
}

/// `dS/dt` along the flow: `<DS, K DS> = nu p^2/(m^2 theta)`.
pub fn entropy_production(params: &OscillatorParams, y: &State) -> Result<f64> {
    y.validate()?;
    Ok(params.nu * y.p * y.p / (params.m * params.m * y.theta))
}

/// The oscillator as a [`SystemModel`] on `R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillator {
    pub params: OscillatorParams,
}

impl Oscillator {
    pub fn new(params: OscillatorParams) -> Self {
        Self { params }
    }
}

fn to_dmatrix(m: Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(3, 3, m.iter().copied())
}

fn to_dvec(v: Vector3<f64>) -> DVector<f64> {
    DVector::from_iterator(3, v.iter().copied())
}

impl SystemModel for Oscillator {
    fn dimension(&self) -> usize {
        3
    }

    fn in_domain(&self, y: &DVector<f64>) -> bool {
        y.len() == 3 && State::from_slice(y.as_slice()).is_valid()
    }

    fn energy(&self, y: &DVector<f64>) -> f64 {
        energy(&self.params, &State::from_slice(y.as_slice()))
    }

    fn entropy(&self, y: &DVector<f64>) -> Extended {
        match entropy(&self.params, &State::from_slice(y.as_slice())) {
            Ok(s) => Extended::Finite(s),
            Err(_) => Extended::NegInfinity,
        }
    }

    fn grad_energy(&self, y: &DVector<f64>) -> DVector<f64> {
        let s = State::from_slice(y.as_slice());
        to_dvec(Vector3::new(
            self.params.kappa * s.q,
            s.p / self.params.m,
            self.params.c,
        ))
    }

    fn grad_entropy(&self, y: &DVector<f64>) -> DVector<f64> {
        to_dvec(Vector3::new(-self.params.lambda, 0.0, self.params.c / y[2]))
    }

    fn poisson(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let a = self.params.lambda * y[2] / self.params.c;
        to_dmatrix(Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, -a, 0.0, a, 0.0))
    }

    fn onsager(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let s = y[1] / (self.params.m * self.params.c);
        let scale = self.params.nu * y[2];
        to_dmatrix(Matrix3::new(
            0.0,
            0.0,
            0.0, //
            0.0,
            scale,
            -scale * s, //
            0.0,
            -scale * s,
            scale * s * s,
        ))
    }

    fn poisson_derivative(&self, _y: &DVector<f64>, l: usize) -> Option<DMatrix<f64>> {
        // L depends on theta only, linearly.
        if l != 2 {
            return Some(DMatrix::zeros(3, 3));
        }
        let a = self.params.lambda / self.params.c;
        Some(to_dmatrix(Matrix3::new(
            0.0, 0.0, 0.0, 0.0, 0.0, -a, 0.0, a, 0.0,
        )))
    }
}

/// Seeded sample states: `q, p ~ U[-2, 2]`, `theta` log-uniform on `[0.1, 10]`.
pub fn random_states(n: usize, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (0.1_f64.ln(), 10.0_f64.ln());
    (0..n)
        .map(|_| State {
            q: rng.gen_range(-2.0..=2.0),
            p: rng.gen_range(-2.0..=2.0),
            theta: rng.gen_range(lo..=hi).exp(),
        })
        .collect()
}
