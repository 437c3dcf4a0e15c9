//! Independent oracles shared by the integration suites.
//!
//! Nothing here calls into the scheme internals: the constraint manifold,
//! the feasible interval and the functional are rebuilt from the model
//! equations directly.

#![allow(dead_code)]

use generic_mm::{OscillatorParams, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(q, theta)` forced by the position and heat constraints for momentum `p`.
pub fn lift(prev: &State, tau: f64, params: &OscillatorParams, p: f64) -> (f64, f64) {
    let OscillatorParams { m, kappa, c, .. } = *params;
    let q = prev.q + tau * p / m;
    // c (theta - theta_prev)/tau = -kappa q p/m - p (p - p_prev)/(m tau)
    let theta = prev.theta - tau / c * (kappa * q * p / m + p * (p - prev.p) / (m * tau));
    (q, theta)
}

/// Incremental functional on the constraint manifold, written out from
/// `-S(y) + tau Psi*(y, ...) + tau Psi(y, DS(y)) + S(prev)`.
pub fn g_on_manifold(prev: &State, tau: f64, params: &OscillatorParams, p: f64) -> f64 {
    let OscillatorParams {
        m,
        nu,
        kappa,
        lambda,
        c,
    } = *params;
    let (q, theta) = lift(prev, tau, params, p);
    if theta <= 0.0 {
        return f64::INFINITY;
    }
    let entropy = |q: f64, theta: f64| -lambda * q + c + c * theta.ln();
    let eta_p = (p - prev.p) / tau + kappa * q + lambda * theta;
    let dual = eta_p * eta_p / (2.0 * nu * theta);
    let xi_p = -(p / (m * c)) * (c / theta);
    let primal = 0.5 * nu * theta * xi_p * xi_p;
    -entropy(q, theta) + tau * dual + tau * primal + entropy(prev.q, prev.theta)
}

/// Roots of the (quadratic in p) lifted temperature.
pub fn temperature_roots(prev: &State, tau: f64, params: &OscillatorParams) -> (f64, f64) {
    let OscillatorParams { m, kappa, c, .. } = *params;
    // theta(p) = theta_prev + b p - a p^2
    let a = tau * tau * kappa / (m * m * c) + 1.0 / (m * c);
    let b = (prev.p - tau * kappa * prev.q) / (m * c);
    let disc = (b * b + 4.0 * a * prev.theta).sqrt();
    ((b - disc) / (2.0 * a), (b + disc) / (2.0 * a))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_section(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..iterations {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = g(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Vertex of the parabola through `x - h, x, x + h`.
fn parabolic_polish(g: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let (fm, f0, fp) = (g(x - h), g(x), g(x + h));
    let curvature = fm - 2.0 * f0 + fp;
    if curvature <= 0.0 {
        return x;
    }
    let shift = 0.5 * h * (fm - fp) / curvature;
    if shift.abs() > h {
        x
    } else {
        x + shift
    }
}

/// Brute-force minimizer of `G` over the feasible momenta: dense grid,
/// golden-section refinement of the best cell, then two three-point
/// parabolic polishes (golden section alone stalls at ~sqrt(eps) in `p`).
pub fn grid_minimizer(prev: &State, tau: f64, params: &OscillatorParams, points: usize) -> f64 {
    let (lo, hi) = temperature_roots(prev, tau, params);
    let width = (hi - lo) / points as f64;
    let g = |p: f64| g_on_manifold(prev, tau, params, p);
    let (mut best_k, mut best) = (0, f64::INFINITY);
    for k in 0..points {
        let v = g(lo + (k as f64 + 0.5) * width);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let centre = lo + (best_k as f64 + 0.5) * width;
    let a = (centre - width).max(lo + 1e-3 * width);
    let b = (centre + width).min(hi - 1e-3 * width);
    let mut x = golden_section(g, a, b, 200);
    let h = (1e-5 * (hi - lo)).min(0.25 * width.max(1e-9)).max(1e-9);
    for _ in 0..2 {
        x = parabolic_polish(g, x, h);
    }
    x
}

/// Damped fixed-point iteration on `y = prev + tau rhs(y)`.
pub fn picard_euler(
    prev: &State,
    tau: f64,
    params: &OscillatorParams,
    damping: f64,
    iterations: usize,
) -> State {
    let OscillatorParams {
        m,
        nu,
        kappa,
        lambda,
        c,
    } = *params;
    let mut y = [prev.q, prev.p, prev.theta];
    for _ in 0..iterations {
        let [q, p, theta] = y;
        let image = [
            prev.q + tau * p / m,
            prev.p + tau * (-nu * p / m - kappa * q - lambda * theta),
            prev.theta + tau * (nu * p * p / (m * m * c) + lambda * p * theta / (m * c)),
        ];
        for k in 0..3 {
            y[k] += damping * (image[k] - y[k]);
        }
    }
    State {
        q: y[0],
        p: y[1],
        theta: y[2],
    }
}

/// Random step instance: `|q|, |p| <= 2`, `theta` log-uniform on
/// `[0.1, 10]`, `tau` log-uniform on `[1e-3, 0.5]`.
pub fn random_instances(n: usize, seed: u64) -> Vec<(State, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let prev = State {
                q: rng.gen_range(-2.0..=2.0),
                p: rng.gen_range(-2.0..=2.0),
                theta: rng.gen_range(0.1f64.ln()..=10f64.ln()).exp(),
            };
            let tau = rng.gen_range(1e-3f64.ln()..=0.5f64.ln()).exp();
            (prev, tau)
        })
        .collect()
}

/// The experiment's data: unit parameters, `y0 = (1, 1, 1)`, `T = 15`.
pub fn experiment_setup() -> (OscillatorParams, State, f64) {
    (
        OscillatorParams::unit(),
        State {
            q: 1.0,
            p: 1.0,
            theta: 1.0,
        },
        15.0,
    )
}
