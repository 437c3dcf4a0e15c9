//! Finite-dimensional GENERIC systems `y' = L(y) DE(y) + K(y) DS(y)`.
//!
//! A [`SystemModel`] supplies the energy, the entropy, their gradients, the
//! Poisson operator `L` and the Onsager operator `K`. This module evaluates the
//! entropy-production potential `Psi(y, xi) = <xi, K(y) xi> / 2` and its
//! conjugate, and checks the structural assumptions numerically on sample
//! states.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::extended::Extended;

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const PINV_EIGEN_CUTOFF: f64 = 1e-12;

/// `eta` is in `range(K)` iff `|(I - K K^+) eta| <= RANGE_TOL * max(1, |eta|)`.
pub const RANGE_TOL: f64 = 1e-10;

/// The GENERIC quintuple on `R^d`.
///
/// Gradients and operators are only evaluated at domain points; callers go
/// through the checked functions of this module, which reject states with
/// `S(y) = -inf`.
pub trait SystemModel {
    fn dimension(&self) -> usize;

    /// `S(y) > -inf`.
    fn in_domain(&self, y: &DVector<f64>) -> bool;

    fn energy(&self, y: &DVector<f64>) -> f64;

    fn entropy(&self, y: &DVector<f64>) -> Extended;

    fn grad_energy(&self, y: &DVector<f64>) -> DVector<f64>;

    fn grad_entropy(&self, y: &DVector<f64>) -> DVector<f64>;

    fn poisson(&self, y: &DVector<f64>) -> DMatrix<f64>;

    fn onsager(&self, y: &DVector<f64>) -> DMatrix<f64>;

    /// Analytic partial derivative `dL/dy_l`, when the model knows it.
    fn poisson_derivative(&self, _y: &DVector<f64>, _l: usize) -> Option<DMatrix<f64>> {
        None
    }
}

/// How the Jacobi check differentiates `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoissonDerivative {
    /// Central differences with step `fd_step * (1 + |y_l|)` in coordinate `l`.
    CentralDifference { fd_step: f64 },
    /// [`SystemModel::poisson_derivative`].
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub samples: Vec<DVector<f64>>,
    pub tolerance: f64,
    /// Smallest eigenvalue of `K` seen over the samples (PSD check only).
    pub min_eigenvalue: Option<f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_residual)
            .fold(0.0, f64::max)
    }
}

fn check(name: &'static str, max_residual: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        max_residual,
        passed: max_residual <= tol,
    }
}

fn ensure_domain<M: SystemModel + ?Sized>(model: &M, y: &DVector<f64>) -> Result<()> {
    if y.len() != model.dimension() {
        return Err(Error::InvalidState(format!(
            "expected dimension {}, got {}",
            model.dimension(),
            y.len()
        )));
    }
    if !model.in_domain(y) {
        return Err(Error::InvalidState(format!(
            "S(y) = -inf at {:?}",
            y.as_slice()
        )));
    }
    Ok(())
}

fn ensure_samples<M: SystemModel + ?Sized>(model: &M, samples: &[DVector<f64>]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    samples.iter().try_for_each(|y| ensure_domain(model, y))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `Psi(y, xi) = <xi, K(y) xi> / 2`.
pub fn psi<M: SystemModel + ?Sized>(model: &M, y: &DVector<f64>, xi: &DVector<f64>) -> Result<f64> {
    ensure_domain(model, y)?;
    let k = model.onsager(y);
    Ok(0.5 * xi.dot(&(&k * xi)))
}

/// Moore-Penrose solve of a symmetric positive semidefinite system.
#[derive(Debug, Clone)]
pub struct PseudoInverseSolve {
    /// `K^+ eta`.
    pub solution: DVector<f64>,
    /// `|(I - K K^+) eta|`.
    pub range_residual: f64,
    pub rank: usize,
}

/// Solves `K x = eta` in the least-squares sense through the symmetric
/// eigendecomposition, truncating eigenvalues below
/// `PINV_EIGEN_CUTOFF * lambda_max`.
pub fn symmetric_pinv_solve(k: &DMatrix<f64>, eta: &DVector<f64>) -> PseudoInverseSolve {
    let eig = SymmetricEigen::new(k.clone());
    let lambda_max = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let cutoff = PINV_EIGEN_CUTOFF * lambda_max;
    let mut solution = DVector::zeros(eta.len());
    let mut projection = DVector::zeros(eta.len());
    let mut rank = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda_max == 0.0 || lambda.abs() <= cutoff {
            continue;
        }
        rank += 1;
        let v = eig.eigenvectors.column(i);
        let coeff = v.dot(eta);
        solution += v * (coeff / lambda);
        projection += v * coeff;
    }
    PseudoInverseSolve {
        range_residual: (eta - projection).norm(),
        solution,
        rank,
    }
}

/// Number of eigenvalues of a symmetric matrix above `rel_tol * lambda_max`.
pub fn numerical_rank(k: &DMatrix<f64>, rel_tol: f64) -> usize {
    let eig = SymmetricEigen::new(k.clone());
    let lambda_max = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if lambda_max == 0.0 {
        return 0;
    }
    eig.eigenvalues
        .iter()
        .filter(|l| l.abs() > rel_tol * lambda_max)
        .count()
}

/// `Psi*(y, eta) = sup_xi (<xi, eta> - Psi(y, xi))`, which equals
/// `<eta, K^+ eta> / 2` on `range(K(y))` and `+inf` off it.
pub fn psi_star_pinv<M: SystemModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    eta: &DVector<f64>,
) -> Result<Extended> {
    ensure_domain(model, y)?;
    let solve = symmetric_pinv_solve(&model.onsager(y), eta);
    if solve.range_residual > RANGE_TOL * eta.norm().max(1.0) {
        return Ok(Extended::PosInfinity);
    }
    Ok(Extended::Finite(0.5 * eta.dot(&solve.solution)))
}

/// `Psi*(y, K xi) + Psi(y, xi) - <xi, K xi>`, zero up to rounding.
pub fn fenchel_gap<M: SystemModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    xi: &DVector<f64>,
) -> Result<f64> {
    ensure_domain(model, y)?;
    let k = model.onsager(y);
    let eta = &k * xi;
    let pairing = xi.dot(&eta);
    // K xi lies in range(K) by construction; no range gate needed.
    let dual = 0.5 * eta.dot(&symmetric_pinv_solve(&k, &eta).solution);
    Ok(dual + 0.5 * pairing - pairing)
}

/// `L(y) DE(y) + K(y) DS(y)`.
pub fn generic_rhs<M: SystemModel + ?Sized>(model: &M, y: &DVector<f64>) -> Result<DVector<f64>> {
    ensure_domain(model, y)?;
    Ok(model.poisson(y) * model.grad_energy(y) + model.onsager(y) * model.grad_entropy(y))
}

/// Max of `|L + L^T|` over the samples.
pub fn check_antisymmetry<M: SystemModel + ?Sized>(
    model: &M,
    samples: &[DVector<f64>],
    tol: f64,
) -> Result<ValidationReport> {
    ensure_samples(model, samples)?;
    let residual = samples
        .iter()
        .map(|y| {
            let l = model.poisson(y);
            max_abs(&(&l + l.transpose()))
        })
        .fold(0.0, f64::max);
    Ok(ValidationReport {
        checks: vec![check("antisymmetry", residual, tol)],
        samples: samples.to_vec(),
        tolerance: tol,
        min_eigenvalue: None,
    })
}

/// Symmetry of `K` and the sign of its smallest eigenvalue.
pub fn check_onsager_psd<M: SystemModel + ?Sized>(
    model: &M,
    samples: &[DVector<f64>],
    tol: f64,
) -> Result<ValidationReport> {
    ensure_samples(model, samples)?;
    let mut symmetry = 0.0_f64;
    let mut min_eig = f64::MAX;
    for y in samples {
        let k = model.onsager(y);
        symmetry = symmetry.max(max_abs(&(&k - k.transpose())));
        let sym = (&k + k.transpose()) * 0.5;
        let smallest = SymmetricEigen::new(sym).eigenvalues.min();
        min_eig = min_eig.min(smallest);
    }
    Ok(ValidationReport {
        checks: vec![
            check("onsager symmetry", symmetry, tol),
            check("onsager negative eigenvalue", (-min_eig).max(0.0), tol),
        ],
        samples: samples.to_vec(),
        tolerance: tol,
        min_eigenvalue: Some(min_eig),
    })
}

/// `|L^T DS|` and `|K^T DE|` over the samples.
pub fn check_noninteraction<M: SystemModel + ?Sized>(
    model: &M,
    samples: &[DVector<f64>],
    tol: f64,
) -> Result<ValidationReport> {
    ensure_samples(model, samples)?;
    let mut poisson_entropy = 0.0_f64;
    let mut onsager_energy = 0.0_f64;
    for y in samples {
        let ls = model.poisson(y).transpose() * model.grad_entropy(y);
        let ke = model.onsager(y).transpose() * model.grad_energy(y);
        poisson_entropy = poisson_entropy.max(max_abs_vec(&ls));
        onsager_energy = onsager_energy.max(max_abs_vec(&ke));
    }
    Ok(ValidationReport {
        checks: vec![
            check("L^T DS = 0", poisson_entropy, tol),
            check("K^T DE = 0", onsager_energy, tol),
        ],
        samples: samples.to_vec(),
        tolerance: tol,
        min_eigenvalue: None,
    })
}

fn poisson_gradient<M: SystemModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    index: usize,
    derivative: PoissonDerivative,
) -> Result<Vec<DMatrix<f64>>> {
    let d = model.dimension();
    (0..d)
        .map(|l| match derivative {
            PoissonDerivative::Analytic => model
                .poisson_derivative(y, l)
                .ok_or(Error::MissingAnalyticDerivative),
            PoissonDerivative::CentralDifference { fd_step } => {
                let h = fd_step * (1.0 + y[l].abs());
                let mut plus = y.clone();
                let mut minus = y.clone();
                plus[l] += h;
                minus[l] -= h;
                if !model.in_domain(&plus) || !model.in_domain(&minus) {
                    return Err(Error::StencilOutsideDomain { index });
                }
                Ok((model.poisson(&plus) - model.poisson(&minus)) / (2.0 * h))
            }
        })
        .collect()
}

/// Jacobi identity residual
/// `R_ijk = sum_l L_li d_l L_jk + L_lj d_l L_ki + L_lk d_l L_ij`.
pub fn jacobi_residual<M: SystemModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    derivative: PoissonDerivative,
) -> Result<f64> {
    jacobi_residual_at(model, y, 0, derivative)
}

fn jacobi_residual_at<M: SystemModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    index: usize,
    derivative: PoissonDerivative,
) -> Result<f64> {
    ensure_domain(model, y)?;
    let d = model.dimension();
    let l = model.poisson(y);
    let dl = poisson_gradient(model, y, index, derivative)?;
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let r: f64 = (0..d)
                    .map(|m| {
                        l[(m, i)] * dl[m][(j, k)]
                            + l[(m, j)] * dl[m][(k, i)]
                            + l[(m, k)] * dl[m][(i, j)]
                    })
                    .sum();
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

pub fn check_jacobi<M: SystemModel + ?Sized>(
    model: &M,
    samples: &[DVector<f64>],
    tol: f64,
    derivative: PoissonDerivative,
) -> Result<ValidationReport> {
    ensure_samples(model, samples)?;
    let mut residual = 0.0_f64;
    for (index, y) in samples.iter().enumerate() {
        residual = residual.max(jacobi_residual_at(model, y, index, derivative)?);
    }
    Ok(ValidationReport {
        checks: vec![check("jacobi identity", residual, tol)],
        samples: samples.to_vec(),
        tolerance: tol,
        min_eigenvalue: None,
    })
}
