//! Structure-preserving time integration for GENERIC systems.
//!
//! The crate provides
//!
//! * [`generic`]: the abstract quintuple `(E, S, L, K)` on `R^d`, the
//!   entropy-production potential and its conjugate, and numerical checks of
//!   antisymmetry, positive semidefiniteness, noninteraction and the Jacobi
//!   identity;
//! * [`oscillator`]: the thermodynamically consistent damped harmonic
//!   oscillator;
//! * [`schemes`]: the minimizing-movements scheme (incremental minimization of
//!   the functional `G`) and the implicit Euler scheme, plus partitions and
//!   trajectories;
//! * [`reference`]: an adaptive Dormand-Prince baseline;
//! * [`diagnostics`]: energy/entropy bookkeeping, the estimator `sum (G)^+`,
//!   uniform errors and convergence-order fits.

pub mod diagnostics;
pub mod error;
pub mod extended;
pub mod generic;
pub mod oscillator;
pub mod reference;
pub mod schemes;

pub use error::{Error, Result};
pub use extended::Extended;
pub use oscillator::{OscillatorParams, State};
