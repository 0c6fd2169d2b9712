//! Proximal operators for the nonconvex ℓ1-2 regularizer `‖x‖₁ − ‖x‖₂` and the
//! first-order machinery that uses them.
//!
//! The crate is organized around the closed-form prox in [`prox`]:
//!
//! * [`prox`]: vector, singular-value and row-wise operators, plus the
//!   numerical (DC iteration) prox kept as a baseline.
//! * [`solvers`]: proximal gradient, FISTA, nmAPG, DCA and SCP over a generic
//!   smooth loss.
//! * [`cs`]: compressed sensing with an oversampled cosine dictionary.
//! * [`matcomp`]: matrix completion with the nuclear-minus-Frobenius penalty.
//! * [`tv`]: TV₁₋₂ denoising by alternating minimization.
//! * [`linalg`], [`pgm`], [`oracle`]: supporting numerics, image I/O and the
//!   brute-force prox checker.

pub mod cs;
pub mod error;
pub mod linalg;
pub mod matcomp;
pub mod oracle;
pub mod pgm;
pub mod prox;
pub mod rng;
pub mod solvers;
pub mod tv;

pub use error::{Error, Result};
pub use linalg::{LinearOperator, ThinSvd};
pub use prox::PenaltyWeight;

/// Dense column vector used for every iterate, signal and vectorized image.
pub type Vector = nalgebra::DVector<f64>;
/// Dense column-major matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
