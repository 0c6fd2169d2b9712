//! First-order solvers for `min_x f(x) + λ g(x)` with `f` smooth.
//!
//! Every solver takes a [`SmoothObjective`] for `f`, a [`Regularizer`] for
//! `g` where applicable, and a [`SolverConfig`], and returns the final
//! iterate together with a [`SolverTrace`]. All of them stop when
//! `‖x_{t+1} − x_t‖₂ ≤ tol · max(1, ‖x_t‖₂)` or the iteration budget runs out.

mod dc;
mod lipschitz;
mod nmapg;
mod objective;
mod pg;
mod trace;

pub use dc::{solve_dca, solve_scp, InnerConfig};
pub use lipschitz::estimate_lipschitz;
pub use nmapg::{run_nmapg, solve_nmapg, ProxGradProblem};
pub use objective::{LeastSquares, SmoothObjective, SquaredDistance};
pub use pg::{solve_fista, solve_pg};
pub(crate) use trace::Recorder;
pub use trace::{SolverTrace, StepInfo, TraceRecord};

use crate::error::{Error, Result};
use crate::prox::{self, PenaltyWeight};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative-change stopping threshold.
    pub tol: f64,
    pub record_trace: bool,
    /// Keep every iterate in the trace (memory heavy; meant for tests).
    pub record_iterates: bool,
    /// nmAPG averaging weight `η ∈ [0, 1)`.
    pub eta: f64,
    /// nmAPG sufficient-decrease margin `δ > 0`.
    pub delta: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 10_000,
            tol: 1e-8,
            record_trace: true,
            record_iterates: false,
            eta: 0.8,
            delta: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("eta must lie in [0, 1), got {}", self.eta)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub x: Vector,
    /// `F(x) = f(x) + λ g(x)` at the returned iterate.
    pub objective: f64,
    pub trace: SolverTrace,
}

/// A (possibly nonconvex) regularizer `g` with a computable prox.
pub trait Regularizer {
    fn value(&self, x: &Vector) -> f64;
    /// `prox_{weight·g}(v)`.
    fn prox(&self, v: &Vector, weight: PenaltyWeight) -> Result<Vector>;
}

/// `g = 0`; the prox is the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoPenalty;

#[derive(Debug, Clone, Copy, Default)]
pub struct L1Norm;

/// `‖x‖₁ − ‖x‖₂` with the closed-form prox.
#[derive(Debug, Clone, Copy, Default)]
pub struct L12Closed;

/// `‖x‖₁ − ‖x‖₂` with the prox computed by DC iteration.
#[derive(Debug, Clone, Copy)]
pub struct L12Numerical {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for L12Numerical {
    fn default() -> Self {
        L12Numerical {
            max_iters: 1000,
            tol: 1e-10,
        }
    }
}

impl Regularizer for NoPenalty {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn prox(&self, v: &Vector, _weight: PenaltyWeight) -> Result<Vector> {
        Ok(v.clone())
    }
}

impl Regularizer for L1Norm {
    fn value(&self, x: &Vector) -> f64 {
        x.lp_norm(1)
    }

    fn prox(&self, v: &Vector, weight: PenaltyWeight) -> Result<Vector> {
        prox::prox_l1(v, weight)
    }
}

impl Regularizer for L12Closed {
    fn value(&self, x: &Vector) -> f64 {
        prox::l12_penalty(x.as_slice())
    }

    fn prox(&self, v: &Vector, weight: PenaltyWeight) -> Result<Vector> {
        prox::prox_l12(v, weight)
    }
}

impl Regularizer for L12Numerical {
    fn value(&self, x: &Vector) -> f64 {
        prox::l12_penalty(x.as_slice())
    }

    fn prox(&self, v: &Vector, weight: PenaltyWeight) -> Result<Vector> {
        prox::prox_l12_numerical(v, weight, self.max_iters, self.tol)
    }
}

pub(crate) fn check_start(x0: &Vector, dim: usize) -> Result<()> {
    crate::error::check_dim(dim, x0.len())?;
    crate::error::check_finite(x0.as_slice(), "starting point")
}

#[inline]
pub(crate) fn relative_change_small(change: f64, prev_norm: f64, tol: f64) -> bool {
    change <= tol * prev_norm.max(1.0)
}

pub(crate) fn all_finite(x: &Vector) -> bool {
    x.iter().all(|v| v.is_finite())
}
