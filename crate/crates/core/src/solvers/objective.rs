use crate::error::{check_dim, Result};
use crate::linalg::LinearOperator;
use crate::{Matrix, Vector};

use super::estimate_lipschitz;

/// Smooth part `f` of a composite objective.
///
/// Implementations are evaluated read-only and may be shared between
/// concurrent solver runs.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Lipschitz constant `L` of the gradient.
    fn lipschitz(&self) -> f64;
}

/// `f(x) = ½‖A x − b‖₂²` with `∇f(x) = Aᵀ(A x − b)`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Matrix,
    b: Vector,
    lipschitz: f64,
}

impl LeastSquares {
    /// Estimates `L` by power iteration on `AᵀA`.
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        check_dim(a.nrows(), b.len())?;
        let lipschitz = estimate_lipschitz(&a);
        Ok(LeastSquares { a, b, lipschitz })
    }

    pub fn with_lipschitz(a: Matrix, b: Vector, lipschitz: f64) -> Result<Self> {
        check_dim(a.nrows(), b.len())?;
        Ok(LeastSquares { a, b, lipschitz })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn target(&self) -> &Vector {
        &self.b
    }

    pub fn residual(&self, x: &Vector) -> Vector {
        self.a.apply(x) - &self.b
    }
}

impl SmoothObjective for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.a.tr_mul(&self.residual(x))
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// `f(x) = ½‖x − z‖₂²`, `L = 1`. With an ℓ1-2 regularizer this is exactly
/// the prox subproblem.
#[derive(Debug, Clone)]
pub struct SquaredDistance {
    pub anchor: Vector,
}

impl SmoothObjective for SquaredDistance {
    fn dim(&self) -> usize {
        self.anchor.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * (x - &self.anchor).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        x - &self.anchor
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// `f(x) − ⟨shift, x⟩`, the smooth part of a DCA subproblem.
pub(crate) struct Tilted<'a, F: ?Sized> {
    pub inner: &'a F,
    pub shift: Vector,
}

impl<F: SmoothObjective + ?Sized> SmoothObjective for Tilted<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.inner.value(x) - self.shift.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.inner.gradient(x) - &self.shift
    }

    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }
}
