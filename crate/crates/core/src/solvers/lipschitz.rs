use rand_distr::{Distribution, StandardNormal};

use crate::linalg::LinearOperator;
use crate::rng;
use crate::Vector;

const POWER_ITERS: usize = 100;
const POWER_TOL: f64 = 1e-8;
const SAFETY: f64 = 1.01;

/// Upper estimate of `‖AᵀA‖₂`, the gradient Lipschitz constant of
/// `½‖Ax − b‖²`: power iteration on `AᵀA` from a fixed seeded start, then a
/// 1% safety margin. Returns 1 for the zero operator.
pub fn estimate_lipschitz<A: LinearOperator + ?Sized>(op: &A) -> f64 {
    let n = op.ncols();
    if n == 0 || op.nrows() == 0 {
        return 1.0;
    }
    let mut r = rng::seeded(0x11b5);
    let mut v = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERS {
        let w = op.apply_adjoint(&op.apply(&v));
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let prev = estimate;
        estimate = norm;
        v = w / norm;
        if (estimate - prev).abs() <= POWER_TOL * estimate {
            break;
        }
    }
    if estimate > 0.0 {
        SAFETY * estimate
    } else {
        1.0
    }
}
