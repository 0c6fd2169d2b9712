use crate::error::{Error, Result};
use crate::prox::PenaltyWeight;
use crate::Vector;

use super::trace::Recorder;
use super::{
    all_finite, check_start, relative_change_small, Regularizer, SmoothObjective, SolverConfig,
    SolverOutput, StepInfo,
};

pub(crate) fn composite<F, R>(f: &F, reg: &R, lambda: f64, x: &Vector) -> f64
where
    F: SmoothObjective + ?Sized,
    R: Regularizer + ?Sized,
{
    let g = if lambda == 0.0 { 0.0 } else { lambda * reg.value(x) };
    f.value(x) + g
}

pub(crate) fn forward_backward<F, R>(
    f: &F,
    reg: &R,
    step_weight: PenaltyWeight,
    point: &Vector,
    iteration: usize,
) -> Result<Vector>
where
    F: SmoothObjective + ?Sized,
    R: Regularizer + ?Sized,
{
    let inv_l = 1.0 / f.lipschitz();
    let forward = point - f.gradient(point) * inv_l;
    if !all_finite(&forward) {
        return Err(Error::Divergence { iteration, objective: f64::NAN });
    }
    reg.prox(&forward, step_weight)
}

/// Proximal gradient: `x_{t+1} = prox_{(λ/L) g}(x_t − ∇f(x_t)/L)`.
pub fn solve_pg<F, R>(
    f: &F,
    reg: &R,
    lambda: PenaltyWeight,
    x0: &Vector,
    cfg: &SolverConfig,
) -> Result<SolverOutput>
where
    F: SmoothObjective + ?Sized,
    R: Regularizer + ?Sized,
{
    cfg.validate()?;
    check_start(x0, f.dim())?;
    let lam = lambda.get();
    let step_weight = lambda.scaled(1.0 / f.lipschitz())?;
    let mut rec = Recorder::new(cfg.record_trace);

    let mut x = x0.clone();
    if let Some(obj) = rec.report(|| composite(f, reg, lam, &x)) {
        rec.push(0, obj, StepInfo::default());
    }
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.max_iters {
        iterations = t;
        let next = forward_backward(f, reg, step_weight, &x, t)?;
        if !all_finite(&next) {
            return Err(Error::Divergence { iteration: t, objective: f64::NAN });
        }
        let change = (&next - &x).norm();
        let prev_norm = x.norm();
        x = next;
        if cfg.record_iterates {
            rec.trace.iterates.push(x.clone());
        }
        if let Some(obj) = rec.report(|| composite(f, reg, lam, &x)) {
            if !obj.is_finite() {
                return Err(Error::Divergence { iteration: t, objective: obj });
            }
            rec.push(t, obj, StepInfo::default());
        }
        if relative_change_small(change, prev_norm, cfg.tol) {
            converged = true;
            break;
        }
    }
    let objective = composite(f, reg, lam, &x);
    Ok(SolverOutput {
        x,
        objective,
        trace: rec.finish(iterations, converged),
    })
}

/// FISTA with momentum `(α_{t−1} − 1)/α_t` and
/// `α_{t+1} = ½(√(4α_t² + 1) + 1)`.
///
/// The recurrence starts from `α₀ = α₁ = 1`, so the first step is a plain
/// proximal gradient step. Intended for convex `g`.
pub fn solve_fista<F, R>(
    f: &F,
    reg: &R,
    lambda: PenaltyWeight,
    x0: &Vector,
    cfg: &SolverConfig,
) -> Result<SolverOutput>
where
    F: SmoothObjective + ?Sized,
    R: Regularizer + ?Sized,
{
    cfg.validate()?;
    check_start(x0, f.dim())?;
    let lam = lambda.get();
    let step_weight = lambda.scaled(1.0 / f.lipschitz())?;
    let mut rec = Recorder::new(cfg.record_trace);

    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut alpha_prev = 1.0f64;
    let mut alpha = 1.0f64;
    if let Some(obj) = rec.report(|| composite(f, reg, lam, &x)) {
        rec.push(0, obj, StepInfo::default());
    }
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.max_iters {
        iterations = t;
        let momentum = (alpha_prev - 1.0) / alpha;
        let y = if momentum == 0.0 {
            x.clone()
        } else {
            &x + (&x - &x_prev) * momentum
        };
        let next = forward_backward(f, reg, step_weight, &y, t)?;
        if !all_finite(&next) {
            return Err(Error::Divergence { iteration: t, objective: f64::NAN });
        }
        alpha_prev = alpha;
        alpha = 0.5 * ((4.0 * alpha * alpha + 1.0).sqrt() + 1.0);

        let change = (&next - &x).norm();
        let prev_norm = x.norm();
        x_prev = std::mem::replace(&mut x, next);
        if cfg.record_iterates {
            rec.trace.iterates.push(x.clone());
        }
        if let Some(obj) = rec.report(|| composite(f, reg, lam, &x)) {
            if !obj.is_finite() {
                return Err(Error::Divergence { iteration: t, objective: obj });
            }
            rec.push(t, obj, StepInfo::default());
        }
        if relative_change_small(change, prev_norm, cfg.tol) {
            converged = true;
            break;
        }
    }
    let objective = composite(f, reg, lam, &x);
    Ok(SolverOutput {
        x,
        objective,
        trace: rec.finish(iterations, converged),
    })
}
