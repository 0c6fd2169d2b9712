//! DC-type solvers that linearize `−‖x‖₂`: DCA (exact convex subproblem per
//! outer step) and SCP (one linearized ℓ1 prox step per iteration).

use crate::error::{Error, Result};
use crate::prox::{self, l2_subgradient, PenaltyWeight};
use crate::Vector;

use super::objective::Tilted;
use super::pg::solve_fista;
use super::trace::Recorder;
use super::{
    all_finite, check_start, relative_change_small, L1Norm, SmoothObjective, SolverConfig,
    SolverOutput, StepInfo,
};

/// Budget and tolerance for the DCA subproblem solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            max_iters: 2000,
            tol: 1e-6,
        }
    }
}

fn l12_objective<F: SmoothObjective + ?Sized>(f: &F, lambda: f64, x: &Vector) -> f64 {
    f.value(x) + lambda * prox::l12_penalty(x.as_slice())
}

fn subgradient_at<F: SmoothObjective + ?Sized>(f: &F, lambda: f64, x: &Vector, grad: &Vector) -> Vector {
    let inv_l = 1.0 / f.lipschitz();
    let forward: Vec<f64> = x.iter().zip(grad.iter()).map(|(xi, gi)| xi - gi * inv_l).collect();
    Vector::from_vec(l2_subgradient(x.as_slice(), &forward, lambda * inv_l))
}

/// DCA for `f(x) + λ(‖x‖₁ − ‖x‖₂)`: each outer step solves
/// `min_x f(x) + λ‖x‖₁ − λ⟨s_t, x⟩` by FISTA warm-started at `x_t`.
///
/// Trace entries are outer iterations; their times include the inner solves.
/// Inner runs that hit their budget are noted in `trace.warnings` and the
/// outer loop continues from the last inner iterate.
pub fn solve_dca<F>(
    f: &F,
    lambda: PenaltyWeight,
    x0: &Vector,
    cfg: &SolverConfig,
    inner: &InnerConfig,
) -> Result<SolverOutput>
where
    F: SmoothObjective + ?Sized,
{
    cfg.validate()?;
    check_start(x0, f.dim())?;
    let lam = lambda.get();
    let inner_cfg = SolverConfig {
        max_iters: inner.max_iters,
        tol: inner.tol,
        record_trace: false,
        record_iterates: false,
        ..*cfg
    };
    let mut rec = Recorder::new(cfg.record_trace);
    let mut x = x0.clone();
    if let Some(obj) = rec.report(|| l12_objective(f, lam, &x)) {
        rec.push(0, obj, StepInfo::default());
    }
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.max_iters {
        iterations = t;
        let grad = f.gradient(&x);
        if !all_finite(&grad) {
            return Err(Error::Divergence { iteration: t, objective: f64::NAN });
        }
        let s = subgradient_at(f, lam, &x, &grad);
        let tilted = Tilted { inner: f, shift: s * lam };
        let sub = solve_fista(&tilted, &L1Norm, lambda, &x, &inner_cfg)?;
        if !sub.trace.converged {
            rec.trace.warnings.push(format!(
                "outer iteration {t}: inner solver stopped after {} iterations without converging",
                sub.trace.iterations
            ));
        }
        let next = sub.x;
        let change = (&next - &x).norm();
        let prev_norm = x.norm();
        x = next;
        if cfg.record_iterates {
            rec.trace.iterates.push(x.clone());
        }
        if let Some(obj) = rec.report(|| l12_objective(f, lam, &x)) {
            if !obj.is_finite() {
                return Err(Error::Divergence { iteration: t, objective: obj });
            }
            rec.push(
                t,
                obj,
                StepInfo {
                    inner_iters: Some(sub.trace.iterations),
                    ..Default::default()
                },
            );
        }
        if relative_change_small(change, prev_norm, cfg.tol) {
            converged = true;
            break;
        }
    }
    let objective = l12_objective(f, lam, &x);
    Ok(SolverOutput {
        x,
        objective,
        trace: rec.finish(iterations, converged),
    })
}

/// Sequential convex programming:
/// `x_{t+1} = prox_{(λ/L)‖·‖₁}(x_t + (λ/L) s_t − ∇f(x_t)/L)`.
pub fn solve_scp<F>(
    f: &F,
    lambda: PenaltyWeight,
    x0: &Vector,
    cfg: &SolverConfig,
) -> Result<SolverOutput>
where
    F: SmoothObjective + ?Sized,
{
    cfg.validate()?;
    check_start(x0, f.dim())?;
    let lam = lambda.get();
    let inv_l = 1.0 / f.lipschitz();
    let weight = lam * inv_l;
    let mut rec = Recorder::new(cfg.record_trace);
    let mut x = x0.clone();
    if let Some(obj) = rec.report(|| l12_objective(f, lam, &x)) {
        rec.push(0, obj, StepInfo::default());
    }
    let d = x.len();
    let mut forward = vec![0.0; d];
    let mut shifted = vec![0.0; d];
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.max_iters {
        iterations = t;
        let grad = f.gradient(&x);
        for i in 0..d {
            forward[i] = x[i] - grad[i] * inv_l;
        }
        if forward.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t, objective: f64::NAN });
        }
        let s = l2_subgradient(x.as_slice(), &forward, weight);
        for i in 0..d {
            shifted[i] = x[i] + weight * s[i] - grad[i] * inv_l;
        }
        let mut next = Vector::zeros(d);
        prox::soft_threshold_slice(&shifted, weight, next.as_mut_slice());

        let change = (&next - &x).norm();
        let prev_norm = x.norm();
        x = next;
        if cfg.record_iterates {
            rec.trace.iterates.push(x.clone());
        }
        if let Some(obj) = rec.report(|| l12_objective(f, lam, &x)) {
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
    let objective = l12_objective(f, lam, &x);
    Ok(SolverOutput {
        x,
        objective,
        trace: rec.finish(iterations, converged),
    })
}
