//! Nonmonotone accelerated proximal gradient (nmAPG).
//!
//! Each step extrapolates
//! `y_k = x_k + (t_{k−1}/t_k)(z_k − x_k) + ((t_{k−1} − 1)/t_k)(x_k − x_{k−1})`,
//! takes a prox-gradient step from `y_k` to get `z_{k+1}`, and accepts it if
//! `F(z_{k+1}) ≤ c_k − δ‖z_{k+1} − y_k‖²`. Otherwise a plain step `v_{k+1}`
//! from `x_k` is computed and the better of the two is kept. The reference
//! value is a running weighted average:
//! `q_{k+1} = η q_k + 1`, `c_{k+1} = (η q_k c_k + F(x_{k+1}))/q_{k+1}`.
//!
//! The iteration is written once against [`ProxGradProblem`] so the vector
//! solvers and the low-rank matrix completion solver share it.

use crate::error::{Error, Result};
use crate::prox::PenaltyWeight;
use crate::Vector;

use super::pg::{composite, forward_backward};
use super::trace::Recorder;
use super::{
    all_finite, check_start, relative_change_small, Regularizer, SmoothObjective, SolverConfig,
    SolverOutput, SolverTrace, StepInfo,
};

/// What nmAPG needs from a composite problem `F = f + λ g`.
pub trait ProxGradProblem {
    type Point: Clone;

    /// `F(p)`.
    fn objective(&mut self, p: &Self::Point) -> Result<f64>;

    /// `prox_{(λ/L) g}(p − ∇f(p)/L)`.
    fn prox_grad_step(&mut self, p: &Self::Point, iteration: usize) -> Result<Self::Point>;

    /// `x + a (z − x) + b (x − x_prev)`.
    fn extrapolate(
        &self,
        x: &Self::Point,
        z: &Self::Point,
        x_prev: &Self::Point,
        a: f64,
        b: f64,
    ) -> Self::Point;

    fn dist_sq(&self, a: &Self::Point, b: &Self::Point) -> f64;

    fn norm(&self, p: &Self::Point) -> f64;

    /// Flattened copy for `record_iterates`; `None` if not meaningful.
    fn snapshot(&self, _p: &Self::Point) -> Option<Vector> {
        None
    }

    /// Diagnostics the problem wants surfaced in the trace.
    fn take_warnings(&mut self) -> Vec<String> {
        Vec::new()
    }

    /// Per-step auxiliary work count (e.g. power iterations) for the trace.
    fn take_aux_iters(&mut self) -> Option<usize> {
        None
    }
}

/// Runs nmAPG from `x0`. Returns the final point, its objective and the trace.
pub fn run_nmapg<P: ProxGradProblem>(
    problem: &mut P,
    x0: P::Point,
    cfg: &SolverConfig,
) -> Result<(P::Point, f64, SolverTrace)> {
    cfg.validate()?;
    let mut rec = Recorder::new(cfg.record_trace);

    let mut x = x0;
    let mut x_prev = x.clone();
    let mut z = x.clone();
    let mut f_x = problem.objective(&x)?;
    if !f_x.is_finite() {
        return Err(Error::Divergence { iteration: 0, objective: f_x });
    }
    let mut c = f_x;
    let mut q = 1.0f64;
    let mut t_prev = 0.0f64;
    let mut t_cur = 1.0f64;
    rec.push(0, f_x, StepInfo::default());

    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iters {
        iterations = k;
        let a = t_prev / t_cur;
        let b = (t_prev - 1.0) / t_cur;
        let y = problem.extrapolate(&x, &z, &x_prev, a, b);

        let z_next = problem.prox_grad_step(&y, k)?;
        let f_z = problem.objective(&z_next)?;
        let dist_zy = problem.dist_sq(&z_next, &y);

        let (x_next, f_next, accepted, step_sq) = if f_z <= c - cfg.delta * dist_zy {
            (z_next.clone(), f_z, true, dist_zy)
        } else {
            let v = problem.prox_grad_step(&x, k)?;
            let f_v = problem.objective(&v)?;
            let dist_vx = problem.dist_sq(&v, &x);
            if f_z <= f_v {
                (z_next.clone(), f_z, false, dist_vx)
            } else {
                (v, f_v, false, dist_vx)
            }
        };
        if !f_next.is_finite() {
            return Err(Error::Divergence { iteration: k, objective: f_next });
        }

        let reference = c;
        let q_next = cfg.eta * q + 1.0;
        c = (cfg.eta * q * c + f_next) / q_next;
        q = q_next;
        t_prev = t_cur;
        t_cur = 0.5 * ((4.0 * t_cur * t_cur + 1.0).sqrt() + 1.0);

        let change = problem.dist_sq(&x_next, &x).sqrt();
        let prev_norm = problem.norm(&x);
        x_prev = std::mem::replace(&mut x, x_next);
        z = z_next;
        f_x = f_next;

        if cfg.record_iterates {
            if let Some(snap) = problem.snapshot(&x) {
                rec.trace.iterates.push(snap);
            }
        }
        rec.trace.warnings.extend(problem.take_warnings());
        rec.push(
            k,
            f_x,
            StepInfo {
                accepted: Some(accepted),
                reference: Some(reference),
                step_sq: Some(step_sq),
                aux_iters: problem.take_aux_iters(),
                ..Default::default()
            },
        );
        if relative_change_small(change, prev_norm, cfg.tol) {
            converged = true;
            break;
        }
    }
    Ok((x, f_x, rec.finish(iterations, converged)))
}

struct VectorProblem<'a, F: ?Sized, R: ?Sized> {
    f: &'a F,
    reg: &'a R,
    lambda: f64,
    step_weight: PenaltyWeight,
}

impl<F, R> ProxGradProblem for VectorProblem<'_, F, R>
where
    F: SmoothObjective + ?Sized,
    R: Regularizer + ?Sized,
{
    type Point = Vector;

    fn objective(&mut self, p: &Vector) -> Result<f64> {
        Ok(composite(self.f, self.reg, self.lambda, p))
    }

    fn prox_grad_step(&mut self, p: &Vector, iteration: usize) -> Result<Vector> {
        let out = forward_backward(self.f, self.reg, self.step_weight, p, iteration)?;
        if all_finite(&out) {
            Ok(out)
        } else {
            Err(Error::Divergence { iteration, objective: f64::NAN })
        }
    }

    fn extrapolate(&self, x: &Vector, z: &Vector, x_prev: &Vector, a: f64, b: f64) -> Vector {
        let mut y = x.clone();
        if a != 0.0 {
            y += (z - x) * a;
        }
        if b != 0.0 {
            y += (x - x_prev) * b;
        }
        y
    }

    fn dist_sq(&self, a: &Vector, b: &Vector) -> f64 {
        (a - b).norm_squared()
    }

    fn norm(&self, p: &Vector) -> f64 {
        p.norm()
    }

    fn snapshot(&self, p: &Vector) -> Option<Vector> {
        Some(p.clone())
    }
}

/// nmAPG on `f(x) + λ g(x)` with step `1/L`. Works for nonconvex `g` as long
/// as its prox is exact or a convergent numerical routine.
pub fn solve_nmapg<F, R>(
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
    check_start(x0, f.dim())?;
    let mut problem = VectorProblem {
        f,
        reg,
        lambda: lambda.get(),
        step_weight: lambda.scaled(1.0 / f.lipschitz())?,
    };
    let (x, objective, trace) = run_nmapg(&mut problem, x0.clone(), cfg)?;
    Ok(SolverOutput { x, objective, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{L12Closed, SquaredDistance};

    #[test]
    fn one_dimensional_l12_is_inactive() {
        let f = SquaredDistance { anchor: Vector::from_element(1, 2.0) };
        let lam = PenaltyWeight::new(0.5).unwrap();
        let out = solve_nmapg(&f, &L12Closed, lam, &Vector::zeros(1), &SolverConfig::default())
            .unwrap();
        assert!((out.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn acceptance_flags_match_recorded_values() {
        let f = SquaredDistance { anchor: Vector::from_column_slice(&[1.5, -0.3, 0.9]) };
        let lam = PenaltyWeight::new(0.4).unwrap();
        let cfg = SolverConfig::default();
        let out = solve_nmapg(&f, &L12Closed, lam, &Vector::zeros(3), &cfg).unwrap();
        for r in &out.trace.records[1..] {
            let (c, d) = (r.step.reference.unwrap(), r.step.step_sq.unwrap());
            if r.step.accepted == Some(true) {
                assert!(r.objective <= c - cfg.delta * d);
            }
        }
    }
}
