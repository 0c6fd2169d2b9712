//! Brute-force checks of the closed-form prox.
//!
//! The grid oracle evaluates `φ(x) = ½‖x − z‖² + λ(‖x‖₁ − ‖x‖₂)` on a
//! uniform grid of `points` per axis over `[min(z) − 2λ − 1, max(z) + 2λ + 1]`
//! in every coordinate and returns the exact grid minimum. Subtrees are
//! skipped with the bound `φ(x) ≥ ½‖x_S − z_S‖² + λ(‖x_S‖₁ − ‖x_S‖₂) +
//! Σ_{i∉S} min_t ½(t − z_i)²`, which holds because adding coordinates never
//! decreases `‖x‖₁ − ‖x‖₂`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::prox::{self, PenaltyWeight};
use crate::rng;
use crate::Vector;

/// Points per axis used by the acceptance checks.
pub const GRID_POINTS: usize = 401;

#[derive(Debug, Clone, PartialEq)]
pub struct GridMin {
    pub value: f64,
    pub argmin: Vec<f64>,
    /// Grid spacing along every axis.
    pub spacing: f64,
    /// Number of grid points whose value was actually computed.
    pub evaluated: u64,
}

struct Search<'a> {
    z: &'a [f64],
    lambda: f64,
    axis: Vec<f64>,
    /// `min_t ½(t − z_i)²` over the grid, summed over axes `i..`.
    tail: Vec<f64>,
    best: f64,
    best_x: Vec<f64>,
    x: Vec<f64>,
    evaluated: u64,
}

impl Search<'_> {
    fn visit(&mut self, depth: usize, sq: f64, l1: f64, l2sq: f64) {
        let d = self.z.len();
        if depth == d {
            self.evaluated += 1;
            let v = 0.5 * sq + self.lambda * (l1 - l2sq.sqrt());
            if v < self.best {
                self.best = v;
                self.best_x.copy_from_slice(&self.x);
            }
            return;
        }
        let zi = self.z[depth];
        for k in 0..self.axis.len() {
            let t = self.axis[k];
            let sq_t = sq + (t - zi) * (t - zi);
            let l1_t = l1 + t.abs();
            let l2_t = l2sq + t * t;
            let bound = 0.5 * sq_t + self.lambda * (l1_t - l2_t.sqrt()) + self.tail[depth + 1];
            if bound >= self.best {
                continue;
            }
            self.x[depth] = t;
            self.visit(depth + 1, sq_t, l1_t, l2_t);
        }
    }
}

/// Exact minimum of `φ` over the grid described in the module docs.
pub fn grid_minimum(z: &[f64], lambda: f64, points: usize) -> Result<GridMin> {
    if z.is_empty() {
        return Err(Error::invalid("z must have dimension ≥ 1"));
    }
    if points < 2 {
        return Err(Error::invalid("need at least 2 grid points per axis"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) || z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("z and lambda must be finite, lambda ≥ 0"));
    }
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * lambda - 1.0;
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0 * lambda + 1.0;
    let spacing = (hi - lo) / (points - 1) as f64;
    let axis: Vec<f64> = (0..points).map(|k| lo + spacing * k as f64).collect();

    let d = z.len();
    let mut tail = vec![0.0; d + 1];
    for i in (0..d).rev() {
        let m = axis
            .iter()
            .map(|t| 0.5 * (t - z[i]) * (t - z[i]))
            .fold(f64::INFINITY, f64::min);
        tail[i] = tail[i + 1] + m;
    }
    // Seed the incumbent with the grid point nearest z so pruning starts early.
    let nearest: Vec<f64> = z
        .iter()
        .map(|&zi| {
            let k = ((zi - lo) / spacing).round().clamp(0.0, (points - 1) as f64) as usize;
            axis[k]
        })
        .collect();
    let best = 0.5 * nearest.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        + lambda * prox::l12_penalty(&nearest);

    let mut s = Search {
        z,
        lambda,
        axis,
        tail,
        best,
        best_x: nearest,
        x: vec![0.0; d],
        evaluated: 0,
    };
    s.visit(0, 0.0, 0.0, 0.0);
    Ok(GridMin {
        value: s.best,
        argmin: s.best_x,
        spacing,
        evaluated: s.evaluated,
    })
}

/// Upper bound on `min_grid φ − φ(x*)` for a minimizer `x*` inside the grid:
/// some grid point lies within `e = √d·h/2` of `x*`, and
/// `φ(x* + δ) − φ(x*) ≤ ‖x* − z‖ e + e²/2 + λ(√d + 1) e`.
pub fn grid_slack(x: &[f64], z: &[f64], lambda: f64, spacing: f64) -> f64 {
    let d = x.len() as f64;
    let e = d.sqrt() * spacing / 2.0;
    let dist = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    dist * e + 0.5 * e * e + lambda * (d.sqrt() + 1.0) * e
}

/// Tolerances used by [`run_prox_checks`].
pub const VALUE_TOL: f64 = 1e-9;
pub const NUMERICAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Default)]
pub struct ProxCheckReport {
    pub trials: usize,
    /// Trials where some grid point beat the closed form by more than 1e-9.
    pub grid_below: usize,
    /// Trials where the grid minimum exceeded `φ(prox) + slack`.
    pub grid_above: usize,
    /// Trials where the closed form and the numerical prox differ by > 1e-7.
    pub numerical_mismatch: usize,
    pub max_numerical_diff: f64,
    pub failures: Vec<String>,
}

impl ProxCheckReport {
    pub fn failed(&self) -> usize {
        self.failures.len()
    }

    pub fn passed(&self) -> usize {
        self.trials - self.failed()
    }
}

/// One random instance: `z_i ~ U(−3, 3)`, `λ ~ U(0.01, 2)`.
pub fn random_instance<R: Rng + ?Sized>(d: usize, rng: &mut R) -> (Vector, f64) {
    let z = Vector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
    let lambda = rng.random_range(0.01..2.0);
    (z, lambda)
}

/// Runs `trials` randomized comparisons of the closed-form prox against the
/// grid oracle and the numerical prox (tol 1e-12). Dimensions cycle through
/// `dims`. `perturb` is added to every closed-form coordinate so callers can
/// confirm the checks notice a wrong answer.
pub fn run_prox_checks(trials: usize, dims: &[usize], seed: u64, perturb: f64) -> Result<ProxCheckReport> {
    if trials > 0 && dims.is_empty() {
        return Err(Error::invalid("no dimensions given"));
    }
    if let Some(&d) = dims.iter().find(|&&d| d == 0 || d > 3) {
        return Err(Error::invalid(format!("dimension {d} unsupported (use 1, 2 or 3)")));
    }
    let mut r = rng::seeded(seed);
    let mut report = ProxCheckReport { trials, ..Default::default() };
    for t in 0..trials {
        let d = dims[t % dims.len()];
        let (z, lambda) = random_instance(d, &mut r);
        let w = PenaltyWeight::new(lambda)?;
        let closed = prox::prox_l12(&z, w)?.add_scalar(perturb);
        let value = prox::phi_objective(&closed, &z, w)?;

        let grid = grid_minimum(z.as_slice(), lambda, GRID_POINTS)?;
        let slack = grid_slack(closed.as_slice(), z.as_slice(), lambda, grid.spacing);
        let numerical = prox::prox_l12_numerical(&z, w, 1_000_000, 1e-12)?;
        let diff = (&closed - &numerical).norm();
        report.max_numerical_diff = report.max_numerical_diff.max(diff);

        let mut problems = Vec::new();
        if grid.value < value - VALUE_TOL {
            report.grid_below += 1;
            problems.push(format!("grid point beats prox by {:.3e}", value - grid.value));
        }
        if grid.value > value + slack {
            report.grid_above += 1;
            problems.push(format!("grid minimum exceeds prox value by {:.3e}", grid.value - value));
        }
        if diff > NUMERICAL_TOL {
            report.numerical_mismatch += 1;
            problems.push(format!("numerical prox differs by {diff:.3e}"));
        }
        if !problems.is_empty() {
            report.failures.push(format!(
                "trial {t}: z = {:?}, lambda = {lambda}: {}",
                z.as_slice(),
                problems.join("; ")
            ));
        }
    }
    Ok(report)
}
