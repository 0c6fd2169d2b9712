//! TV₁₋₂ denoising by alternating minimization.
//!
//! The model is the penalized split problem
//! `h(x, W) = ½‖x − y‖² + λ Σ_i (|W_i1| + |W_i2| − ‖W_i‖₂) + (μ/2)‖W − 𝒟x‖_F²`
//! where `𝒟x = [D_h x, D_v x]` stacks the two image gradients as a `d×2`
//! field. Each outer step solves the x-subproblem
//! `(μ D_hᵀD_h + μ D_vᵀD_v + I) x = y + μ 𝒟ᵀW` by conjugate gradients and
//! then updates `W` row by row with the closed-form ℓ1-2 prox.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::prox::{self, PenaltyWeight};
use crate::solvers::{Recorder, SolverTrace, StepInfo};
use crate::{Matrix, Vector};

/// Grayscale image vectorized column by column: pixel `(i, j)` sits at
/// `i + j·m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    m: usize,
    n: usize,
    x: Vector,
}

impl ImageGrid {
    pub fn new(m: usize, n: usize, x: Vector) -> Result<Self> {
        check_dim(m * n, x.len())?;
        check_finite(x.as_slice(), "image")?;
        Ok(ImageGrid { m, n, x })
    }

    pub fn from_fn(m: usize, n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let x = Vector::from_fn(m * n, |k, _| f(k % m, k / m));
        ImageGrid { m, n, x }
    }

    pub fn from_matrix(a: &Matrix) -> Result<Self> {
        ImageGrid::new(a.nrows(), a.ncols(), Vector::from_column_slice(a.as_slice()))
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_column_slice(self.m, self.n, self.x.as_slice())
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn pixels(&self) -> &Vector {
        &self.x
    }

    pub fn into_pixels(self) -> Vector {
        self.x
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[i + j * self.m]
    }

    /// `√(mean (x − other)²)`.
    pub fn rmse(&self, other: &ImageGrid) -> Result<f64> {
        check_dim(self.m, other.m)?;
        check_dim(self.n, other.n)?;
        Ok(((&self.x - &other.x).norm_squared() / self.x.len() as f64).sqrt())
    }
}

/// `d×2` field of edge values; column 0 is horizontal, column 1 vertical.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    pub w: Matrix,
}

impl EdgeField {
    pub fn zeros(d: usize) -> Self {
        EdgeField { w: Matrix::zeros(d, 2) }
    }

    pub fn new(w: Matrix) -> Result<Self> {
        check_dim(2, w.ncols())?;
        Ok(EdgeField { w })
    }

    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }
}

/// Forward differences with a replicate boundary: the horizontal difference
/// in the last column and the vertical difference in the last row are zero.
/// `D_h` acts along a row (`x(i, j+1) − x(i, j)`), `D_v` along a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientOperator {
    m: usize,
    n: usize,
}

impl GradientOperator {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("image grid must be non-empty"));
        }
        Ok(GradientOperator { m, n })
    }

    pub fn for_image(img: &ImageGrid) -> Self {
        GradientOperator { m: img.m, n: img.n }
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply_into(&self, x: &[f64], w: &mut Matrix) {
        let m = self.m;
        for j in 0..self.n {
            for i in 0..m {
                let k = i + j * m;
                w[(k, 0)] = if j + 1 < self.n { x[k + m] - x[k] } else { 0.0 };
                w[(k, 1)] = if i + 1 < m { x[k + 1] - x[k] } else { 0.0 };
            }
        }
    }

    fn adjoint_into(&self, w: &Matrix, out: &mut [f64]) {
        let m = self.m;
        out.fill(0.0);
        for j in 0..self.n {
            for i in 0..m {
                let k = i + j * m;
                if j + 1 < self.n {
                    let h = w[(k, 0)];
                    out[k] -= h;
                    out[k + m] += h;
                }
                if i + 1 < m {
                    let v = w[(k, 1)];
                    out[k] -= v;
                    out[k + 1] += v;
                }
            }
        }
    }

    /// `𝒟x = [D_h x, D_v x]`.
    pub fn apply(&self, x: &Vector) -> Result<EdgeField> {
        check_dim(self.len(), x.len())?;
        let mut w = Matrix::zeros(self.len(), 2);
        self.apply_into(x.as_slice(), &mut w);
        Ok(EdgeField { w })
    }

    /// `𝒟ᵀW = D_hᵀ w_h + D_vᵀ w_v`.
    pub fn adjoint(&self, w: &EdgeField) -> Result<Vector> {
        check_dim(self.len(), w.len())?;
        let mut out = Vector::zeros(self.len());
        self.adjoint_into(&w.w, out.as_mut_slice());
        Ok(out)
    }

    /// `B v = μ 𝒟ᵀ𝒟 v + v`.
    pub fn apply_b(&self, mu: f64, v: &Vector) -> Result<Vector> {
        check_dim(self.len(), v.len())?;
        let mut scratch = Matrix::zeros(self.len(), 2);
        let mut out = Vector::zeros(self.len());
        self.b_into(mu, v.as_slice(), &mut scratch, out.as_mut_slice());
        Ok(out)
    }

    fn b_into(&self, mu: f64, v: &[f64], scratch: &mut Matrix, out: &mut [f64]) {
        if mu == 0.0 {
            out.copy_from_slice(v);
            return;
        }
        self.apply_into(v, scratch);
        self.adjoint_into(scratch, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = mu * *o + vi;
        }
    }
}

/// `Σ_i |a_i| + |b_i| − √(a_i² + b_i²)` over the pixel gradients.
pub fn tv12_value(op: &GradientOperator, x: &ImageGrid) -> Result<f64> {
    let w = op.apply(&x.x)?;
    Ok(l1_minus_l21(&w.w))
}

fn l1_minus_l21(w: &Matrix) -> f64 {
    (0..w.nrows())
        .map(|i| prox::l12_penalty(&[w[(i, 0)], w[(i, 1)]]))
        .sum()
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgReport {
    pub x: Vector,
    pub iterations: usize,
    pub converged: bool,
    /// `‖r_k‖₂` for `k = 0, 1, …`, where `r_0` is the residual at `x0`.
    pub residuals: Vec<f64>,
}

/// Conjugate gradients on `(μ 𝒟ᵀ𝒟 + I) x = rhs` from `x0`, stopping at
/// `‖r‖ ≤ tol·‖rhs‖`. On budget exhaustion the last iterate is returned with
/// `converged = false`.
pub fn cgd_solve(
    op: &GradientOperator,
    mu: f64,
    rhs: &Vector,
    x0: &Vector,
    tol: f64,
    max_iters: usize,
) -> Result<CgReport> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be finite and non-negative, got {mu}")));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tol must be non-negative"));
    }
    check_dim(op.len(), rhs.len())?;
    check_dim(op.len(), x0.len())?;

    let d = op.len();
    let mut scratch = Matrix::zeros(d, 2);
    let mut bp = Vector::zeros(d);
    let mut x = x0.clone();
    op.b_into(mu, x.as_slice(), &mut scratch, bp.as_mut_slice());
    let mut r = rhs - &bp;
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let target = tol * rhs.norm();
    let mut residuals = vec![rr.sqrt()];
    if rr.sqrt() <= target {
        return Ok(CgReport { x, iterations: 0, converged: true, residuals });
    }
    for it in 1..=max_iters {
        op.b_into(mu, p.as_slice(), &mut scratch, bp.as_mut_slice());
        let curvature = p.dot(&bp);
        if curvature <= 0.0 {
            break;
        }
        let alpha = rr / curvature;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &bp, 1.0);
        let rr_next = r.norm_squared();
        residuals.push(rr_next.sqrt());
        if rr_next.sqrt() <= target {
            return Ok(CgReport { x, iterations: it, converged: true, residuals });
        }
        p.axpy(1.0, &r, rr_next / rr);
        rr = rr_next;
    }
    let iterations = residuals.len() - 1;
    Ok(CgReport { x, iterations, converged: false, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvConfig {
    pub lambda: PenaltyWeight,
    /// Penalty on `‖W − 𝒟x‖²`; may be zero only when `λ = 0`.
    pub mu: f64,
    pub cgd_tol: f64,
    pub cgd_max_iters: usize,
    pub outer_iters: usize,
    /// Stop once `|h_{t+1} − h_t| ≤ h_tol · |h_t|`.
    pub h_tol: f64,
    pub record_trace: bool,
}

impl TvConfig {
    /// `μ = 100 λ` and the default inner and outer budgets.
    pub fn new(lambda: PenaltyWeight) -> Self {
        TvConfig {
            lambda,
            mu: 100.0 * lambda.get(),
            cgd_tol: 1e-8,
            cgd_max_iters: 200,
            outer_iters: 100,
            h_tol: 1e-8,
            record_trace: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::invalid(format!("mu must be finite and non-negative, got {}", self.mu)));
        }
        if self.mu == 0.0 && self.lambda.get() > 0.0 {
            return Err(Error::invalid("mu must be positive when lambda > 0"));
        }
        if !(self.cgd_tol >= 0.0) || !(self.h_tol >= 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        if self.outer_iters == 0 {
            return Err(Error::invalid("outer_iters must be at least 1"));
        }
        Ok(())
    }
}

/// `h(x, W)` for observation `y`.
pub fn split_objective(x: &ImageGrid, w: &EdgeField, y: &ImageGrid, cfg: &TvConfig) -> Result<f64> {
    check_dim(y.x.len(), x.x.len())?;
    let op = GradientOperator::for_image(x);
    let dx = op.apply(&x.x)?;
    check_dim(dx.len(), w.len())?;
    let data = 0.5 * (&x.x - &y.x).norm_squared();
    let coupling = 0.5 * cfg.mu * (&w.w - &dx.w).norm_squared();
    Ok(data + cfg.lambda.get() * l1_minus_l21(&w.w) + coupling)
}

/// Alternating minimization from `x = y`, `W = 0`. The trace holds
/// `h(x_t, W_t)` for the start and every outer step, with CG iteration
/// counts in `aux_iters`; CG runs that hit their budget add a warning and
/// the loop carries on.
pub fn altmin_denoise(y: &ImageGrid, cfg: &TvConfig) -> Result<(ImageGrid, SolverTrace)> {
    cfg.validate()?;
    let op = GradientOperator::for_image(y);
    let d = op.len();
    let mu = cfg.mu;
    let weight = if mu > 0.0 { cfg.lambda.get() / mu } else { 0.0 };
    let mut rec = Recorder::new(cfg.record_trace);

    let mut x = y.clone();
    let mut w = EdgeField::zeros(d);
    let mut h = split_objective(&x, &w, y, cfg)?;
    rec.push(0, h, StepInfo::default());

    let mut converged = false;
    let mut iterations = 0;
    let mut dx = Matrix::zeros(d, 2);
    for t in 1..=cfg.outer_iters {
        iterations = t;
        let rhs = if mu > 0.0 { &y.x + op.adjoint(&w)? * mu } else { y.x.clone() };
        let cg = cgd_solve(&op, mu, &rhs, &x.x, cfg.cgd_tol, cfg.cgd_max_iters)?;
        if !cg.converged {
            rec.trace.warnings.push(format!(
                "outer iteration {t}: CG stopped after {} iterations at residual {:.3e}",
                cg.iterations,
                cg.residuals.last().copied().unwrap_or(f64::NAN)
            ));
        }
        x = ImageGrid { m: y.m, n: y.n, x: cg.x };
        op.apply_into(x.x.as_slice(), &mut dx);
        if weight > 0.0 {
            prox::prox_rows_into(&dx, weight, &mut w.w);
        } else {
            w.w.copy_from(&dx);
        }
        let h_next = split_objective(&x, &w, y, cfg)?;
        if !h_next.is_finite() {
            return Err(Error::Divergence { iteration: t, objective: h_next });
        }
        rec.push(
            t,
            h_next,
            StepInfo { aux_iters: Some(cg.iterations), ..Default::default() },
        );
        let small = (h - h_next).abs() <= cfg.h_tol * h.abs();
        h = h_next;
        if small {
            converged = true;
            break;
        }
    }
    Ok((x, rec.finish(iterations, converged)))
}

/// Adds `N(0, std²)` noise to every pixel.
pub fn add_noise<R: Rng + ?Sized>(img: &ImageGrid, std: f64, rng: &mut R) -> ImageGrid {
    let x = img.x.map(|v| {
        let e: f64 = StandardNormal.sample(rng);
        v + std * e
    });
    ImageGrid { m: img.m, n: img.n, x }
}

/// Piecewise-constant test image: a background level with `pieces`
/// overlapping axis-aligned rectangles, every level drawn from `[0.1, 0.9]`.
pub fn piecewise_constant<R: Rng + ?Sized>(m: usize, n: usize, pieces: usize, rng: &mut R) -> ImageGrid {
    let mut img = Matrix::from_element(m, n, rng.random_range(0.1..0.9));
    for _ in 0..pieces {
        let (r0, r1) = ordered(rng.random_range(0..m), rng.random_range(0..m));
        let (c0, c1) = ordered(rng.random_range(0..n), rng.random_range(0..n));
        let level = rng.random_range(0.1..0.9);
        img.view_mut((r0, c0), (r1 - r0 + 1, c1 - c0 + 1)).fill(level);
    }
    ImageGrid::from_matrix(&img).expect("finite by construction")
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn constant_image_has_zero_gradient() {
        let img = ImageGrid::from_fn(4, 5, |_, _| 0.3);
        let op = GradientOperator::for_image(&img);
        assert!(op.apply(img.pixels()).unwrap().w.iter().all(|&v| v == 0.0));
        assert_eq!(tv12_value(&op, &img).unwrap(), 0.0);
    }

    #[test]
    fn ramp_along_a_row() {
        let img = ImageGrid::from_fn(1, 6, |_, j| j as f64);
        let w = GradientOperator::for_image(&img).apply(img.pixels()).unwrap();
        assert_eq!(w.w.column(0).as_slice(), &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        assert!(w.w.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizontal_edges_have_zero_tv12() {
        let img = ImageGrid::from_fn(6, 5, |i, _| if i < 3 { 0.0 } else { 1.0 });
        let op = GradientOperator::for_image(&img);
        assert_eq!(tv12_value(&op, &img).unwrap(), 0.0);
    }

    #[test]
    fn tv12_matches_per_pixel_sum() {
        let mut r = rng::seeded(1);
        let img = ImageGrid::from_fn(4, 4, |_, _| r.random::<f64>());
        let a = img.to_matrix();
        let mut expected = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let h = if j < 3 { a[(i, j + 1)] - a[(i, j)] } else { 0.0 };
                let v = if i < 3 { a[(i + 1, j)] - a[(i, j)] } else { 0.0 };
                expected += h.abs() + v.abs() - h.hypot(v);
            }
        }
        let got = tv12_value(&GradientOperator::for_image(&img), &img).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn cg_with_identity_system() {
        let op = GradientOperator::new(3, 4).unwrap();
        let rhs = Vector::from_fn(12, |k, _| k as f64 - 4.0);
        let out = cgd_solve(&op, 0.0, &rhs, &Vector::zeros(12), 1e-12, 10).unwrap();
        assert_eq!(out.x, rhs);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn cg_recovers_known_solution() {
        let mut r = rng::seeded(2);
        let op = GradientOperator::new(7, 9).unwrap();
        let known = Vector::from_fn(63, |_, _| r.random::<f64>());
        let rhs = op.apply_b(3.0, &known).unwrap();
        let out = cgd_solve(&op, 3.0, &rhs, &Vector::zeros(63), 1e-12, 500).unwrap();
        assert!(out.converged);
        assert!((out.x - known).norm() <= 1e-10 * rhs.norm() * 100.0);
    }

    #[test]
    fn cg_reports_budget_exhaustion() {
        let mut r = rng::seeded(3);
        let op = GradientOperator::new(20, 20).unwrap();
        let rhs = Vector::from_fn(400, |_, _| r.random::<f64>());
        let out = cgd_solve(&op, 50.0, &rhs, &Vector::zeros(400), 1e-14, 2).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn split_objective_examples() {
        let y = ImageGrid::from_fn(3, 3, |_, _| 0.5);
        let cfg = TvConfig::new(PenaltyWeight::new(0.1).unwrap());
        assert_eq!(split_objective(&y, &EdgeField::zeros(9), &y, &cfg).unwrap(), 0.0);

        let y = ImageGrid::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let dy = GradientOperator::for_image(&y).apply(y.pixels()).unwrap();
        let h = split_objective(&y, &EdgeField::zeros(9), &y, &cfg).unwrap();
        assert!((h - 0.5 * cfg.mu * dy.w.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_returns_the_input() {
        let mut r = rng::seeded(4);
        let y = ImageGrid::from_fn(5, 6, |_, _| r.random::<f64>());
        let cfg = TvConfig::new(PenaltyWeight::ZERO);
        let (x, trace) = altmin_denoise(&y, &cfg).unwrap();
        assert_eq!(x, y);
        assert_eq!(trace.iterations, 1);
    }

    #[test]
    fn constant_image_is_a_fixed_point() {
        let y = ImageGrid::from_fn(8, 8, |_, _| 0.42);
        let (x, _) = altmin_denoise(&y, &TvConfig::new(PenaltyWeight::new(0.05).unwrap())).unwrap();
        assert!(x.rmse(&y).unwrap() < 1e-8);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TvConfig::new(PenaltyWeight::new(0.1).unwrap());
        cfg.mu = 0.0;
        assert!(cfg.validate().is_err());
        cfg.mu = f64::NAN;
        assert!(cfg.validate().is_err());
    }
}
