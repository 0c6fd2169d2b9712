//! Proximal operators of the ℓ1-2 family.
//!
//! For `φ(x) = ½‖x − z‖² + λ(‖x‖₁ − ‖x‖₂)` the global minimizer is available in
//! closed form. Let `w` be the soft threshold of `z` at level `λ`:
//!
//! * `w ≠ 0`: `x* = (1 + λ/‖w‖₂) w`;
//! * `w = 0`: `x*` keeps the single entry of `z` with the largest magnitude
//!   (lowest index on ties) and zeroes the rest.
//!
//! The same map applied to singular values gives the prox of
//! `‖X‖* − ‖X‖_F`, and applied row by row the prox of `‖X‖₁ − ‖X‖₂,₁`.

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::ThinSvd;
use crate::{Matrix, Vector};

/// Regularization weight `λ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PenaltyWeight(f64);

impl PenaltyWeight {
    pub const ZERO: PenaltyWeight = PenaltyWeight(0.0);

    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(PenaltyWeight(lambda))
        } else {
            Err(Error::invalid(format!(
                "penalty weight must be finite and nonnegative, got {lambda}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// The weight `λ·factor`, e.g. `λ/L` inside a gradient step.
    pub fn scaled(self, factor: f64) -> Result<Self> {
        PenaltyWeight::new(self.0 * factor)
    }
}

impl TryFrom<f64> for PenaltyWeight {
    type Error = Error;

    fn try_from(lambda: f64) -> Result<Self> {
        PenaltyWeight::new(lambda)
    }
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    let m = v.abs() - t;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Index of the largest `|x_i|`, lowest index on ties. `None` for empty input.
pub(crate) fn argmax_abs(x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in x.iter().enumerate() {
        let a = v.abs();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((i, a)),
        }
    }
    best.map(|(i, _)| i)
}

/// `‖x‖₁ − ‖x‖₂`.
pub fn l12_penalty(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum::<f64>() - norm2(x)
}

pub(crate) fn soft_threshold_slice(z: &[f64], lambda: f64, out: &mut [f64]) {
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = soft_threshold(zi, lambda);
    }
}

/// Closed-form ℓ1-2 prox on raw slices. All public vector, row and
/// singular-value variants route through here so they agree bit for bit.
pub(crate) fn prox_l12_slice(z: &[f64], lambda: f64, out: &mut [f64]) {
    debug_assert_eq!(z.len(), out.len());
    soft_threshold_slice(z, lambda, out);
    let wn = norm2(out);
    if wn > 0.0 {
        let scale = 1.0 + lambda / wn;
        out.iter_mut().for_each(|o| *o *= scale);
    } else {
        out.fill(0.0);
        if let Some(j) = argmax_abs(z) {
            out[j] = z[j];
        }
    }
}

/// A subgradient of `‖·‖₂` at `x`, used by every DC-type iteration.
///
/// Away from zero this is `x/‖x‖₂`. At `x = 0` any `u` with `‖u‖₂ ≤ 1` is
/// valid; we take `u = 0` unless that leaves the next ℓ1 step stuck at zero
/// (no entry of the forward point `anchor` exceeds `threshold`), in which case
/// `u = sign(anchor_j) e_j` with `j` the largest entry of `anchor`.
pub(crate) fn l2_subgradient(x: &[f64], anchor: &[f64], threshold: f64) -> Vec<f64> {
    let nx = norm2(x);
    if nx > 0.0 {
        return x.iter().map(|v| v / nx).collect();
    }
    let mut s = vec![0.0; x.len()];
    if anchor.iter().any(|a| a.abs() > threshold) {
        return s;
    }
    if let Some(j) = argmax_abs(anchor) {
        if anchor[j] != 0.0 {
            s[j] = 1.0f64.copysign(anchor[j]);
        }
    }
    s
}

/// Elementwise soft threshold, the prox of `λ‖·‖₁`.
pub fn prox_l1(z: &Vector, lambda: PenaltyWeight) -> Result<Vector> {
    check_finite(z.as_slice(), "prox input")?;
    let mut out = Vector::zeros(z.len());
    soft_threshold_slice(z.as_slice(), lambda.get(), out.as_mut_slice());
    Ok(out)
}

/// `φ(x) = ½‖x − z‖₂² + λ(‖x‖₁ − ‖x‖₂)`.
pub fn phi_objective(x: &Vector, z: &Vector, lambda: PenaltyWeight) -> Result<f64> {
    check_dim(z.len(), x.len())?;
    let fit: f64 = x.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * fit + lambda.get() * l12_penalty(x.as_slice()))
}

/// Closed-form prox of `λ(‖·‖₁ − ‖·‖₂)`.
pub fn prox_l12(z: &Vector, lambda: PenaltyWeight) -> Result<Vector> {
    if z.is_empty() {
        return Err(Error::invalid("prox input must have dimension ≥ 1"));
    }
    check_finite(z.as_slice(), "prox input")?;
    let mut out = Vector::zeros(z.len());
    prox_l12_slice(z.as_slice(), lambda.get(), out.as_mut_slice());
    Ok(out)
}

/// Result of the iterative prox, with every iterate when requested.
#[derive(Debug, Clone)]
pub struct NumericalProx {
    pub x: Vector,
    pub iterations: usize,
    pub converged: bool,
    /// `x₂, x₃, …` (the starting point `x₁ = 0` is not stored).
    pub history: Vec<Vector>,
}

/// Prox of `λ(‖·‖₁ − ‖·‖₂)` by DC iteration: `x_{t+1} = prox_{λ‖·‖₁}(z + λ s_t)`
/// from `x₁ = 0`. Kept as a baseline for the closed form.
pub fn prox_l12_numerical(
    z: &Vector,
    lambda: PenaltyWeight,
    max_iters: usize,
    tol: f64,
) -> Result<Vector> {
    prox_l12_numerical_run(z, lambda, max_iters, tol, false).map(|r| r.x)
}

pub fn prox_l12_numerical_run(
    z: &Vector,
    lambda: PenaltyWeight,
    max_iters: usize,
    tol: f64,
    keep_history: bool,
) -> Result<NumericalProx> {
    if z.is_empty() {
        return Err(Error::invalid("prox input must have dimension ≥ 1"));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    check_finite(z.as_slice(), "prox input")?;
    let lam = lambda.get();
    let zs = z.as_slice();
    let d = z.len();

    let mut x = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut shifted = vec![0.0; d];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let s = l2_subgradient(&x, zs, lam);
        for ((v, zi), si) in shifted.iter_mut().zip(zs).zip(&s) {
            *v = zi + lam * si;
        }
        soft_threshold_slice(&shifted, lam, &mut next);
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = norm2(&x).max(1.0);
        std::mem::swap(&mut x, &mut next);
        if keep_history {
            history.push(Vector::from_column_slice(&x));
        }
        if change <= tol * scale {
            converged = true;
            break;
        }
    }
    Ok(NumericalProx {
        x: Vector::from_vec(x),
        iterations,
        converged,
        history,
    })
}

/// Prox of `λ(‖·‖* − ‖·‖_F)` given the thin SVD of its argument.
///
/// The singular values go through the vector prox; directions whose new
/// singular value is zero are dropped. When `σ₁` is repeated and every
/// `σ_i ≤ λ`, the minimizer is not unique and the first pair is kept.
pub fn prox_nuc_minus_frob(svd_z: &ThinSvd, lambda: PenaltyWeight) -> Result<ThinSvd> {
    let sigma = svd_z.sigma.as_slice();
    check_finite(sigma, "singular values")?;
    if sigma.iter().any(|&s| s < 0.0) {
        return Err(Error::invalid("singular values must be nonnegative"));
    }
    if sigma.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("singular values must be sorted nonincreasing"));
    }
    if sigma.is_empty() {
        return Ok(svd_z.clone());
    }
    let mut shrunk = vec![0.0; sigma.len()];
    prox_l12_slice(sigma, lambda.get(), &mut shrunk);
    let keep: Vec<usize> = (0..shrunk.len()).filter(|&i| shrunk[i] > 0.0).collect();
    Ok(ThinSvd {
        u: svd_z.u.select_columns(&keep),
        sigma: Vector::from_iterator(keep.len(), keep.iter().map(|&i| shrunk[i])),
        v: svd_z.v.select_columns(&keep),
    })
}

/// Row-wise prox of `λ(‖·‖₁ − ‖·‖₂,₁)` for a `d×2` matrix of gradient pairs.
pub fn prox_l1_minus_l21_rows(z: &Matrix, lambda: PenaltyWeight) -> Result<Matrix> {
    if z.ncols() != 2 {
        return Err(Error::invalid(format!(
            "row-wise prox expects 2 columns, got {}",
            z.ncols()
        )));
    }
    check_finite(z.as_slice(), "prox input")?;
    let mut out = Matrix::zeros(z.nrows(), 2);
    prox_rows_into(z, lambda.get(), &mut out);
    Ok(out)
}

pub(crate) fn prox_rows_into(z: &Matrix, lambda: f64, out: &mut Matrix) {
    let mut row_out = [0.0; 2];
    for i in 0..z.nrows() {
        let row = [z[(i, 0)], z[(i, 1)]];
        prox_l12_slice(&row, lambda, &mut row_out);
        out[(i, 0)] = row_out[0];
        out[(i, 1)] = row_out[1];
    }
}
