//! Thin SVDs, matrix-free linear operators and block power iteration.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::rng;
use crate::{Matrix, Vector};

/// `X = U diag(σ) Vᵀ` with orthonormal columns in `U` (m×k) and `V` (n×k)
/// and `σ` nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    pub u: Matrix,
    pub sigma: Vector,
    pub v: Matrix,
}

impl ThinSvd {
    pub fn empty(m: usize, n: usize) -> Self {
        ThinSvd {
            u: Matrix::zeros(m, 0),
            sigma: Vector::zeros(0),
            v: Matrix::zeros(n, 0),
        }
    }

    /// Full thin SVD of a dense matrix, sorted nonincreasing.
    ///
    /// nalgebra's bidiagonal QR at its default tolerance occasionally returns
    /// a factorization that does not reconstruct its input (seen on
    /// rank-deficient inputs), so the result is checked and recomputed with
    /// other tolerances if needed. The best attempt is kept.
    pub fn from_dense(a: &Matrix) -> Self {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return ThinSvd::empty(m, n);
        }
        let scale = a.norm();
        let accept = 1e-12 * scale.max(f64::MIN_POSITIVE) * ((m.max(n)) as f64).sqrt();
        let mut best: Option<(f64, nalgebra::linalg::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;
        for eps in [f64::EPSILON, 1e-14, 1e-20, 1e-12] {
            let Some(svd) = a.clone().try_svd(true, true, eps, 0) else {
                continue;
            };
            let residual = match svd.clone().recompose() {
                Ok(r) => (r - a).norm(),
                Err(_) => f64::INFINITY,
            };
            let done = residual <= accept;
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, svd));
            }
            if done {
                break;
            }
        }
        let svd = best.expect("at least one SVD attempt converges").1;
        let u = svd.u.expect("left singular vectors requested");
        let v_t = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        ThinSvd {
            u: u.select_columns(&order),
            sigma: Vector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i])),
            v: v_t.transpose().select_columns(&order),
        }
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// First `k` triplets (or all of them if there are fewer).
    pub fn truncate(&self, k: usize) -> ThinSvd {
        let k = k.min(self.rank());
        ThinSvd {
            u: self.u.columns(0, k).into_owned(),
            sigma: self.sigma.rows(0, k).into_owned(),
            v: self.v.columns(0, k).into_owned(),
        }
    }
}

/// A real linear map `R^ncols → R^nrows` known only through products.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn apply_adjoint(&self, y: &Vector) -> Vector;

    /// `A X` for a block of column vectors.
    fn apply_block(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.nrows(), x.ncols());
        for j in 0..x.ncols() {
            out.set_column(j, &self.apply(&x.column(j).into_owned()));
        }
        out
    }

    /// `Aᵀ Y` for a block of column vectors.
    fn apply_adjoint_block(&self, y: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.ncols(), y.ncols());
        for j in 0..y.ncols() {
            out.set_column(j, &self.apply_adjoint(&y.column(j).into_owned()));
        }
        out
    }
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &Vector) -> Vector {
        self * x
    }

    fn apply_adjoint(&self, y: &Vector) -> Vector {
        self.tr_mul(y)
    }

    fn apply_block(&self, x: &Matrix) -> Matrix {
        self * x
    }

    fn apply_adjoint_block(&self, y: &Matrix) -> Matrix {
        self.tr_mul(y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &Vector) -> Vector {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &Vector) -> Vector {
        (**self).apply_adjoint(y)
    }
    fn apply_block(&self, x: &Matrix) -> Matrix {
        (**self).apply_block(x)
    }
    fn apply_adjoint_block(&self, y: &Matrix) -> Matrix {
        (**self).apply_adjoint_block(y)
    }
}

/// Orthonormal basis for the column span of `a` (thin Householder QR).
pub fn orthonormalize(a: &Matrix) -> Matrix {
    a.clone().qr().q()
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    /// Block iterations before giving up.
    pub max_iters: usize,
    /// Residual tolerance relative to `σ₁`.
    pub tol: f64,
    /// Extra columns carried beyond the requested rank.
    pub oversample: usize,
    /// Seed for the random columns that fill the starting block.
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            max_iters: 30,
            tol: 1e-6,
            oversample: 2,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartialSvd {
    pub svd: ThinSvd,
    pub converged: bool,
    pub iterations: usize,
    /// Largest `‖A v_i − σ_i u_i‖ / σ₁` over the returned triplets.
    pub residual: f64,
}

/// Top-`k` singular triplets of `op` by block power (subspace) iteration
/// with a Rayleigh–Ritz step each round.
///
/// The starting block reuses the right factors of `warm_start` and fills the
/// rest with seeded Gaussian columns. Iteration stops once every retained
/// triplet satisfies `‖A v_i − σ_i u_i‖ ≤ tol·σ₁`, or after `max_iters`
/// rounds, in which case the best factors are returned with
/// `converged = false`.
pub fn partial_svd<A: LinearOperator + ?Sized>(
    op: &A,
    k: usize,
    warm_start: Option<&ThinSvd>,
    opts: &PowerOptions,
) -> Result<PartialSvd> {
    if k == 0 {
        return Err(Error::invalid("partial_svd needs k ≥ 1"));
    }
    let (m, n) = (op.nrows(), op.ncols());
    let full = m.min(n);
    if full == 0 {
        return Err(Error::invalid("partial_svd on an empty operator"));
    }
    let k = k.min(full);
    let block = (k + opts.oversample).min(full);

    let mut start = Matrix::zeros(n, block);
    let mut filled = 0;
    if let Some(w) = warm_start {
        check_dim(n, w.v.nrows())?;
        filled = w.rank().min(block);
        for j in 0..filled {
            start.set_column(j, &w.v.column(j));
        }
    }
    if filled < block {
        let mut r = rng::seeded(opts.seed);
        for j in filled..block {
            for i in 0..n {
                start[(i, j)] = StandardNormal.sample(&mut r);
            }
        }
    }
    let mut v_block = orthonormalize(&start);

    let mut best: Option<(ThinSvd, f64)> = None;
    let mut iterations = 0;
    let mut av = op.apply_block(&v_block);
    loop {
        iterations += 1;
        let q = orthonormalize(&av);
        // Bᵀ = Aᵀ Q is n×block; its SVD gives B = Qᵀ A = U_b Σ V_bᵀ.
        let bt = op.apply_adjoint_block(&q);
        let small = ThinSvd::from_dense(&bt);
        // For Bᵀ = V_b Σ U_bᵀ the roles of the factors swap.
        let u_full = &q * &small.v;
        v_block = small.u.clone();
        let sigma = small.sigma.clone();

        av = op.apply_block(&v_block);
        let sigma1 = sigma.get(0).copied().unwrap_or(0.0);
        let mut residual: f64 = 0.0;
        for i in 0..k {
            let r = (av.column(i) - u_full.column(i) * sigma[i]).norm();
            residual = residual.max(r);
        }
        let rel = if sigma1 > 0.0 { residual / sigma1 } else { residual };
        let svd = ThinSvd {
            u: u_full.columns(0, k).into_owned(),
            sigma: sigma.rows(0, k).into_owned(),
            v: v_block.columns(0, k).into_owned(),
        };
        let improved = best.as_ref().is_none_or(|(_, r)| rel <= *r);
        if improved {
            best = Some((svd, rel));
        }
        if rel <= opts.tol || iterations >= opts.max_iters.max(1) {
            let (svd, residual) = best.expect("at least one iteration ran");
            return Ok(PartialSvd {
                svd,
                converged: residual <= opts.tol,
                iterations,
                residual,
            });
        }
    }
}
