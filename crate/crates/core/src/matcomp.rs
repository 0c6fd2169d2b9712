//! Low-rank matrix completion with the `‖X‖* − ‖X‖_F` penalty.
//!
//! The loss is `½‖P_Ω(X − O)‖_F²`. Iterates are kept in factored form
//! `X = U Vᵀ`. The prox argument `X − P_Ω(X − O)` is then sparse plus low
//! rank, so the partial SVD costs `O(k²(m + n) + k‖Ω‖₁)` per sweep.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{partial_svd, LinearOperator, PowerOptions, ThinSvd};
use crate::prox::{self, PenaltyWeight};
use crate::rng;
use crate::solvers::{run_nmapg, ProxGradProblem, SolverConfig, SolverTrace};
use crate::{Matrix, Vector};

/// Coordinate-form sparse matrix; used both for the observations `P_Ω(O)`
/// and for sparse terms sharing that pattern. Entries are kept sorted by
/// `(row, col)` with no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl ObservedMatrix {
    pub fn new(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, v) in &entries {
            if i >= nrows || j >= ncols {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside a {nrows}×{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("entry ({i}, {j}) is not finite")));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::invalid(format!("duplicate entry ({}, {})", w[0].0, w[0].1)));
        }
        Ok(ObservedMatrix { nrows, ncols, entries })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// `‖Ω‖₁`, the number of stored entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.2.abs()).fold(0.0, f64::max)
    }

    /// Same pattern, new values (in entry order).
    pub fn with_values(&self, values: impl IntoIterator<Item = f64>) -> ObservedMatrix {
        let entries = self
            .entries
            .iter()
            .zip(values)
            .map(|(&(i, j, _), v)| (i, j, v))
            .collect::<Vec<_>>();
        debug_assert_eq!(entries.len(), self.entries.len());
        ObservedMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            entries,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            out[(i, j)] = v;
        }
        out
    }

    /// Reads the CSV format written by [`ObservedMatrix::write_csv`].
    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = || -> Result<Option<(usize, String)>> {
            for (no, line) in lines.by_ref() {
                let line = line?;
                let t = line.trim();
                if !t.is_empty() {
                    return Ok(Some((no + 1, t.to_string())));
                }
            }
            Ok(None)
        };
        let header = next()?.ok_or_else(|| Error::Parse("empty file".into()))?;
        if header.1.replace(' ', "") != "m,n" {
            return Err(Error::Parse(format!("line {}: expected header 'm,n'", header.0)));
        }
        let dims = next()?.ok_or_else(|| Error::Parse("missing dimension line".into()))?;
        let (m, n) = match dims.1.split(',').map(|s| s.trim().parse::<usize>()).collect::<Vec<_>>()[..] {
            [Ok(m), Ok(n)] => (m, n),
            _ => return Err(Error::Parse(format!("line {}: expected 'm,n' values", dims.0))),
        };
        let mut entries = Vec::new();
        while let Some((no, line)) = next()? {
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match parts[..] {
                [i, j, v] => i
                    .parse::<usize>()
                    .ok()
                    .zip(j.parse::<usize>().ok())
                    .zip(v.parse::<f64>().ok()),
                _ => None,
            };
            let ((i, j), v) =
                parsed.ok_or_else(|| Error::Parse(format!("line {no}: expected 'row,col,value'")))?;
            entries.push((i, j, v));
        }
        ObservedMatrix::new(m, n, entries)
    }

    /// Two header lines (`m,n` and the dimensions) followed by one
    /// zero-based `row,col,value` line per entry.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "m,n")?;
        writeln!(w, "{},{}", self.nrows, self.ncols)?;
        for &(i, j, v) in &self.entries {
            writeln!(w, "{i},{j},{v}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        ObservedMatrix::read_csv(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn spmv_into(&self, x: &Matrix, out: &mut Matrix) {
        for c in 0..x.ncols() {
            for &(i, j, v) in &self.entries {
                out[(i, c)] += v * x[(j, c)];
            }
        }
    }

    fn spmv_t_into(&self, y: &Matrix, out: &mut Matrix) {
        for c in 0..y.ncols() {
            for &(i, j, v) in &self.entries {
                out[(j, c)] += v * y[(i, c)];
            }
        }
    }
}

/// `X = U Vᵀ` with `U: m×k`, `V: n×k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    pub u: Matrix,
    pub v: Matrix,
}

impl LowRankFactor {
    pub fn new(u: Matrix, v: Matrix) -> Result<Self> {
        check_dim(u.ncols(), v.ncols())?;
        check_finite(u.as_slice(), "left factor")?;
        check_finite(v.as_slice(), "right factor")?;
        Ok(LowRankFactor { u, v })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        LowRankFactor {
            u: Matrix::zeros(m, 0),
            v: Matrix::zeros(n, 0),
        }
    }

    /// `U diag(σ)` and `V`.
    pub fn from_svd(svd: &ThinSvd) -> Self {
        let mut u = svd.u.clone();
        for (j, s) in svd.sigma.iter().enumerate() {
            u.column_mut(j).scale_mut(*s);
        }
        LowRankFactor { u, v: svd.v.clone() }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for c in 0..self.rank() {
            s += self.u[(i, c)] * self.v[(j, c)];
        }
        s
    }

    pub fn to_dense(&self) -> Matrix {
        &self.u * self.v.transpose()
    }

    /// `Σ_i c_i X_i` as a factor pair of rank `Σ rank(X_i)`; zero
    /// coefficients are skipped.
    pub fn combine(terms: &[(f64, &LowRankFactor)]) -> LowRankFactor {
        let first = terms[0].1;
        let (m, n) = (first.nrows(), first.ncols());
        let live: Vec<&(f64, &LowRankFactor)> =
            terms.iter().filter(|(c, f)| *c != 0.0 && f.rank() > 0).collect();
        let k: usize = live.iter().map(|(_, f)| f.rank()).sum();
        let mut u = Matrix::zeros(m, k);
        let mut v = Matrix::zeros(n, k);
        let mut at = 0;
        for (c, f) in live {
            let r = f.rank();
            u.columns_mut(at, r).copy_from(&(&f.u * *c));
            v.columns_mut(at, r).copy_from(&f.v);
            at += r;
        }
        LowRankFactor { u, v }
    }

    /// `‖U Vᵀ‖_F² = Σ (UᵀU) ∘ (VᵀV)`.
    pub fn frobenius_sq(&self) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let gu = self.u.tr_mul(&self.u);
        let gv = self.v.tr_mul(&self.v);
        gu.component_mul(&gv).sum().max(0.0)
    }

    /// Singular values of `U Vᵀ` from the small core `R_U R_Vᵀ`.
    pub fn singular_values(&self) -> Vector {
        if self.rank() == 0 {
            return Vector::zeros(0);
        }
        let ru = self.u.clone().qr().r();
        let rv = self.v.clone().qr().r();
        let core = ru * rv.transpose();
        ThinSvd::from_dense(&core).sigma
    }
}

/// `Z = S + U Vᵀ`, never materialized.
#[derive(Debug, Clone)]
pub struct SparsePlusLowRank {
    pub sparse: ObservedMatrix,
    pub low_rank: LowRankFactor,
}

impl SparsePlusLowRank {
    pub fn new(sparse: ObservedMatrix, low_rank: LowRankFactor) -> Result<Self> {
        check_dim(sparse.nrows(), low_rank.nrows())?;
        check_dim(sparse.ncols(), low_rank.ncols())?;
        Ok(SparsePlusLowRank { sparse, low_rank })
    }

    pub fn to_dense(&self) -> Matrix {
        self.sparse.to_dense() + self.low_rank.to_dense()
    }
}

impl LinearOperator for SparsePlusLowRank {
    fn nrows(&self) -> usize {
        self.sparse.nrows()
    }

    fn ncols(&self) -> usize {
        self.sparse.ncols()
    }

    fn apply(&self, x: &Vector) -> Vector {
        let block = self.apply_block(&Matrix::from_column_slice(x.len(), 1, x.as_slice()));
        Vector::from_column_slice(block.as_slice())
    }

    fn apply_adjoint(&self, y: &Vector) -> Vector {
        let block = self.apply_adjoint_block(&Matrix::from_column_slice(y.len(), 1, y.as_slice()));
        Vector::from_column_slice(block.as_slice())
    }

    fn apply_block(&self, x: &Matrix) -> Matrix {
        let lr = &self.low_rank;
        let mut out = if lr.rank() > 0 {
            &lr.u * lr.v.tr_mul(x)
        } else {
            Matrix::zeros(self.nrows(), x.ncols())
        };
        self.sparse.spmv_into(x, &mut out);
        out
    }

    fn apply_adjoint_block(&self, y: &Matrix) -> Matrix {
        let lr = &self.low_rank;
        let mut out = if lr.rank() > 0 {
            &lr.v * lr.u.tr_mul(y)
        } else {
            Matrix::zeros(self.ncols(), y.ncols())
        };
        self.sparse.spmv_t_into(y, &mut out);
        out
    }
}

/// `(S + UVᵀ) v`.
pub fn splr_matvec(z: &SparsePlusLowRank, v: &Vector) -> Result<Vector> {
    check_dim(z.ncols(), v.len())?;
    Ok(z.apply(v))
}

/// `(S + UVᵀ)ᵀ v`.
pub fn splr_matvec_adjoint(z: &SparsePlusLowRank, v: &Vector) -> Result<Vector> {
    check_dim(z.nrows(), v.len())?;
    Ok(z.apply_adjoint(v))
}

/// Smooth part `½‖P_Ω(X − O)‖_F²`; its gradient `P_Ω(X − O)` is sparse and
/// `1`-Lipschitz.
#[derive(Debug, Clone)]
pub struct McObjective<'a> {
    obs: &'a ObservedMatrix,
}

pub fn mc_objective(obs: &ObservedMatrix) -> McObjective<'_> {
    McObjective { obs }
}

impl McObjective<'_> {
    pub fn value(&self, x: &LowRankFactor) -> f64 {
        0.5 * self
            .obs
            .entries
            .iter()
            .map(|&(i, j, o)| (x.entry(i, j) - o).powi(2))
            .sum::<f64>()
    }

    pub fn gradient(&self, x: &LowRankFactor) -> ObservedMatrix {
        self.obs
            .with_values(self.obs.entries.iter().map(|&(i, j, o)| x.entry(i, j) - o))
    }

    pub fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// `0.1 · max |O_ij|` over the observed entries.
pub fn default_lambda(obs: &ObservedMatrix) -> f64 {
    0.1 * obs.max_abs()
}

#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    /// Rank of the first partial SVD.
    pub k_init: usize,
    pub k_max: usize,
    pub power: PowerOptions,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            k_init: 8,
            k_max: 100,
            power: PowerOptions::default(),
        }
    }
}

#[derive(Clone)]
struct McPoint {
    factor: LowRankFactor,
    /// Singular values when the point came out of the prox.
    sigma: Option<Vector>,
}

struct McProblem<'a> {
    obs: &'a ObservedMatrix,
    lambda: f64,
    opts: McOptions,
    k: usize,
    warm: Option<ThinSvd>,
    warnings: Vec<String>,
    power_iters: usize,
}

impl McProblem<'_> {
    fn svd_of(&mut self, op: &SparsePlusLowRank, k: usize, iteration: usize) -> Result<ThinSvd> {
        let first = partial_svd(op, k, self.warm.as_ref(), &self.opts.power)?;
        self.power_iters += first.iterations;
        if first.converged {
            return Ok(first.svd);
        }
        let wider = PowerOptions {
            oversample: 2 * self.opts.power.oversample.max(1),
            ..self.opts.power
        };
        let retry = partial_svd(op, k, self.warm.as_ref(), &wider)?;
        self.power_iters += retry.iterations;
        if !retry.converged {
            self.warnings.push(format!(
                "iteration {iteration}: partial SVD (k = {k}) stopped at relative residual {:.3e}",
                retry.residual
            ));
        }
        Ok(if retry.residual <= first.residual { retry.svd } else { first.svd })
    }
}

impl ProxGradProblem for McProblem<'_> {
    type Point = McPoint;

    fn objective(&mut self, p: &McPoint) -> Result<f64> {
        let fit = mc_objective(self.obs).value(&p.factor);
        let sigma = match &p.sigma {
            Some(s) => s.clone(),
            None => p.factor.singular_values(),
        };
        Ok(fit + self.lambda * prox::l12_penalty(sigma.as_slice()))
    }

    fn prox_grad_step(&mut self, p: &McPoint, iteration: usize) -> Result<McPoint> {
        let grad = mc_objective(self.obs).gradient(&p.factor);
        // L = 1, so the forward point is X − P_Ω(X − O).
        let sparse = grad.with_values(grad.entries.iter().map(|e| -e.2));
        let op = SparsePlusLowRank {
            sparse,
            low_rank: p.factor.clone(),
        };
        let full = op.nrows().min(op.ncols());
        let k_max = self.opts.k_max.min(full).max(1);
        let mut k = self.k.clamp(1, k_max);
        let svd = loop {
            let svd = self.svd_of(&op, k, iteration)?;
            let surviving = svd.sigma.iter().filter(|&&s| s > self.lambda).count();
            if surviving < k || k == k_max {
                break svd;
            }
            k = (2 * k).min(k_max);
        };
        let surviving = svd.sigma.iter().filter(|&&s| s > self.lambda).count();
        self.k = (surviving + 1).clamp(1, k_max);
        let out = prox::prox_nuc_minus_frob(&svd, PenaltyWeight::new(self.lambda)?)?;
        self.warm = Some(svd);
        Ok(McPoint {
            factor: LowRankFactor::from_svd(&out),
            sigma: Some(out.sigma),
        })
    }

    fn extrapolate(&self, x: &McPoint, z: &McPoint, x_prev: &McPoint, a: f64, b: f64) -> McPoint {
        if a == 0.0 && b == 0.0 {
            return x.clone();
        }
        // After an accepted step z and x coincide; merging them keeps the
        // extrapolated rank at 2k instead of 3k.
        let factor = if z.factor == x.factor {
            LowRankFactor::combine(&[(1.0 + b, &x.factor), (-b, &x_prev.factor)])
        } else {
            LowRankFactor::combine(&[(1.0 - a + b, &x.factor), (a, &z.factor), (-b, &x_prev.factor)])
        };
        McPoint { factor, sigma: None }
    }

    fn dist_sq(&self, a: &McPoint, b: &McPoint) -> f64 {
        LowRankFactor::combine(&[(1.0, &a.factor), (-1.0, &b.factor)]).frobenius_sq()
    }

    fn norm(&self, p: &McPoint) -> f64 {
        match &p.sigma {
            Some(s) => s.norm(),
            None => p.factor.frobenius_sq().sqrt(),
        }
    }

    fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    fn take_aux_iters(&mut self) -> Option<usize> {
        Some(std::mem::take(&mut self.power_iters))
    }
}

/// nmAPG for `½‖P_Ω(X − O)‖_F² + λ(‖X‖* − ‖X‖_F)` from `X = 0`, with the
/// default power-iteration settings and rank cap `k_max`.
pub fn solve_mc_nmapg(
    obs: &ObservedMatrix,
    lambda: PenaltyWeight,
    k_max: usize,
    cfg: &SolverConfig,
) -> Result<(LowRankFactor, SolverTrace)> {
    let opts = McOptions {
        k_max,
        ..McOptions::default()
    };
    solve_mc_nmapg_with(obs, lambda, &opts, cfg)
}

/// Each prox step takes a partial SVD of the sparse-plus-low-rank forward
/// point and applies the singular-value prox. The SVD rank adapts: after
/// each step it is set to the number of singular values above `λ` plus one
/// probe direction, and it is doubled on the spot (up to `k_max`) whenever
/// every computed value survives.
pub fn solve_mc_nmapg_with(
    obs: &ObservedMatrix,
    lambda: PenaltyWeight,
    opts: &McOptions,
    cfg: &SolverConfig,
) -> Result<(LowRankFactor, SolverTrace)> {
    if opts.k_max == 0 || opts.k_init == 0 {
        return Err(Error::invalid("rank limits must be at least 1"));
    }
    let mut problem = McProblem {
        obs,
        lambda: lambda.get(),
        opts: *opts,
        k: opts.k_init.min(opts.k_max),
        warm: None,
        warnings: Vec::new(),
        power_iters: 0,
    };
    let x0 = McPoint {
        factor: LowRankFactor::zeros(obs.nrows(), obs.ncols()),
        sigma: Some(Vector::zeros(0)),
    };
    let (x, _, trace) = run_nmapg(&mut problem, x0, cfg)?;
    Ok((x.factor, trace))
}

/// `√(‖X − O‖_F² / (m n))`.
pub fn rmse_matrix(x: &LowRankFactor, o_full: &Matrix) -> Result<f64> {
    check_dim(o_full.nrows(), x.nrows())?;
    check_dim(o_full.ncols(), x.ncols())?;
    let diff = x.to_dense() - o_full;
    Ok((diff.norm_squared() / (o_full.nrows() * o_full.ncols()) as f64).sqrt())
}

/// Root mean squared error of `X` over the entries of `reference`.
pub fn rmse_on_entries(x: &LowRankFactor, reference: &ObservedMatrix) -> Result<f64> {
    check_dim(reference.nrows(), x.nrows())?;
    check_dim(reference.ncols(), x.ncols())?;
    if reference.nnz() == 0 {
        return Err(Error::invalid("no reference entries"));
    }
    let sse: f64 = reference
        .entries()
        .iter()
        .map(|&(i, j, v)| (x.entry(i, j) - v).powi(2))
        .sum();
    Ok((sse / reference.nnz() as f64).sqrt())
}

/// Observes `⌊frac · mn⌋` entries of `full` chosen uniformly without
/// replacement (Fisher–Yates prefix), adding `N(0, noise_std²)` noise.
pub fn sample_entries<R: Rng + ?Sized>(
    full: &Matrix,
    frac: f64,
    noise_std: f64,
    rng: &mut R,
) -> Result<ObservedMatrix> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::invalid(format!("observed fraction must lie in (0, 1], got {frac}")));
    }
    let (m, n) = full.shape();
    let total = m * n;
    let count = ((frac * total as f64) + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..total).collect();
    for i in 0..count {
        let j = rng.random_range(i..total);
        idx.swap(i, j);
    }
    let entries = idx[..count]
        .iter()
        .map(|&k| {
            let (i, j) = (k / n, k % n);
            let noise = if noise_std > 0.0 {
                let e: f64 = StandardNormal.sample(rng);
                noise_std * e
            } else {
                0.0
            };
            (i, j, full[(i, j)] + noise)
        })
        .collect();
    ObservedMatrix::new(m, n, entries)
}

/// Seeded synthetic completion problem with a held-out validation split.
#[derive(Debug, Clone)]
pub struct SyntheticCompletion {
    /// Clean rank-`r` matrix with unit-variance entries.
    pub truth: Matrix,
    /// Observations used for training (noisy).
    pub train: ObservedMatrix,
    /// Withheld positions with their clean values.
    pub held_out: ObservedMatrix,
}

impl SyntheticCompletion {
    /// `truth = U Vᵀ / √rank` with Gaussian factors; `frac · mn` noisy entries
    /// are observed and the fraction `holdout` of them is withheld.
    pub fn generate(
        m: usize,
        n: usize,
        rank: usize,
        frac: f64,
        noise_std: f64,
        holdout: f64,
        seed: u64,
    ) -> Result<Self> {
        if rank == 0 || rank > m.min(n) {
            return Err(Error::invalid(format!("rank must lie in 1..={}", m.min(n))));
        }
        if !(0.0..1.0).contains(&holdout) {
            return Err(Error::invalid("holdout fraction must lie in [0, 1)"));
        }
        let mut r = rng::seeded(seed);
        let u = Matrix::from_fn(m, rank, |_, _| StandardNormal.sample(&mut r));
        let v = Matrix::from_fn(n, rank, |_, _| StandardNormal.sample(&mut r));
        let truth = (u * v.transpose()) / (rank as f64).sqrt();
        let observed = sample_entries(&truth, frac, noise_std, &mut r)?;

        // Withhold a seeded random subset of the observed entries.
        let total = observed.nnz();
        let n_hold = ((holdout * total as f64) + 1e-9).floor() as usize;
        let mut order: Vec<usize> = (0..total).collect();
        for i in 0..n_hold {
            let j = r.random_range(i..total);
            order.swap(i, j);
        }
        let mut is_held = vec![false; total];
        for &k in &order[..n_hold] {
            is_held[k] = true;
        }
        let mut train = Vec::with_capacity(total - n_hold);
        let mut held = Vec::with_capacity(n_hold);
        for (k, &(i, j, v)) in observed.entries().iter().enumerate() {
            if is_held[k] {
                held.push((i, j, truth[(i, j)]));
            } else {
                train.push((i, j, v));
            }
        }
        Ok(SyntheticCompletion {
            train: ObservedMatrix::new(m, n, train)?,
            held_out: ObservedMatrix::new(m, n, held)?,
            truth,
        })
    }
}
