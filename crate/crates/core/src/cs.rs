//! Compressed sensing with an oversampled cosine dictionary.
//!
//! Instances follow `y = A x̃ + ε` with `A ∈ R^{d×4d}`,
//! `A_{ki} = cos(2 i π ε_{ki} / 20) / √d` (columns `i = 1..4d`, one uniform
//! `ε_{ki}` per entry), a sparse `x̃` with Gaussian nonzeros, and Gaussian
//! measurement noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::prox::PenaltyWeight;
use crate::rng;
use crate::solvers::{
    self, InnerConfig, L12Closed, L12Numerical, L1Norm, LeastSquares, SolverConfig,
    SolverOutput, SolverTrace,
};
use crate::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct CsConfig {
    /// Number of measurements; the signal has `4d` entries.
    pub d: usize,
    /// Fraction of nonzero signal entries.
    pub sparsity: f64,
    pub noise_std: f64,
    pub lambda_grid: Vec<f64>,
    pub repeats: usize,
    /// Instance for repeat `r` is drawn with seed `seed + r`.
    pub seed: u64,
    /// Stopping rule and budget shared by every solver (outer loop for DCA).
    pub solver: SolverConfig,
    pub dca_inner: InnerConfig,
    pub numerical_prox: L12Numerical,
}

impl Default for CsConfig {
    fn default() -> Self {
        CsConfig {
            d: 500,
            sparsity: 0.05,
            noise_std: 0.1,
            lambda_grid: default_lambda_grid(),
            repeats: 10,
            seed: 42,
            solver: SolverConfig {
                max_iters: 3000,
                tol: 1e-8,
                record_trace: false,
                ..SolverConfig::default()
            },
            dca_inner: InnerConfig::default(),
            numerical_prox: L12Numerical::default(),
        }
    }
}

/// `0.01 · 0.25^i` for `i = 0..=4`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..5).map(|i| 0.01 * 0.25f64.powi(i)).collect()
}

impl CsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d must be at least 1"));
        }
        if !(self.sparsity > 0.0 && self.sparsity < 1.0) {
            return Err(Error::invalid(format!("sparsity must lie in (0, 1), got {}", self.sparsity)));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::invalid(format!("noise_std must be ≥ 0, got {}", self.noise_std)));
        }
        for &l in &self.lambda_grid {
            PenaltyWeight::new(l)?;
        }
        self.solver.validate()
    }

    /// Number of nonzeros in `x̃`: `⌊sparsity · 4d⌋`.
    pub fn nonzeros(&self) -> usize {
        // The epsilon keeps products like 0.05 · 2000 from rounding below an integer.
        ((self.sparsity * (4 * self.d) as f64) + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone)]
pub struct CsInstance {
    pub a: Matrix,
    pub y: Vector,
    pub x_true: Vector,
    pub seed: u64,
}

/// `d × 4d` dictionary, filled column by column (1-based column index `i`
/// in the cosine), rows within a column in order.
pub fn gen_dct_dictionary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    let n = 4 * d;
    let scale = 1.0 / (d as f64).sqrt();
    let mut a = Matrix::zeros(d, n);
    for col in 0..n {
        let i = (col + 1) as f64;
        for row in 0..d {
            let eps: f64 = rng.random();
            a[(row, col)] = scale * (2.0 * i * PI * eps / 20.0).cos();
        }
    }
    a
}

/// Draws `A`, then the support (prefix of a Fisher–Yates shuffle), then the
/// nonzero values, then the noise, all from one stream seeded with `seed`.
pub fn gen_instance(cfg: &CsConfig, seed: u64) -> Result<CsInstance> {
    cfg.validate()?;
    let mut r = rng::seeded(seed);
    let a = gen_dct_dictionary(cfg.d, &mut r);
    let n = a.ncols();
    let k = cfg.nonzeros();

    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = r.random_range(i..n);
        perm.swap(i, j);
    }
    let mut x_true = Vector::zeros(n);
    for &idx in &perm[..k.min(n)] {
        x_true[idx] = StandardNormal.sample(&mut r);
    }
    let mut y = &a * &x_true;
    if cfg.noise_std > 0.0 {
        for v in y.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut r);
            *v += cfg.noise_std * e;
        }
    }
    Ok(CsInstance { a, y, x_true, seed })
}

/// Smooth loss `½‖A x − y‖²`, with `L` estimated by power iteration.
pub fn cs_objective(a: &Matrix, y: &Vector) -> Result<LeastSquares> {
    check_dim(a.nrows(), y.len())?;
    LeastSquares::new(a.clone(), y.clone())
}

/// `‖x − x̃‖₂ / ‖x̃‖₂`.
pub fn rmse_normalized(x: &Vector, x_true: &Vector) -> Result<f64> {
    check_dim(x_true.len(), x.len())?;
    let denom = x_true.norm();
    if denom == 0.0 {
        return Err(Error::invalid("reference signal is zero"));
    }
    Ok((x - x_true).norm() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CsSolver {
    Dca,
    Scp,
    NmApgNumerical,
    NmApgClosed,
    FistaL1,
}

impl CsSolver {
    pub const ALL: [CsSolver; 5] = [
        CsSolver::Dca,
        CsSolver::Scp,
        CsSolver::NmApgNumerical,
        CsSolver::NmApgClosed,
        CsSolver::FistaL1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CsSolver::Dca => "dca",
            CsSolver::Scp => "scp",
            CsSolver::NmApgNumerical => "nmapg-numerical",
            CsSolver::NmApgClosed => "nmapg-closed",
            CsSolver::FistaL1 => "fista-l1",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        CsSolver::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown solver '{name}'")))
    }

    /// Runs this solver from `x = 0`.
    pub fn solve(self, f: &LeastSquares, lambda: PenaltyWeight, cfg: &CsConfig) -> Result<SolverOutput> {
        let x0 = Vector::zeros(f.matrix().ncols());
        let sc = &cfg.solver;
        match self {
            CsSolver::Dca => solvers::solve_dca(f, lambda, &x0, sc, &cfg.dca_inner),
            CsSolver::Scp => solvers::solve_scp(f, lambda, &x0, sc),
            CsSolver::NmApgNumerical => {
                solvers::solve_nmapg(f, &cfg.numerical_prox, lambda, &x0, sc)
            }
            CsSolver::NmApgClosed => solvers::solve_nmapg(f, &L12Closed, lambda, &x0, sc),
            CsSolver::FistaL1 => solvers::solve_fista(f, &L1Norm, lambda, &x0, sc),
        }
    }
}

impl std::fmt::Display for CsSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One `(solver, λ, repeat)` cell.
#[derive(Debug, Clone)]
pub struct CsRun {
    pub solver: CsSolver,
    pub lambda_index: usize,
    pub lambda: f64,
    pub repeat: usize,
    pub rmse: f64,
    /// Solver wall time excluding objective evaluations done only for the trace.
    pub seconds: f64,
    pub iters: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Set when the solver failed; metrics are NaN in that case.
    pub failure: Option<String>,
    pub trace: Option<SolverTrace>,
}

#[derive(Debug, Clone)]
pub struct CsResults {
    pub runs: Vec<CsRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub solver: CsSolver,
    pub lambda_index: usize,
    pub lambda: f64,
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl CsResults {
    pub fn cell(&self, solver: CsSolver, lambda_index: usize) -> impl Iterator<Item = &CsRun> {
        self.runs
            .iter()
            .filter(move |r| r.solver == solver && r.lambda_index == lambda_index)
    }

    pub fn values(&self, solver: CsSolver, lambda_index: usize, metric: fn(&CsRun) -> f64) -> Vec<f64> {
        self.cell(solver, lambda_index)
            .filter(|r| r.failure.is_none())
            .map(metric)
            .collect()
    }

    /// Mean ± std per `(solver, λ)` for rmse, seconds, iters and final objective,
    /// in solver-major, then λ order. Failed runs are left out.
    pub fn summary(&self) -> Vec<CellSummary> {
        let mut cells: Vec<(CsSolver, usize, f64)> = Vec::new();
        for r in &self.runs {
            if !cells.iter().any(|c| c.0 == r.solver && c.1 == r.lambda_index) {
                cells.push((r.solver, r.lambda_index, r.lambda));
            }
        }
        cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let metrics: [(&'static str, fn(&CsRun) -> f64); 4] = [
            ("rmse", |r| r.rmse),
            ("seconds", |r| r.seconds),
            ("iters", |r| r.iters as f64),
            ("final_objective", |r| r.final_objective),
        ];
        let mut out = Vec::new();
        for (solver, li, lambda) in cells {
            for (metric, get) in metrics {
                let vals = self.values(solver, li, get);
                let (mean, std) = mean_std(&vals);
                out.push(CellSummary {
                    solver,
                    lambda_index: li,
                    lambda,
                    metric,
                    mean,
                    std,
                    repeats: vals.len(),
                });
            }
        }
        out
    }
}

/// Runs every `(repeat, λ, solver)` cell sequentially.
///
/// All solvers and λ values of a repeat share one instance and one Lipschitz
/// estimate. A failing solver is recorded in its cell and does not stop the
/// experiment.
pub fn run_cs_experiment(cfg: &CsConfig, solvers: &[CsSolver]) -> Result<CsResults> {
    run_cs_experiment_with(cfg, solvers, |_| {})
}

/// Like [`run_cs_experiment`], calling `progress` after every finished cell.
pub fn run_cs_experiment_with(
    cfg: &CsConfig,
    solvers: &[CsSolver],
    mut progress: impl FnMut(&CsRun),
) -> Result<CsResults> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for repeat in 0..cfg.repeats {
        let inst = gen_instance(cfg, rng::derive_seed(cfg.seed, repeat as u64))?;
        let f = cs_objective(&inst.a, &inst.y)?;
        for (lambda_index, &lambda) in cfg.lambda_grid.iter().enumerate() {
            let weight = PenaltyWeight::new(lambda)?;
            for &solver in solvers {
                let run = match solver.solve(&f, weight, cfg) {
                    Ok(out) => CsRun {
                        solver,
                        lambda_index,
                        lambda,
                        repeat,
                        rmse: rmse_normalized(&out.x, &inst.x_true)?,
                        seconds: (out.trace.elapsed - out.trace.reporting_seconds).max(0.0),
                        iters: out.trace.iterations,
                        final_objective: out.objective,
                        converged: out.trace.converged,
                        failure: None,
                        trace: cfg.solver.record_trace.then_some(out.trace),
                    },
                    Err(e) => CsRun {
                        solver,
                        lambda_index,
                        lambda,
                        repeat,
                        rmse: f64::NAN,
                        seconds: f64::NAN,
                        iters: 0,
                        final_objective: f64::NAN,
                        converged: false,
                        failure: Some(e.to_string()),
                        trace: None,
                    },
                };
                progress(&run);
                runs.push(run);
            }
        }
    }
    Ok(CsResults { runs })
}
