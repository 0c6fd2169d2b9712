use anyhow::Result;
use clap::Args;
use l12prox::cs::{default_lambda_grid, run_cs_experiment_with, CsConfig, CsSolver};

use crate::output::{csv_writer, join, num, prepare_dir, write_trace, Manifest};
use crate::{GlobalArgs, Outcome};

#[derive(Args, Debug)]
pub struct CsArgs {
    /// Number of measurements (the signal has 4d entries).
    #[arg(long, default_value_t = 500)]
    d: usize,
    /// Comma-separated lambda values [default: 0.01*0.25^i, i=0..4].
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Comma-separated subset of dca, scp, nmapg-numerical, nmapg-closed, fista-l1.
    #[arg(long, value_delimiter = ',', value_parser = parse_solver)]
    solvers: Option<Vec<CsSolver>>,
    /// Also write one trace CSV per run under traces/.
    #[arg(long)]
    traces: bool,
    /// Standard deviation of the measurement noise.
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    /// Fraction of nonzero signal entries.
    #[arg(long, default_value_t = 0.05)]
    sparsity: f64,
    /// Iteration budget per run (outer iterations for DCA).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative stopping tolerance on the iterate change.
    #[arg(long)]
    tol: Option<f64>,
}

fn parse_solver(s: &str) -> std::result::Result<CsSolver, String> {
    CsSolver::parse(s).map_err(|e| e.to_string())
}

pub fn run(args: &CsArgs, global: &GlobalArgs) -> Result<Outcome> {
    let mut cfg = CsConfig {
        d: args.d,
        sparsity: args.sparsity,
        noise_std: args.noise_std,
        lambda_grid: args.lambda_grid.clone().unwrap_or_else(default_lambda_grid),
        repeats: args.repeats,
        seed: global.seed,
        ..CsConfig::default()
    };
    if let Some(m) = args.max_iters {
        cfg.solver.max_iters = m;
    }
    if let Some(t) = args.tol {
        cfg.solver.tol = t;
    }
    cfg.solver.record_trace = args.traces;
    cfg.validate()?;
    let solvers = args.solvers.clone().unwrap_or_else(|| CsSolver::ALL.to_vec());

    let dir = &global.out_dir;
    prepare_dir(dir)?;
    let mut manifest = Manifest::start("cs", global.seed);
    manifest.set("d", cfg.d);
    manifest.set("signal_length", 4 * cfg.d);
    manifest.set("sparsity", cfg.sparsity);
    manifest.set("nonzeros", cfg.nonzeros());
    manifest.set("noise_std", cfg.noise_std);
    manifest.set("lambda_grid", join(&cfg.lambda_grid));
    manifest.set("repeats", cfg.repeats);
    manifest.set("solvers", join(&solvers));
    manifest.set("max_iters", cfg.solver.max_iters);
    manifest.set("tol", cfg.solver.tol);
    manifest.set("dca_inner_max_iters", cfg.dca_inner.max_iters);
    manifest.set("dca_inner_tol", cfg.dca_inner.tol);
    manifest.set("numerical_prox_max_iters", cfg.numerical_prox.max_iters);
    manifest.set("numerical_prox_tol", cfg.numerical_prox.tol);

    if args.traces {
        prepare_dir(&dir.join("traces"))?;
    }
    let quiet = global.quiet;
    let mut trace_error = None;
    let results = run_cs_experiment_with(&cfg, &solvers, |r| {
        if !quiet {
            eprintln!(
                "cs: repeat {} lambda {} {}: rmse {:.4} in {:.2}s ({} iters){}",
                r.repeat,
                r.lambda,
                r.solver,
                r.rmse,
                r.seconds,
                r.iters,
                r.failure.as_deref().map(|f| format!(" FAILED: {f}")).unwrap_or_default()
            );
        }
        if let Some(trace) = &r.trace {
            let name = format!("{}_lambda{}_repeat{}.csv", r.solver, r.lambda_index, r.repeat);
            if let Err(e) = write_trace(&dir.join("traces").join(name), trace) {
                trace_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = trace_error {
        return Err(e);
    }

    let mut w = csv_writer(&dir.join("results.csv"))?;
    w.write_record(["solver", "lambda", "repeat", "rmse", "seconds", "iters", "final_objective"])?;
    for r in &results.runs {
        w.write_record([
            r.solver.to_string(),
            num(r.lambda),
            r.repeat.to_string(),
            num(r.rmse),
            num(r.seconds),
            r.iters.to_string(),
            num(r.final_objective),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("summary.csv"))?;
    w.write_record(["solver", "lambda_index", "lambda", "metric", "mean", "std", "repeats", "failures"])?;
    for c in results.summary() {
        let failures = results.cell(c.solver, c.lambda_index).filter(|r| r.failure.is_some()).count();
        w.write_record([
            c.solver.to_string(),
            c.lambda_index.to_string(),
            num(c.lambda),
            c.metric.to_string(),
            num(c.mean),
            num(c.std),
            c.repeats.to_string(),
            failures.to_string(),
        ])?;
    }
    w.flush()?;

    let failed: Vec<_> = results.runs.iter().filter(|r| r.failure.is_some()).collect();
    manifest.set("failed_runs", failed.len());
    for r in &failed {
        manifest.set(
            "failure",
            format!("{} lambda {} repeat {}: {}", r.solver, r.lambda, r.repeat, r.failure.as_deref().unwrap_or("")),
        );
    }
    manifest.write(dir)?;
    if !quiet {
        eprintln!("cs: wrote {}", dir.join("results.csv").display());
    }
    Ok(Outcome::Success)
}
