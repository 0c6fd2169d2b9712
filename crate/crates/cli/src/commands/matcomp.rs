use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use l12prox::matcomp::{
    default_lambda, rmse_matrix, rmse_on_entries, sample_entries, solve_mc_nmapg, ObservedMatrix,
    SyntheticCompletion,
};
use l12prox::pgm::{self, PgmFormat};
use l12prox::rng::seeded;
use l12prox::solvers::SolverConfig;
use l12prox::{Matrix, PenaltyWeight};

use super::{as_count, synthetic_fields};
use crate::output::{csv_writer, num, prepare_dir, write_matrix_csv, write_trace, Manifest};
use crate::{GlobalArgs, Outcome};

#[derive(Args, Debug)]
pub struct MatcompArgs {
    /// PGM image, observation CSV, or `synthetic:m,n,rank,frac,noise`.
    #[arg(long, default_value = "synthetic:200,300,5,0.3,0.01")]
    input: String,
    /// Regularization weight [default: 0.1 * max |observed entry|].
    #[arg(long)]
    lambda: Option<f64>,
    /// Largest rank the partial SVD may use.
    #[arg(long, default_value_t = 100)]
    k_max: usize,
    /// Fraction of pixels observed for image input.
    #[arg(long, default_value_t = 0.5)]
    sample_frac: f64,
    #[arg(long, default_value_t = 10000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Also write the solver trace.
    #[arg(long)]
    traces: bool,
}

enum Source {
    Synthetic(SyntheticCompletion),
    Image(Matrix),
    Observations,
}

pub fn run(args: &MatcompArgs, global: &GlobalArgs) -> Result<Outcome> {
    let dir = &global.out_dir;
    let mut manifest = Manifest::start("matcomp", global.seed);
    manifest.set("input", &args.input);

    let (obs, source) = if let Some(fields) = synthetic_fields(&args.input) {
        let f = fields?;
        if f.len() != 5 {
            bail!("expected synthetic:m,n,rank,frac,noise, got '{}'", args.input);
        }
        let s = SyntheticCompletion::generate(
            as_count(f[0], "m")?,
            as_count(f[1], "n")?,
            as_count(f[2], "rank")?,
            f[3],
            f[4],
            0.1,
            global.seed,
        )?;
        manifest.set("held_out_fraction", 0.1);
        (s.train.clone(), Source::Synthetic(s))
    } else if args.input.ends_with(".csv") {
        let obs = ObservedMatrix::load(Path::new(&args.input))
            .with_context(|| format!("cannot read observations from {}", args.input))?;
        (obs, Source::Observations)
    } else {
        let img = pgm::read(Path::new(&args.input)).with_context(|| format!("cannot read image {}", args.input))?;
        let obs = sample_entries(&img, args.sample_frac, 0.0, &mut seeded(global.seed))?;
        manifest.set("sample_frac", args.sample_frac);
        (obs, Source::Image(img))
    };
    prepare_dir(dir)?;

    let lambda = args.lambda.unwrap_or_else(|| default_lambda(&obs));
    let weight = PenaltyWeight::new(lambda)?;
    let cfg = SolverConfig {
        max_iters: args.max_iters,
        tol: args.tol,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    manifest.set("rows", obs.nrows());
    manifest.set("cols", obs.ncols());
    manifest.set("observed", obs.nnz());
    manifest.set("lambda", lambda);
    manifest.set("k_max", args.k_max);
    manifest.set("max_iters", cfg.max_iters);
    manifest.set("tol", cfg.tol);

    let start = Instant::now();
    let (x, trace) = solve_mc_nmapg(&obs, weight, args.k_max, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    manifest.set("seconds", seconds);
    for w in &trace.warnings {
        manifest.set("warning", w);
    }

    let (rmse, held_out) = match &source {
        Source::Synthetic(s) => (rmse_matrix(&x, &s.truth)?, rmse_on_entries(&x, &s.held_out)?),
        Source::Image(img) => (rmse_matrix(&x, img)?, f64::NAN),
        Source::Observations => (f64::NAN, f64::NAN),
    };
    let train_rmse = rmse_on_entries(&x, &obs)?;

    let mut w = csv_writer(&dir.join("metrics.csv"))?;
    w.write_record([
        "input", "m", "n", "observed", "lambda", "rank", "iters", "converged", "train_rmse", "rmse",
        "held_out_rmse",
    ])?;
    w.write_record([
        args.input.clone(),
        obs.nrows().to_string(),
        obs.ncols().to_string(),
        obs.nnz().to_string(),
        num(lambda),
        x.rank().to_string(),
        trace.iterations.to_string(),
        trace.converged.to_string(),
        num(train_rmse),
        num(rmse),
        num(held_out),
    ])?;
    w.flush()?;

    match &source {
        Source::Image(_) => {
            pgm::write(&dir.join("recovered.pgm"), &x.to_dense(), PgmFormat::Binary)?;
        }
        _ => {
            write_matrix_csv(&dir.join("factor_u.csv"), &x.u)?;
            write_matrix_csv(&dir.join("factor_v.csv"), &x.v)?;
        }
    }
    obs.save(&dir.join("observations.csv"))?;
    if args.traces {
        write_trace(&dir.join("trace.csv"), &trace)?;
    }
    manifest.write(dir)?;
    if !global.quiet {
        eprintln!(
            "matcomp: rank {} after {} iterations ({:.2}s), rmse {}, held-out rmse {}",
            x.rank(),
            trace.iterations,
            seconds,
            num(rmse),
            num(held_out)
        );
    }
    Ok(Outcome::Success)
}
