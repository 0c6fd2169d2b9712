use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use l12prox::pgm::{self, PgmFormat};
use l12prox::rng::seeded;
use l12prox::tv::{add_noise, altmin_denoise, piecewise_constant, ImageGrid, TvConfig};
use l12prox::PenaltyWeight;

use super::{as_count, synthetic_fields};
use crate::output::{csv_writer, join, num, prepare_dir, write_trace, Manifest};
use crate::{GlobalArgs, Outcome};

#[derive(Args, Debug)]
pub struct TvArgs {
    /// Clean PGM image, or `synthetic:m,n[,pieces]` for a piecewise-constant one.
    #[arg(long, default_value = "synthetic:64,64")]
    input: String,
    #[arg(long, default_value_t = 0.05)]
    noise_std: f64,
    /// Comma-separated lambda values [default: 0.02*{1,2,4,...,64}].
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Penalty parameter as a multiple of lambda.
    #[arg(long, default_value_t = 100.0)]
    mu_factor: f64,
    #[arg(long, default_value_t = 1e-8)]
    cgd_tol: f64,
    #[arg(long, default_value_t = 200)]
    cgd_max_iters: usize,
    #[arg(long, default_value_t = 100)]
    outer_iters: usize,
    /// Also write one trace CSV per lambda.
    #[arg(long)]
    traces: bool,
}

pub fn default_grid() -> Vec<f64> {
    (0..7).map(|k| 0.02 * f64::from(1u32 << k)).collect()
}

pub fn run(args: &TvArgs, global: &GlobalArgs) -> Result<Outcome> {
    let dir = &global.out_dir;
    let mut manifest = Manifest::start("tv", global.seed);
    manifest.set("input", &args.input);
    let mut rng = seeded(global.seed);

    let clean = if let Some(fields) = synthetic_fields(&args.input) {
        let f = fields?;
        let pieces = match f.len() {
            2 => 6,
            3 => as_count(f[2], "pieces")?,
            _ => bail!("expected synthetic:m,n[,pieces], got '{}'", args.input),
        };
        let (m, n) = (as_count(f[0], "m")?, as_count(f[1], "n")?);
        if m == 0 || n == 0 {
            bail!("image dimensions must be positive");
        }
        piecewise_constant(m, n, pieces, &mut rng)
    } else {
        let img = pgm::read(Path::new(&args.input)).with_context(|| format!("cannot read image {}", args.input))?;
        ImageGrid::from_matrix(&img)?
    };
    if !(args.noise_std >= 0.0) {
        bail!("noise-std must be non-negative");
    }
    if !(args.mu_factor > 0.0) {
        bail!("mu-factor must be positive");
    }
    let grid = args.lambda_grid.clone().unwrap_or_else(default_grid);
    let weights = grid
        .iter()
        .map(|&l| PenaltyWeight::new(l))
        .collect::<l12prox::Result<Vec<_>>>()?;
    prepare_dir(dir)?;
    if args.traces {
        prepare_dir(&dir.join("traces"))?;
    }

    let noisy = add_noise(&clean, args.noise_std, &mut rng);
    let noisy_rmse = noisy.rmse(&clean)?;
    pgm::write(&dir.join("clean.pgm"), &clean.to_matrix(), PgmFormat::Binary)?;
    pgm::write(&dir.join("noisy.pgm"), &noisy.to_matrix(), PgmFormat::Binary)?;

    manifest.set("rows", clean.rows());
    manifest.set("cols", clean.cols());
    manifest.set("noise_std", args.noise_std);
    manifest.set("lambda_grid", join(&grid));
    manifest.set("mu_factor", args.mu_factor);
    manifest.set("cgd_tol", args.cgd_tol);
    manifest.set("cgd_max_iters", args.cgd_max_iters);
    manifest.set("outer_iters", args.outer_iters);

    let mut w = csv_writer(&dir.join("rmse.csv"))?;
    w.write_record(["lambda", "rmse", "noisy_rmse", "iters", "converged", "final_objective", "cg_warnings"])?;
    for (i, &weight) in weights.iter().enumerate() {
        let cfg = TvConfig {
            mu: args.mu_factor * weight.get(),
            cgd_tol: args.cgd_tol,
            cgd_max_iters: args.cgd_max_iters,
            outer_iters: args.outer_iters,
            ..TvConfig::new(weight)
        };
        let start = Instant::now();
        let (x, trace) = altmin_denoise(&noisy, &cfg)?;
        let seconds = start.elapsed().as_secs_f64();
        let rmse = x.rmse(&clean)?;
        let final_objective = trace.records.last().map(|r| r.objective).unwrap_or(f64::NAN);
        w.write_record([
            num(weight.get()),
            num(rmse),
            num(noisy_rmse),
            trace.iterations.to_string(),
            trace.converged.to_string(),
            num(final_objective),
            trace.warnings.len().to_string(),
        ])?;
        manifest.set(&format!("seconds_lambda{i}"), seconds);
        pgm::write(&dir.join(format!("denoised_lambda{i}.pgm")), &x.to_matrix(), PgmFormat::Binary)?;
        if args.traces {
            write_trace(&dir.join("traces").join(format!("tv_lambda{i}.csv")), &trace)?;
        }
        if !global.quiet {
            eprintln!(
                "tv: lambda {}: rmse {rmse:.5} (noisy {noisy_rmse:.5}) after {} outer iterations",
                weight.get(),
                trace.iterations
            );
        }
    }
    w.flush()?;
    manifest.write(dir)?;
    Ok(Outcome::Success)
}
