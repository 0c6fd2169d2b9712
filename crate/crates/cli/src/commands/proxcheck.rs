use anyhow::Result;
use clap::Args;
use l12prox::oracle::run_prox_checks;

use crate::output::{csv_writer, join, num, prepare_dir, Manifest};
use crate::{GlobalArgs, Outcome};

#[derive(Args, Debug)]
pub struct ProxcheckArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Comma-separated dimensions to cycle through (each 1, 2 or 3).
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    dims: Vec<usize>,
    /// Offset added to the closed-form output, to confirm failures are caught.
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb: f64,
}

pub fn run(args: &ProxcheckArgs, global: &GlobalArgs) -> Result<Outcome> {
    let report = run_prox_checks(args.trials, &args.dims, global.seed, args.perturb)?;
    let dir = &global.out_dir;
    prepare_dir(dir)?;

    let mut w = csv_writer(&dir.join("proxcheck.csv"))?;
    w.write_record([
        "trials",
        "passed",
        "failed",
        "grid_below",
        "grid_above",
        "numerical_mismatch",
        "max_numerical_diff",
    ])?;
    w.write_record([
        report.trials.to_string(),
        report.passed().to_string(),
        report.failed().to_string(),
        report.grid_below.to_string(),
        report.grid_above.to_string(),
        report.numerical_mismatch.to_string(),
        num(report.max_numerical_diff),
    ])?;
    w.flush()?;

    let mut manifest = Manifest::start("proxcheck", global.seed);
    manifest.set("trials", args.trials);
    manifest.set("dims", join(&args.dims));
    if args.perturb != 0.0 {
        manifest.set("perturb", args.perturb);
    }
    manifest.write(dir)?;

    println!("proxcheck: {} checks, {} passed, {} failed", report.trials, report.passed(), report.failed());
    if !global.quiet {
        for f in report.failures.iter().take(10) {
            println!("  {f}");
        }
        if report.failures.len() > 10 {
            println!("  ... {} more", report.failures.len() - 10);
        }
    }
    Ok(if report.failed() == 0 { Outcome::Success } else { Outcome::CheckFailed })
}
