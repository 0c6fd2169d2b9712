pub mod cs;
pub mod matcomp;
pub mod proxcheck;
pub mod tv;

use anyhow::{bail, Context, Result};

/// Splits `synthetic:a,b,...` into its numeric fields.
pub fn synthetic_fields(input: &str) -> Option<Result<Vec<f64>>> {
    let rest = input.strip_prefix("synthetic:")?;
    Some(
        rest.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number '{s}' in '{input}'"))
            })
            .collect(),
    )
}

pub fn as_count(v: f64, what: &str) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        bail!("{what} must be a non-negative integer, got {v}");
    }
    Ok(v as usize)
}
