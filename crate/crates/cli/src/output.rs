//! Result files shared by every subcommand.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use l12prox::solvers::SolverTrace;
use l12prox::Matrix;

pub fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

/// Formats a float with shortest round-trip precision; NaN becomes empty.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per trace record.
pub fn write_trace(path: &Path, trace: &SolverTrace) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "iteration",
        "elapsed",
        "objective",
        "accepted",
        "reference",
        "step_sq",
        "inner_iters",
        "aux_iters",
    ])?;
    for r in &trace.records {
        w.write_record([
            r.iteration.to_string(),
            num(r.elapsed),
            num(r.objective),
            opt(r.step.accepted),
            opt(r.step.reference),
            opt(r.step.step_sq),
            opt(r.step.inner_iters),
            opt(r.step.aux_iters),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: &Path, a: &Matrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    for i in 0..a.nrows() {
        w.write_record(a.row(i).iter().map(|v| num(*v)))?;
    }
    w.flush()?;
    Ok(())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Plain-text `key = value` record of a run: the command line, the resolved
/// configuration, seed, library version and wall-clock start/end times.
pub struct Manifest {
    command: &'static str,
    start: f64,
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn start(command: &'static str, seed: u64) -> Self {
        let mut m = Manifest {
            command,
            start: unix_now(),
            entries: Vec::new(),
        };
        let argv: Vec<String> = std::env::args().collect();
        m.set("command_line", argv.join(" "));
        m.set("library_version", env!("CARGO_PKG_VERSION"));
        m.set("seed", seed);
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mut text = format!("command = {}\n", self.command);
        for (k, v) in &self.entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        text.push_str(&format!("start_unix = {:.3}\n", self.start));
        text.push_str(&format!("end_unix = {:.3}\n", unix_now()));
        let path = dir.join("manifest.txt");
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

pub fn join<T: Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
