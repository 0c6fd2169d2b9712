#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_l12prox"))
}

/// Runs the binary with `--out-dir dir --quiet` prepended to `args`.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.arg("--out-dir").arg(dir).arg("--quiet").args(args);
    cmd.output().expect("binary runs")
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

/// Every CSV directly in `dir`, sorted by name.
pub fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    out.sort();
    out
}

/// File contents with wall-clock measurements blanked: the `seconds`
/// column of `results.csv` and the `seconds` metric rows of `summary.csv`.
pub fn without_timings(path: &Path) -> String {
    let rows = read_csv(path);
    let name = path.file_name().unwrap().to_string_lossy().to_string();
    let header = rows.first().cloned().unwrap_or_default();
    let seconds_col = header.iter().position(|h| h == "seconds");
    let metric_col = header.iter().position(|h| h == "metric");
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        if i > 0 && name == "summary.csv" && metric_col.is_some_and(|c| row[c] == "seconds") {
            continue;
        }
        let cells: Vec<&str> = row
            .iter()
            .enumerate()
            .map(|(j, v)| if i > 0 && Some(j) == seconds_col { "-" } else { v.as_str() })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Runs `args` twice in fresh directories and lists every result CSV whose
/// timing-free contents differ. Raw bytes are compared for files without
/// timing columns.
pub fn determinism_mismatches(root: &Path, label: &str, args: &[&str]) -> Vec<String> {
    let a = root.join(format!("{label}-a"));
    let b = root.join(format!("{label}-b"));
    for d in [&a, &b] {
        let out = run_in(d, args);
        assert!(out.status.success(), "{label}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let files_a = csv_files(&a);
    let files_b = csv_files(&b);
    let mut bad = Vec::new();
    if files_a.iter().map(|p| p.file_name()).ne(files_b.iter().map(|p| p.file_name())) {
        bad.push(format!("{label}: different file sets"));
        return bad;
    }
    for (pa, pb) in files_a.iter().zip(&files_b) {
        let name = pa.file_name().unwrap().to_string_lossy().to_string();
        let same = if name == "results.csv" || name == "summary.csv" {
            without_timings(pa) == without_timings(pb)
        } else {
            fs::read(pa).unwrap() == fs::read(pb).unwrap()
        };
        if !same {
            bad.push(format!("{label}: {name}"));
        }
    }
    bad
}
