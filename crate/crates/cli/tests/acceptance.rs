//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (uncaptured) and to `acceptance.txt` in the test temp directory.
//! The tests hold a shared lock so timing comparisons never overlap.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use l12prox::cs::{cs_objective, gen_instance, median, run_cs_experiment, CsConfig, CsResults, CsSolver};
use l12prox::linalg::{partial_svd, PowerOptions};
use l12prox::matcomp::{
    default_lambda, mc_objective, rmse_on_entries, sample_entries, solve_mc_nmapg, LowRankFactor,
    ObservedMatrix, SyntheticCompletion,
};
use l12prox::oracle::run_prox_checks;
use l12prox::prox::{prox_l12, prox_l12_numerical_run, prox_nuc_minus_frob};
use l12prox::rng::seeded;
use l12prox::solvers::{
    solve_nmapg, solve_pg, solve_scp, L12Closed, Regularizer, SmoothObjective, SolverConfig,
    SquaredDistance,
};
use l12prox::tv::{add_noise, altmin_denoise, piecewise_constant, TvConfig};
use l12prox::{Matrix, PenaltyWeight, ThinSvd, Vector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn w(l: f64) -> PenaltyWeight {
    PenaltyWeight::new(l).unwrap()
}

fn report(name: &str, pass: bool, detail: String) {
    let line = format!("acceptance {}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr(), "{line}");
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance.txt");
    if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(path) {
        let _ = writeln!(f, "{line}");
    }
    assert!(pass, "{line}");
}

fn gaussian(m: usize, n: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

#[test]
fn prox_oracle_equivalence() {
    let _g = serial();
    let t = Instant::now();
    let r = run_prox_checks(1000, &[1, 2, 3], 2024, 0.0).unwrap();
    let secs = t.elapsed().as_secs_f64();
    report(
        "prox oracle equivalence",
        r.failed() == 0 && secs < 120.0,
        format!(
            "{} trials, {} grid violations, {} numerical mismatches (max diff {:.2e}), {secs:.1}s",
            r.trials,
            r.grid_below + r.grid_above,
            r.numerical_mismatch,
            r.max_numerical_diff
        ),
    );
}

#[test]
fn prox_lemma_suite() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = seeded(77);
    let cases = 2000;
    let mut failures = [0usize; 6];
    let random_z = |rng: &mut l12prox::rng::Rng| {
        let d = rng.random_range(1..10);
        Vector::from_fn(d, |_, _| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random_range(-5.0..5.0) })
    };
    for _ in 0..cases {
        let z = random_z(&mut rng);
        let lambda = rng.random_range(0.0..4.0);
        let x = prox_l12(&z, w(lambda)).unwrap();

        // zero characterization
        if x.iter().all(|&v| v == 0.0) != z.iter().all(|&v| v == 0.0) {
            failures[0] += 1;
        }
        // sign preservation
        if x.iter().zip(z.iter()).any(|(a, b)| *a != 0.0 && a.signum() != b.signum()) {
            failures[1] += 1;
        }
        // positive homogeneity
        let c = 10f64.powf(rng.random_range(-2.0..2.0));
        let scaled = prox_l12(&(&z * c), w(c * lambda)).unwrap();
        if (scaled - &x * c).norm() > 1e-12 * (1.0 + c * x.norm()) {
            failures[2] += 1;
        }
        // permutation equivariance (distinct magnitudes so ties cannot differ)
        let zd = Vector::from_fn(z.len(), |i, _| z[i] + 1e-6 * i as f64);
        let xd = prox_l12(&zd, w(lambda)).unwrap();
        let d = zd.len();
        let mut perm: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let pz = Vector::from_fn(d, |i, _| zd[perm[i]]);
        let px = prox_l12(&pz, w(lambda)).unwrap();
        if (0..d).any(|i| (px[i] - xd[perm[i]]).abs() > 1e-12 * (1.0 + xd.norm())) {
            failures[3] += 1;
        }
        // one-sparse fixed point
        let mut one = Vector::zeros(d);
        one[rng.random_range(0..d)] = rng.random_range(-5.0..5.0);
        if (prox_l12(&one, w(lambda)).unwrap() - &one).norm() > 1e-14 * one.norm() {
            failures[4] += 1;
        }
        // branch continuity at λ → max|z|⁻
        let zc = Vector::from_fn(d.max(2), |_, _| rng.random_range(-5.0..5.0));
        let mut mags: Vec<f64> = zc.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        if mags[0] - mags[1] > 1e-3 {
            let eps = 1e-9;
            let below = prox_l12(&zc, w(mags[0] - eps)).unwrap();
            let at = prox_l12(&zc, w(mags[0])).unwrap();
            if (below - at).norm() > 10.0 * eps {
                failures[5] += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let names = ["zero", "sign", "homogeneity", "permutation", "one-sparse", "continuity"];
    let detail = names
        .iter()
        .zip(failures)
        .map(|(n, f)| format!("{n} {f}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        "prox lemma suite",
        failures.iter().all(|&f| f == 0) && secs < 30.0,
        format!("{cases} cases each; failures: {detail}; {secs:.1}s"),
    );
}

#[test]
fn matrix_prox_agreement() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = seeded(3);
    let opts = PowerOptions { max_iters: 300, tol: 1e-10, ..PowerOptions::default() };
    let (mut worst_partial, mut worst_orth) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let m = rng.random_range(2..=50);
        let n = rng.random_range(2..=70);
        let r = rng.random_range(1..=m.min(n).min(5));
        let a = gaussian(m, r, &mut rng) * gaussian(r, n, &mut rng) * 2.0 + gaussian(m, n, &mut rng) * 0.05;
        let dense = ThinSvd::from_dense(&a);
        let next = if r < dense.sigma.len() { dense.sigma[r] } else { 0.0 };
        let lambda = 0.5 * (dense.sigma[r - 1] + next);
        let reference = prox_nuc_minus_frob(&dense, w(lambda)).unwrap().to_dense();
        let k = (r + 1).min(m.min(n));
        let part = partial_svd(&a, k, None, &opts).unwrap();
        let ours = prox_nuc_minus_frob(&part.svd, w(lambda)).unwrap().to_dense();
        worst_partial = worst_partial.max((ours - &reference).norm());

        let q = gaussian(m, m, &mut rng).qr().q();
        let p = gaussian(n, n, &mut rng).qr().q();
        let rotated = prox_nuc_minus_frob(&ThinSvd::from_dense(&(&q * &a * p.transpose())), w(lambda))
            .unwrap()
            .to_dense();
        worst_orth = worst_orth.max((rotated - &q * &reference * p.transpose()).norm());
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        "matrix prox",
        worst_partial <= 1e-6 && worst_orth <= 1e-8 && secs < 60.0,
        format!("100 matrices: partial-vs-dense max {worst_partial:.2e}, orthogonal invariance max {worst_orth:.2e}, {secs:.1}s"),
    );
}

/// nmAPG-closed and FISTA-ℓ1 over the default compressed-sensing setup,
/// shared with the timing check.
fn cs_default_results() -> &'static (CsResults, f64) {
    static CELL: OnceLock<(CsResults, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let res = run_cs_experiment(&CsConfig::default(), &[CsSolver::NmApgClosed, CsSolver::FistaL1]).unwrap();
        (res, t.elapsed().as_secs_f64())
    })
}

#[test]
fn cs_rmse() {
    let _g = serial();
    let (res, secs) = cs_default_results();
    let grid_len = CsConfig::default().lambda_grid.len();
    let mean = |s, i| {
        let v = res.values(s, i, |r| r.rmse);
        v.iter().sum::<f64>() / v.len() as f64
    };
    let at2 = mean(CsSolver::NmApgClosed, 2);
    let in_band = (0.025..=0.055).contains(&at2);
    let per_lambda: Vec<String> = (0..grid_len)
        .map(|i| format!("i={i} {:.4}/{:.4}", mean(CsSolver::NmApgClosed, i), mean(CsSolver::FistaL1, i)))
        .collect();
    let below = (0..grid_len).all(|i| mean(CsSolver::NmApgClosed, i) < mean(CsSolver::FistaL1, i));
    report(
        "cs rmse",
        in_band && below,
        format!(
            "nmapg-closed mean rmse at i=2 {at2:.4} (band [0.025, 0.055]: {}); closed/fista per lambda: {}; closed below fista everywhere: {below}; {secs:.0}s",
            if in_band { "inside" } else { "outside" },
            per_lambda.join(", ")
        ),
    );
}

#[test]
fn cs_timing_order() {
    let _g = serial();
    let (base, _) = cs_default_results();
    let defaults = CsConfig::default();
    let last = defaults.lambda_grid.len() - 1;

    // Closed and numerical prox back to back on the same instances.
    let pair_cfg = CsConfig { repeats: 5, lambda_grid: vec![defaults.lambda_grid[last]], ..defaults.clone() };
    let pair = run_cs_experiment(&pair_cfg, &[CsSolver::NmApgClosed, CsSolver::NmApgNumerical]).unwrap();
    let closed = median(&pair.values(CsSolver::NmApgClosed, 0, |r| r.seconds));
    let numerical = median(&pair.values(CsSolver::NmApgNumerical, 0, |r| r.seconds));

    let dca_cfg = CsConfig { repeats: 5, ..defaults.clone() };
    let dca = run_cs_experiment(&dca_cfg, &[CsSolver::Dca]).unwrap();
    let mut dca_ok = true;
    let mut cells = Vec::new();
    for i in 0..defaults.lambda_grid.len() {
        let c: Vec<f64> = base.cell(CsSolver::NmApgClosed, i).filter(|r| r.repeat < 5).map(|r| r.seconds).collect();
        let (mc, md) = (median(&c), median(&dca.values(CsSolver::Dca, i, |r| r.seconds)));
        dca_ok &= mc < md;
        cells.push(format!("i={i} {mc:.2}s/{md:.2}s"));
    }
    report(
        "cs timing order",
        closed < numerical && dca_ok,
        format!(
            "median at i={last}: closed {closed:.3}s vs numerical {numerical:.3}s; closed/dca medians: {}",
            cells.join(", ")
        ),
    );
}

#[test]
fn solver_descent_properties() {
    let _g = serial();
    let cfg_cs = CsConfig { d: 50, ..CsConfig::default() };
    let mut worst_pg = f64::NEG_INFINITY;
    let mut worst_scp = f64::NEG_INFINITY;
    let mut nm_violations = 0;
    let mut nm_accepted = 0;
    for seed in 0..5 {
        let inst = gen_instance(&cfg_cs, seed).unwrap();
        let f = cs_objective(&inst.a, &inst.y).unwrap();
        let lambda = cfg_cs.lambda_grid[(seed as usize) % cfg_cs.lambda_grid.len()];
        let x0 = Vector::zeros(f.dim());
        let cfg = SolverConfig { max_iters: 3000, record_iterates: true, ..SolverConfig::default() };
        worst_pg = worst_pg.max(solve_pg(&f, &L12Closed, w(lambda), &x0, &cfg).unwrap().trace.max_increase());
        worst_scp = worst_scp.max(solve_scp(&f, w(lambda), &x0, &cfg).unwrap().trace.max_increase());
        let nm = solve_nmapg(&f, &L12Closed, w(lambda), &x0, &cfg).unwrap();
        for (rec, x) in nm.trace.records[1..].iter().zip(&nm.trace.iterates) {
            let value = f.value(x) + lambda * L12Closed.value(x);
            let bound = rec.step.reference.unwrap() - cfg.delta * rec.step.step_sq.unwrap();
            let consistent = (value - rec.objective).abs() <= 1e-12 * value.abs().max(1.0);
            if rec.step.accepted == Some(true) {
                nm_accepted += 1;
                if !consistent || value > bound {
                    nm_violations += 1;
                }
            } else if !consistent {
                nm_violations += 1;
            }
        }
    }

    let mut rng = seeded(8);
    let mut max_gap = 0.0f64;
    let mut length_mismatch = 0;
    for _ in 0..200 {
        let d = rng.random_range(1..8);
        let z = Vector::from_fn(d, |_, _| rng.random_range(-4.0..4.0));
        let lambda = rng.random_range(0.0..3.0);
        let cfg = SolverConfig { max_iters: 2000, tol: 1e-12, record_iterates: true, ..SolverConfig::default() };
        let scp = solve_scp(&SquaredDistance { anchor: z.clone() }, w(lambda), &Vector::zeros(d), &cfg).unwrap();
        let num = prox_l12_numerical_run(&z, w(lambda), 2000, 1e-12, true).unwrap();
        if scp.trace.iterates.len() != num.history.len() {
            length_mismatch += 1;
        }
        for (a, b) in scp.trace.iterates.iter().zip(&num.history) {
            max_gap = max_gap.max((a - b).norm());
        }
    }
    report(
        "solver descent",
        worst_pg <= 1e-9 && worst_scp <= 1e-9 && nm_violations == 0 && length_mismatch == 0 && max_gap <= 1e-12,
        format!(
            "pg max increase {worst_pg:.2e}, scp max increase {worst_scp:.2e}, nmapg {nm_violations} violations over {nm_accepted} accepted steps, scp vs numerical prox max gap {max_gap:.1e} ({length_mismatch} length mismatches)"
        ),
    );
}

#[test]
fn matrix_completion() {
    let _g = serial();
    let t = Instant::now();
    let s = SyntheticCompletion::generate(200, 300, 5, 0.3, 0.01, 0.1, 42).unwrap();
    let (x, _) = solve_mc_nmapg(&s.train, w(default_lambda(&s.train)), 100, &SolverConfig::default()).unwrap();
    let held_out = rmse_on_entries(&x, &s.held_out).unwrap();

    let mut rng = seeded(5);
    let truth = gaussian(100, 2, &mut rng) * gaussian(2, 120, &mut rng);
    let entries = (0..100).flat_map(|i| (0..120).map(move |j| (i, j))).map(|(i, j)| (i, j, truth[(i, j)])).collect();
    let full = ObservedMatrix::new(100, 120, entries).unwrap();
    let (y, _) = solve_mc_nmapg(&full, w(1e-6), 100, &SolverConfig::default()).unwrap();
    let rel = (y.to_dense() - &truth).norm() / truth.norm();
    let secs = t.elapsed().as_secs_f64();
    report(
        "matrix completion",
        held_out < 0.05 && rel < 1e-4 && secs < 120.0,
        format!("held-out rmse {held_out:.4} (rank {}), fully observed rank-2 relative error {rel:.2e}, {secs:.1}s", x.rank()),
    );
}

#[test]
fn tv_denoising() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = seeded(42);
    let clean = piecewise_constant(64, 64, 6, &mut rng);
    let noisy = add_noise(&clean, 0.05, &mut rng);
    let noisy_rmse = noisy.rmse(&clean).unwrap();
    let mut best = f64::INFINITY;
    let mut worst_increase = f64::NEG_INFINITY;
    for k in 0..7 {
        let cfg = TvConfig::new(w(0.02 * f64::from(1u32 << k)));
        let (x, trace) = altmin_denoise(&noisy, &cfg).unwrap();
        worst_increase = worst_increase.max(trace.max_increase());
        best = best.min(x.rmse(&clean).unwrap());
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        "tv denoising",
        worst_increase <= 1e-6 && best < noisy_rmse && secs < 120.0,
        format!("best rmse {best:.5} vs noisy {noisy_rmse:.5}, largest objective increase {worst_increase:.2e}, {secs:.1}s"),
    );
}

#[test]
fn gradient_checks() {
    let _g = serial();
    let mut rng = seeded(9);
    let cfg = CsConfig { d: 100, ..CsConfig::default() };
    let inst = gen_instance(&cfg, 1).unwrap();
    let f = cs_objective(&inst.a, &inst.y).unwrap();
    let h = 1e-5;
    let rel = |fd: f64, an: f64| (fd - an).abs() / an.abs().max(fd.abs()).max(1e-12);
    let mut worst_cs = 0.0f64;
    for _ in 0..20 {
        let x = Vector::from_fn(f.dim(), |_, _| StandardNormal.sample(&mut rng));
        let g = f.gradient(&x);
        for _ in 0..3 {
            let dir = Vector::from_fn(f.dim(), |_, _| StandardNormal.sample(&mut rng));
            let fd = (f.value(&(&x + &dir * h)) - f.value(&(&x - &dir * h))) / (2.0 * h);
            worst_cs = worst_cs.max(rel(fd, g.dot(&dir)));
        }
    }

    let truth = gaussian(40, 50, &mut rng);
    let obs = sample_entries(&truth, 0.4, 0.0, &mut rng).unwrap();
    let mc = mc_objective(&obs);
    let mut worst_mc = 0.0f64;
    for _ in 0..20 {
        let x = LowRankFactor::new(gaussian(40, 3, &mut rng), gaussian(50, 3, &mut rng)).unwrap();
        let g = mc.gradient(&x);
        for _ in 0..3 {
            let (a, b) = (gaussian(40, 1, &mut rng), gaussian(50, 1, &mut rng));
            let dir = LowRankFactor::new(a.clone(), b.clone()).unwrap();
            let plus = LowRankFactor::combine(&[(1.0, &x), (h, &dir)]);
            let minus = LowRankFactor::combine(&[(1.0, &x), (-h, &dir)]);
            let fd = (mc.value(&plus) - mc.value(&minus)) / (2.0 * h);
            let an: f64 = g.entries().iter().map(|&(i, j, v)| v * a[(i, 0)] * b[(j, 0)]).sum();
            worst_mc = worst_mc.max(rel(fd, an));
        }
    }
    report(
        "gradient checks",
        worst_cs <= 1e-5 && worst_mc <= 1e-5,
        format!("20 points each; worst relative error cs {worst_cs:.2e}, matcomp {worst_mc:.2e}"),
    );
}

#[test]
fn cli_determinism() {
    let _g = serial();
    let root = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    bad.extend(common::determinism_mismatches(root.path(), "cs", &["cs", "--d", "50", "--repeats", "2"]));
    bad.extend(common::determinism_mismatches(root.path(), "matcomp", &["matcomp"]));
    bad.extend(common::determinism_mismatches(root.path(), "tv", &["tv"]));
    bad.extend(common::determinism_mismatches(root.path(), "proxcheck", &["proxcheck", "--trials", "200"]));
    report(
        "cli determinism",
        bad.is_empty(),
        if bad.is_empty() {
            "cs, matcomp, tv and proxcheck reruns produce identical result CSVs (seconds columns masked)".to_string()
        } else {
            format!("differences: {}", bad.join(", "))
        },
    );
}
