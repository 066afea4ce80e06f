//! Acceptance checks 1-11: one PASS/FAIL line each, non-zero exit on any failure.
//! Runs without the libtest harness so the lines are always printed.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use gtkernel::gue::{gue_level_kernel, gue_minor_kernel, uie_minor_kernel_gue};
use gtkernel::kernel::{rational_from_f64, rational_to_f64};
use gtkernel::montecarlo::{verify_determinantal, CountBox, SampleBatch, SampleSource};
use gtkernel::patterns::check_symmetric_interlacing;
use gtkernel::saddle::{closed_form_saddle, mass_audit, scan_a_alpha, support_grid, three_atom_edges, two_atom_edges};
use gtkernel::sine::{gue_bulk_sup_error, sine_sup_error, strictly_decreasing, symmetric_grid, ScalingWindow};
use gtkernel::{
    correlation_det, kernel_contour, kernel_fixed_top, kernel_fixed_top_exact, level_mass, solve_saddle,
    ClosedFormExample, ContourQuad, KernelPoint, KernelSpec, Measure, Spectrum,
};

// pinned tolerances
const SADDLE_TOL: f64 = 1e-10;
const SCAN_STEP: f64 = 1e-3;
const SCAN_SLACK_STEPS: f64 = 2.0;
const MASS_TOL: f64 = 1e-5;
const ORACLE_REL_TOL: f64 = 1e-9;
const LEVEL_MASS_TOL: f64 = 1e-6;
const CORRELATION_TOL: f64 = 1e-8;
const CONTOUR_REL_TOL: f64 = 1e-6;
const GUE_LEVEL_TOL: f64 = 1e-10;
const GUE_GAUGE_TOL: f64 = 1e-9;
const MC_Z: f64 = 4.0;
const SINE_CAP: f64 = 0.05;
const GUE_BULK_CAP: f64 = 0.05;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Random strictly decreasing dyadic spectrum on `[0, 1]` with both ends present.
fn dyadic_spectrum(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut picks = std::collections::BTreeSet::new();
    picks.insert(0u32);
    picks.insert(256);
    while picks.len() < n {
        picks.insert(rng.random_range(1..256));
    }
    picks.into_iter().rev().map(|k| k as f64 / 256.0).collect()
}

/// Dyadic point in `(0, 1)` avoiding the atoms of `x`.
fn dyadic_point(rng: &mut ChaCha8Rng, x: &[f64]) -> f64 {
    loop {
        let p = rng.random_range(1..4096) as f64 / 4096.0;
        if x.iter().all(|&a| a != p) {
            return p;
        }
    }
}

fn in_a_alpha_grid(intervals: &[(f64, f64)], per_interval: usize) -> Vec<f64> {
    intervals
        .iter()
        .flat_map(|&(lo, hi)| (0..per_interval).map(move |k| lo + (hi - lo) * (k as f64 + 0.5) / per_interval as f64))
        .collect()
}

fn criterion_1() -> Outcome {
    let mut cases: Vec<(ClosedFormExample, f64)> = vec![(ClosedFormExample::Semicircle, 0.25)];
    for beta in [0.3, 0.5, 0.8] {
        cases.push((ClosedFormExample::TwoAtom { beta }, 0.5));
    }
    cases.push((ClosedFormExample::ThreeAtom, 0.5));
    cases.push((ClosedFormExample::ThreeAtom, 0.8));
    let (mut worst_w, mut worst_rho, mut count) = (0.0f64, 0.0f64, 0);
    for (ex, alpha) in cases {
        let iv = ex.a_alpha(alpha);
        let m = ex.measure();
        for c in in_a_alpha_grid(&iv, 100 / iv.len()) {
            let closed = closed_form_saddle(ex, alpha, c).map_err(|e| format!("{ex:?} c={c}: {e}"))?;
            let solved = solve_saddle(&m, alpha, c)
                .map_err(|e| format!("{ex:?} c={c}: {e}"))?
                .ok_or_else(|| format!("{ex:?} alpha={alpha} c={c}: no upper root"))?;
            worst_w = worst_w.max((closed.w - solved.w).norm());
            worst_rho = worst_rho.max((closed.rho - solved.rho).abs());
            count += 1;
        }
    }
    check(
        worst_w < SADDLE_TOL && worst_rho < SADDLE_TOL,
        format!("{count} points, max |dw| = {worst_w:.2e}, max |drho| = {worst_rho:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let slack = SCAN_SLACK_STEPS * SCAN_STEP;
    let mut cases: Vec<(ClosedFormExample, f64)> = vec![(ClosedFormExample::Semicircle, 0.25)];
    for beta in [0.3, 0.5, 0.8] {
        cases.push((ClosedFormExample::TwoAtom { beta }, 0.5));
    }
    for alpha in [0.5, 2.0 / 3.0, 0.8] {
        cases.push((ClosedFormExample::ThreeAtom, alpha));
    }
    let mut worst = 0.0f64;
    for (ex, alpha) in cases {
        let m = ex.measure();
        let (a, b) = m.support();
        let points = ((b - a) / SCAN_STEP).round() as usize - 1;
        let scan = scan_a_alpha(&m, alpha, &support_grid(&m, points)).map_err(|e| e.to_string())?;
        let expected = ex.a_alpha(alpha);
        if scan.intervals.len() != expected.len() {
            return Err(format!(
                "{ex:?} alpha={alpha:.4}: {} intervals found, {} expected",
                scan.intervals.len(),
                expected.len()
            ));
        }
        for (&(lo, hi), &(elo, ehi)) in scan.intervals.iter().zip(&expected) {
            worst = worst.max((lo - elo).abs()).max((hi - ehi).abs());
        }
    }
    // sanity of the closed forms used above
    let (lo, hi) = two_atom_edges(0.5, 0.5);
    let (cm, _) = three_atom_edges(2.0 / 3.0);
    let closed_ok = lo.abs() < 1e-15 && (hi - 1.0).abs() < 1e-15 && cm.abs() < 1e-12;
    check(
        worst <= slack && closed_ok,
        format!("interval counts match; worst endpoint offset {worst:.2e} (allowed {slack:.0e})"),
    )
}

fn criterion_3() -> Outcome {
    let mut cases: Vec<(String, Measure, f64)> = Vec::new();
    for alpha in [0.25, 0.5, 0.75] {
        cases.push(("semicircle".into(), Measure::semicircle(), alpha));
    }
    for alpha in [0.3, 0.5, 0.7] {
        cases.push(("two-atom beta=0.5".into(), Measure::two_atom(0.5).unwrap(), alpha));
    }
    for alpha in [0.3, 0.5, 0.8] {
        cases.push(("three-atom".into(), Measure::three_atom(), alpha));
    }
    let mut worst = 0.0f64;
    for (name, m, alpha) in &cases {
        let audit = mass_audit(m, *alpha, 200).map_err(|e| format!("{name} alpha={alpha}: {e}"))?;
        worst = worst.max((audit.total - alpha).abs());
    }
    let atomic = mass_audit(&Measure::two_atom(0.9).unwrap(), 0.5, 200).map_err(|e| e.to_string())?;
    let atom_err = (atomic.atomic - 0.4).abs();
    let total_err = (atomic.total - 0.5).abs();
    check(
        worst < MASS_TOL && atom_err < MASS_TOL && total_err < MASS_TOL,
        format!(
            "{} audits, max |mass - alpha| = {worst:.2e}; beta=0.9 atom mass {:.6} (err {atom_err:.1e}), total err {total_err:.1e}",
            cases.len(),
            atomic.atomic
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut evals, mut zeros) = (0.0f64, 0usize, 0usize);
    for n in 2..=12 {
        let x = dyadic_spectrum(&mut rng, n);
        let xr: Vec<_> = x.iter().map(|&t| rational_from_f64(t)).collect();
        let spec = KernelSpec::from_values(x.clone()).map_err(|e| e.to_string())?;
        for r in 1..n {
            for s in 1..=n {
                for _ in 0..20 {
                    let (u, v) = (dyadic_point(&mut rng, &x), dyadic_point(&mut rng, &x));
                    let exact = kernel_fixed_top_exact(&xr, r, s, &rational_from_f64(u), &rational_from_f64(v))
                        .map_err(|e| e.to_string())?;
                    let exact = rational_to_f64(&exact);
                    let float = kernel_fixed_top(&spec, r, s, u, v).map_err(|e| e.to_string())?;
                    evals += 1;
                    let err = if exact == 0.0 {
                        zeros += 1;
                        if float == 0.0 {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        (float - exact).abs() / exact.abs()
                    };
                    if !(err < ORACLE_REL_TOL) {
                        return Err(format!(
                            "n={n} r={r} s={s} u={u} v={v}: float {float:e} vs exact {exact:e} (rel {err:.2e})"
                        ));
                    }
                    worst = worst.max(err);
                }
            }
        }
    }
    check(
        true,
        format!("{evals} evaluations ({zeros} exact zeros), max relative error {worst:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_mass = 0.0f64;
    for n in 2..=12 {
        for spec in [
            KernelSpec::new(Spectrum::equispaced(n).unwrap()),
            KernelSpec::from_values(dyadic_spectrum(&mut rng, n)).unwrap(),
        ] {
            for r in 1..n {
                let mass = level_mass(&spec, r, 16).map_err(|e| format!("n={n} r={r}: {e}"))?;
                worst_mass = worst_mass.max((mass - r as f64).abs());
            }
        }
    }
    let mut worst_det = 0.0f64;
    for n in 2..=8 {
        let spec = KernelSpec::from_values(dyadic_spectrum(&mut rng, n)).unwrap();
        let x = spec.spectrum().values().to_vec();
        for r in 1..n {
            for _ in 0..10 {
                let pts: Vec<KernelPoint> = (0..=r)
                    .map(|_| KernelPoint::new(r, dyadic_point(&mut rng, &x)))
                    .collect();
                let d = correlation_det(&spec, &pts).map_err(|e| e.to_string())?;
                worst_det = worst_det.max(d.abs());
            }
        }
    }
    check(
        worst_mass < LEVEL_MASS_TOL && worst_det < CORRELATION_TOL,
        format!("max |level_mass - r| = {worst_mass:.2e}; max |(r+1)-point det| = {worst_det:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cases = Vec::new();
    for n in [3, 5, 8, 12, 16, 20] {
        let x = dyadic_spectrum(&mut rng, n);
        let gap = KernelSpec::from_values(x.clone()).unwrap().spectrum().min_gap();
        for _ in 0..50 {
            let r = rng.random_range(1..n);
            // keep u away from the atoms so a separating contour exists
            let u = loop {
                let u = dyadic_point(&mut rng, &x);
                if x.iter().all(|a| (a - u).abs() > 0.1 * gap) {
                    break u;
                }
            };
            let v = dyadic_point(&mut rng, &x);
            cases.push((x.clone(), r, u, v));
        }
    }
    let rels: Vec<f64> = cases
        .par_iter()
        .map(|(x, r, u, v)| {
            let (n, r, u, v) = (x.len(), *r, *u, *v);
            let spec = KernelSpec::from_values(x.clone()).unwrap();
            let direct = kernel_fixed_top(&spec, r, r, u, v).map_err(|e| e.to_string())?;
            let contour = kernel_contour(&spec, r, u, v, ContourQuad::default())
                .map_err(|e| format!("n={n} r={r} u={u} v={v}: {e}"))?;
            let rel = (contour - direct).abs() / direct.abs();
            if !(rel < CONTOUR_REL_TOL) {
                return Err(format!(
                    "n={n} r={r} u={u} v={v}: contour {contour:e} vs direct {direct:e}"
                ));
            }
            Ok(rel)
        })
        .collect::<Result<_, String>>()?;
    let worst = rels.iter().copied().fold(0.0, f64::max);
    check(
        true,
        format!("{} pairs, max relative difference {worst:.2e}", rels.len()),
    )
}

fn criterion_7() -> Outcome {
    let grid: Vec<f64> = (0..9).map(|i| -3.0 + 0.75 * i as f64).collect();
    let (mut worst_level, mut worst_gauge, mut worst_det) = (0.0f64, 0.0f64, 0.0f64);
    for n in 1..=12 {
        for r in 1..=n {
            for &u in &grid {
                for &v in &grid {
                    let j = gue_minor_kernel(n, r, u, r, v).map_err(|e| e.to_string())?;
                    let k = gue_level_kernel(r, u, v).map_err(|e| e.to_string())?;
                    worst_level = worst_level.max((j - k).abs());
                }
            }
        }
        for r in 1..n {
            for s in 1..=n {
                for &u in &grid {
                    for &v in &grid {
                        let j = gue_minor_kernel(n, r, u, s, v).map_err(|e| e.to_string())?;
                        let k = uie_minor_kernel_gue(n, r, s, u, v).map_err(|e| e.to_string())?;
                        let gauge = ((u * u - v * v) / 4.0).exp();
                        worst_gauge = worst_gauge.max((j - gauge * k).abs() / j.abs().max(1.0));
                    }
                }
                // two-point determinants on levels (r, s)
                for &u in &grid {
                    let v = 0.37 - 0.5 * u;
                    let dj = gue_minor_kernel(n, r, u, r, u).unwrap() * gue_minor_kernel(n, s, v, s, v).unwrap()
                        - gue_minor_kernel(n, r, u, s, v).unwrap() * gue_minor_kernel(n, s, v, r, u).unwrap();
                    let uie = |a, x, b, y| uie_minor_kernel_gue(n, a, b, x, y).unwrap();
                    if s < n {
                        let dk = uie(r, u, r, u) * uie(s, v, s, v) - uie(r, u, s, v) * uie(s, v, r, u);
                        worst_det = worst_det.max((dj - dk).abs());
                    }
                }
            }
        }
    }
    check(
        worst_level < GUE_LEVEL_TOL && worst_gauge < GUE_GAUGE_TOL && worst_det < GUE_GAUGE_TOL,
        format!(
            "max |J(r,r) - K_r| = {worst_level:.2e}; max gauge mismatch {worst_gauge:.2e}; max det2 mismatch {worst_det:.2e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let x = Spectrum::equispaced(8).unwrap();
    let batch = SampleBatch::generate(
        SampleSource::FixedSpectrum {
            values: x.values().to_vec(),
        },
        8,
        100_000,
        8,
    )
    .map_err(|e| e.to_string())?;
    let interlaced = batch.patterns.iter().filter(|p| check_symmetric_interlacing(p)).count();
    let spec = KernelSpec::new(x);
    let boxes = CountBox::tiling(4, 0.0, 1.0, 6);
    let report = verify_determinantal(&batch, &spec, &boxes, MC_Z).map_err(|e| e.to_string())?;
    check(
        report.passed() && interlaced == batch.patterns.len(),
        format!(
            "{} statistics, max |z| = {:.2}; interlaced {interlaced}/{}",
            report.rows.len(),
            report.max_abs_z(),
            batch.patterns.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let cases = [
        ("two-atom", Measure::two_atom(0.5).unwrap(), 0.5, 0.5),
        ("semicircle", Measure::semicircle(), 0.25, 0.0),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (name, m, alpha, c) in cases {
        let window = ScalingWindow::new(c, alpha, vec![50, 100, 200]);
        let rows = sine_sup_error(&m, &window).map_err(|e| e.to_string())?;
        let sup: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
        let det: Vec<f64> = rows.iter().map(|r| r.det_error).collect();
        let decreasing = strictly_decreasing(&rows, |r| r.sup_error) && strictly_decreasing(&rows, |r| r.det_error);
        ok &= decreasing && sup[2] < SINE_CAP;
        details.push(format!(
            "{name}: sup {:.4}/{:.4}/{:.4}, det {:.1e}/{:.1e}/{:.1e}",
            sup[0], sup[1], sup[2], det[0], det[1], det[2]
        ));
    }
    check(ok, details.join("; "))
}

fn criterion_10() -> Outcome {
    let rows = gue_bulk_sup_error(&[16, 64, 256], &symmetric_grid(1.0, 21)).map_err(|e| e.to_string())?;
    let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    check(
        decreasing && rows[2].1 < GUE_BULK_CAP,
        format!(
            "sup errors {:.4}/{:.4}/{:.4} (scaled with density sqrt(n)/pi)",
            rows[0].1, rows[1].1, rows[2].1
        ),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempdir();
    let spec_path = dir.join("x8.json");
    let values: Vec<f64> = Spectrum::equispaced(8).unwrap().values().to_vec();
    std::fs::write(&spec_path, serde_json::json!({ "values": values }).to_string()).map_err(|e| e.to_string())?;
    let run = |threads: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_gtk"))
            .env("GTK_THREADS", threads)
            .args([
                "--deterministic",
                "mc-verify",
                "--q",
                "4",
                "--samples",
                "20000",
                "--seed",
                "11",
            ])
            .arg("--spectrum-file")
            .arg(&spec_path)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("gtk exited with {:?}", out.status.code()));
        }
        Ok(out.stdout)
    };
    let a = run("4")?;
    let b = run("4")?;
    let c = run("1")?;
    let _ = std::fs::remove_dir_all(&dir);
    check(
        a == b && a == c && !a.is_empty(),
        format!("{} bytes; repeated run and single-thread run identical", a.len()),
    )
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("gtk-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}

fn main() {
    // libtest flags (e.g. --nocapture) are passed through; `--list` must print nothing
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("saddle closed-form agreement", criterion_1),
        ("A_alpha topology", criterion_2),
        ("mass audit", criterion_3),
        ("kernel vs exact oracle", criterion_4),
        ("determinantal identities", criterion_5),
        ("contour/direct equivalence", criterion_6),
        ("GUE consistency", criterion_7),
        ("Monte Carlo vs kernel", criterion_8),
        ("Sine-kernel convergence", criterion_9),
        ("GUE bulk sanity", criterion_10),
        ("reproducibility", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
