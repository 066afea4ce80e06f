//! `gtk`: batch front-end for the gtkernel pipelines.
//!
//! Every output begins with a JSON header line (command, config, version,
//! seed); tabular data follows as CSV. Exit codes: 0 success, 2 invalid
//! input, 3 numerical failure.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gtkernel::gue::{gue_level_kernel, gue_minor_kernel, uie_minor_kernel_gue};
use gtkernel::kernel::{rational_from_f64, rational_to_f64};
use gtkernel::montecarlo::{verify_determinantal, CorrelationKernel, CountBox, GueKernel, SampleBatch, SampleSource};
use gtkernel::saddle::{scan_a_alpha, support_grid};
use gtkernel::sine::{sine_sup_error, symmetric_grid, ScalingWindow};
use gtkernel::{
    kernel_contour, kernel_fixed_top, kernel_fixed_top_exact, solve_saddle, ContourQuad, Error, KernelSpec, Measure,
    Precision, Spectrum,
};
use output::{num, Output};

#[derive(Parser, Debug, Serialize)]
#[command(name = "gtk", version, about = "Correlation kernels of eigenvalue minor processes")]
struct Cli {
    /// Worker threads (falls back to GTK_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the timestamp from headers so identical runs give identical files.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Output file (default: stdout).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Saddle point w, density and gauge at one c or along a grid.
    Saddle(SaddleArgs),
    /// Fixed-top-row kernel K((r,u),(s,v)).
    Kernel(KernelArgs),
    /// Distance of the bulk-scaled kernel to the Sine kernel along a list of n.
    SineScan(SineArgs),
    /// Monte Carlo box counts against kernel integrals.
    McVerify(McArgs),
    /// GUE level and minor-process kernels.
    Gue(GueArgs),
}

#[derive(Args, Debug, Serialize)]
struct SaddleArgs {
    /// Measure file (`{"kind":"atomic",...}` or `{"kind":"semicircle"}`).
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, conflicts_with = "c_grid")]
    c: Option<f64>,
    /// `lo:hi:count`, inclusive.
    #[arg(long)]
    c_grid: Option<String>,
    /// Print the intervals of A_alpha found on a grid of this many points instead.
    #[arg(long)]
    scan: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
enum Method {
    Direct,
    Exact,
    Contour,
}

#[derive(Args, Debug, Serialize)]
struct KernelArgs {
    /// Comma-separated top row, decreasing.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "spectrum_file")]
    spectrum: Option<String>,
    /// JSON file: an array or `{"values": [...]}`.
    #[arg(long)]
    spectrum_file: Option<PathBuf>,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    s: usize,
    /// One or more comma-separated positions.
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    #[arg(long, allow_hyphen_values = true)]
    v: String,
    #[arg(long, value_enum, default_value = "direct")]
    method: Method,
    /// `double`, `auto` or `multi:BITS`.
    #[arg(long, default_value = "auto")]
    precision: String,
}

#[derive(Args, Debug, Serialize)]
struct SineArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    /// Comma-separated, increasing.
    #[arg(long)]
    n: String,
    /// Grid points per axis on [-half_width, half_width].
    #[arg(long, default_value_t = 21)]
    grid_points: usize,
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
    /// Saddle of the limit measure rather than the per-n empirical one.
    #[arg(long)]
    limit_saddle: bool,
    /// Also write the per-point table (n,u,v,scaled,sine,abs_err) here.
    #[arg(long)]
    detail: Option<PathBuf>,
    #[arg(long, default_value = "auto")]
    precision: String,
}

#[derive(Args, Debug, Serialize)]
struct McArgs {
    #[arg(long, conflicts_with_all = ["spectrum", "gue"])]
    spectrum_file: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "gue")]
    spectrum: Option<String>,
    /// Sample GUE minors of this size instead of a fixed spectrum.
    #[arg(long)]
    gue: Option<usize>,
    /// Level of the boxes.
    #[arg(long)]
    q: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of equal boxes tiling the window.
    #[arg(long, default_value_t = 6)]
    boxes: usize,
    /// Window `lo:hi` (default: spectrum bounds, or +-2 sqrt(q) for GUE).
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long, default_value_t = 4.0)]
    z: f64,
    /// Save the sampled patterns (JSON lines) here.
    #[arg(long)]
    batch_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct GueArgs {
    #[arg(long)]
    n: usize,
    /// Level of the first point (defaults to n: the level kernel).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    #[arg(long, allow_hyphen_values = true)]
    v: String,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::InvalidMeasure(_)
            | Error::EmptySpectrum
            | Error::NotDecreasing { .. }
            | Error::LevelOutOfRange { .. }
            | Error::SizeGuard { .. }
            | Error::OverlappingBoxes { .. }
            | Error::Io(_)
            | Error::Json(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn invalid<T>(msg: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure::Invalid(msg.into()))
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Invalid(format!("not a number: {t:?}")))
        })
        .collect()
}

fn parse_precision(s: &str) -> std::result::Result<Precision, Failure> {
    match s {
        "double" => Ok(Precision::Double),
        "auto" => Ok(Precision::Auto),
        other => match other.strip_prefix("multi:").and_then(|b| b.parse::<usize>().ok()) {
            Some(bits) if bits >= 64 => Ok(Precision::Multi { bits }),
            _ => invalid(format!(
                "precision must be double, auto or multi:BITS (>= 64), got {other:?}"
            )),
        },
    }
}

fn check_alpha(alpha: f64) -> CmdResult {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        invalid(format!("alpha = {alpha} must lie in (0,1)"))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpectrumFile {
    Bare(Vec<f64>),
    Tagged { values: Vec<f64> },
}

fn load_spectrum(inline: Option<&str>, file: Option<&Path>) -> std::result::Result<Spectrum, Failure> {
    let values = match (inline, file) {
        (Some(s), _) => parse_list(s)?,
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p)?;
            match serde_json::from_str::<SpectrumFile>(&text).map_err(|e| Failure::Invalid(e.to_string()))? {
                SpectrumFile::Bare(v) | SpectrumFile::Tagged { values: v } => v,
            }
        }
        (None, None) => return invalid("one of --spectrum or --spectrum-file is required"),
    };
    Ok(Spectrum::new(values)?)
}

fn cmd_saddle(a: &SaddleArgs, out: &mut Output) -> CmdResult {
    check_alpha(a.alpha)?;
    let m = Measure::load(&a.measure)?;
    if m.is_point_mass() {
        return Err(Error::PointMass.into());
    }
    if let Some(points) = a.scan {
        if points < 2 {
            return invalid("--scan needs at least 2 points");
        }
        let scan = scan_a_alpha(&m, a.alpha, &support_grid(&m, points))?;
        out.line("lo,hi")?;
        for (lo, hi) in &scan.intervals {
            out.line(&format!("{},{}", num(*lo), num(*hi)))?;
        }
        return Ok(());
    }
    let cs = match (a.c, &a.c_grid) {
        (Some(c), None) => vec![c],
        (None, Some(g)) => {
            let parts: Vec<&str> = g.split(':').collect();
            let [lo, hi, count] = parts[..] else {
                return invalid("--c-grid must be lo:hi:count");
            };
            let (lo, hi): (f64, f64) = match (lo.parse(), hi.parse()) {
                (Ok(l), Ok(h)) if l < h => (l, h),
                _ => return invalid("--c-grid bounds must be numbers with lo < hi"),
            };
            let Ok(count) = count.parse::<usize>() else {
                return invalid("--c-grid count must be a positive integer");
            };
            if count < 2 {
                return invalid("--c-grid count must be at least 2");
            }
            (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect()
        }
        _ => return invalid("exactly one of --c or --c-grid is required"),
    };
    out.line("c,re_w,im_w,rho,gauge,residual,status")?;
    for c in cs {
        match solve_saddle(&m, a.alpha, c)? {
            Some(s) => out.line(&format!(
                "{},{},{},{},{},{},OK",
                num(c),
                num(s.w.re),
                num(s.w.im),
                num(s.rho),
                num(s.gauge),
                num(s.residual)
            ))?,
            None => out.line(&format!("{},NaN,NaN,0,NaN,NaN,NOT-IN-A_ALPHA", num(c)))?,
        }
    }
    Ok(())
}

fn cmd_kernel(a: &KernelArgs, out: &mut Output) -> CmdResult {
    let x = load_spectrum(a.spectrum.as_deref(), a.spectrum_file.as_deref())?;
    let precision = parse_precision(&a.precision)?;
    let us = parse_list(&a.u)?;
    let vs = parse_list(&a.v)?;
    let spec = KernelSpec::new(x.clone()).with_precision(precision);
    out.line("r,s,u,v,K")?;
    for &u in &us {
        for &v in &vs {
            let k = match a.method {
                Method::Direct => kernel_fixed_top(&spec, a.r, a.s, u, v)?,
                Method::Exact => {
                    let xr = x.values().iter().map(|&t| rational_from_f64(t)).collect::<Vec<_>>();
                    let k = kernel_fixed_top_exact(&xr, a.r, a.s, &rational_from_f64(u), &rational_from_f64(v))?;
                    rational_to_f64(&k)
                }
                Method::Contour => {
                    if a.r != a.s {
                        return invalid("the contour method needs r == s");
                    }
                    kernel_contour(&spec, a.r, u, v, ContourQuad::default())?
                }
            };
            out.line(&format!("{},{},{},{},{}", a.r, a.s, num(u), num(v), num(k)))?;
        }
    }
    Ok(())
}

fn cmd_sine_scan(a: &SineArgs, out: &mut Output) -> CmdResult {
    check_alpha(a.alpha)?;
    let n_list: Vec<usize> =
        a.n.split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::Invalid(format!("bad n: {t:?}")))
            })
            .collect::<std::result::Result<_, _>>()?;
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] < 2 {
        return invalid("--n must be an increasing list of sizes >= 2");
    }
    if a.grid_points == 0 || !(a.half_width > 0.0) {
        return invalid("grid needs at least one point and a positive half-width");
    }
    let m = Measure::load(&a.measure)?;
    if m.is_point_mass() {
        return Err(Error::PointMass.into());
    }
    let mut window = ScalingWindow::new(a.c, a.alpha, n_list);
    window.grid_u = symmetric_grid(a.half_width, a.grid_points);
    window.grid_v = window.grid_u.clone();
    window.limit_saddle = a.limit_saddle;
    window.precision = parse_precision(&a.precision)?;
    let rows = sine_sup_error(&m, &window)?;
    out.line("n,q,status,sup_error,diag_error,det_error,rho,gauge")?;
    for r in &rows {
        let (rho, gauge) = r.saddle.map(|s| (s.rho, s.gauge)).unwrap_or((f64::NAN, f64::NAN));
        out.line(&format!(
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.q,
            r.status.label(),
            num(r.sup_error),
            num(r.diag_error),
            num(r.det_error),
            num(rho),
            num(gauge)
        ))?;
    }
    if let Some(path) = &a.detail {
        let mut detail = Output::open(Some(path))?;
        detail.header("sine-scan-detail", a, None, true)?;
        detail.line("n,u,v,scaled,sine,abs_err")?;
        for r in &rows {
            for p in &r.points {
                detail.line(&format!(
                    "{},{},{},{},{},{}",
                    r.n,
                    num(p.u),
                    num(p.v),
                    num(p.scaled),
                    num(p.sine),
                    num(p.abs_err)
                ))?;
            }
        }
        detail.finish()?;
    }
    Ok(())
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), Failure> {
    let v: Vec<&str> = s.split(':').collect();
    match v[..] {
        [lo, hi] => match (lo.parse::<f64>(), hi.parse::<f64>()) {
            (Ok(l), Ok(h)) if l < h => Ok((l, h)),
            _ => invalid("--window must be lo:hi with lo < hi"),
        },
        _ => invalid("--window must be lo:hi"),
    }
}

fn cmd_mc_verify(a: &McArgs, out: &mut Output) -> std::result::Result<bool, Failure> {
    if a.samples < 2 || a.boxes == 0 || !(a.z > 0.0) {
        return invalid("need at least 2 samples, 1 box and a positive z threshold");
    }
    let (batch, spec, default_window) = match a.gue {
        Some(n) => {
            let batch = SampleBatch::generate(SampleSource::Gue, n, a.samples, a.seed)?;
            let half = 2.0 * (a.q as f64).sqrt();
            (batch, None, (-half, half))
        }
        None => {
            let x = load_spectrum(a.spectrum.as_deref(), a.spectrum_file.as_deref())?;
            let n = x.len();
            let bounds = x.bounds();
            if a.q == 0 || a.q >= n {
                return Err(Error::LevelOutOfRange {
                    level: a.q,
                    max: n.saturating_sub(1),
                }
                .into());
            }
            let batch = SampleBatch::generate(
                SampleSource::FixedSpectrum {
                    values: x.values().to_vec(),
                },
                n,
                a.samples,
                a.seed,
            )?;
            (batch, Some(KernelSpec::new(x)), bounds)
        }
    };
    let gue_kernel = GueKernel { n: batch.n };
    let kernel: &dyn CorrelationKernel = match &spec {
        Some(s) => s,
        None => &gue_kernel,
    };
    if a.q == 0 || a.q > kernel.max_level() {
        return Err(Error::LevelOutOfRange {
            level: a.q,
            max: kernel.max_level(),
        }
        .into());
    }
    let (lo, hi) = match &a.window {
        Some(w) => parse_window(w)?,
        None => default_window,
    };
    if let Some(path) = &a.batch_out {
        batch.save(path)?;
    }
    let boxes = CountBox::tiling(a.q, lo, hi, a.boxes);
    let report = verify_determinantal(&batch, kernel, &boxes, a.z)?;
    out.raw(&report.to_csv())?;
    Ok(report.passed())
}

fn cmd_gue(a: &GueArgs, out: &mut Output) -> CmdResult {
    if a.n == 0 {
        return invalid("n must be at least 1");
    }
    let r = a.r.unwrap_or(a.n);
    let s = a.s.unwrap_or(r);
    let us = parse_list(&a.u)?;
    let vs = parse_list(&a.v)?;
    out.line("n,r,s,u,v,minor_kernel,level_kernel,uie_kernel")?;
    for &u in &us {
        for &v in &vs {
            let j = gue_minor_kernel(a.n, r, u, s, v)?;
            let level = if r == s { gue_level_kernel(r, u, v)? } else { f64::NAN };
            let uie = if r < a.n {
                uie_minor_kernel_gue(a.n, r, s, u, v)?
            } else {
                f64::NAN
            };
            out.line(&format!(
                "{},{},{},{},{},{},{},{}",
                a.n,
                r,
                s,
                num(u),
                num(v),
                num(j),
                num(level),
                num(uie)
            ))?;
        }
    }
    Ok(())
}

fn configure_threads(flag: Option<usize>) -> CmdResult {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("GTK_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::Invalid(format!("GTK_THREADS={v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return invalid("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Invalid(e.to_string()))?;
    }
    Ok(())
}

mod erased {
    pub trait Config {
        fn to_value(&self) -> serde_json::Value;
    }

    impl<T: serde::Serialize> Config for T {
        fn to_value(&self) -> serde_json::Value {
            serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
        }
    }
}

fn run(cli: &Cli) -> std::result::Result<bool, Failure> {
    configure_threads(cli.threads)?;
    let mut out = Output::open(cli.output.as_deref())?;
    let det = cli.deterministic;
    // config echo: the subcommand's arguments plus the global flags
    let cfg = |args: &dyn erased::Config| {
        serde_json::json!({
            "args": args.to_value(),
            "threads": cli.threads,
            "deterministic": cli.deterministic,
            "output": cli.output,
        })
    };
    let ok = match &cli.command {
        Command::Saddle(a) => {
            out.header("saddle", &cfg(a), None, det)?;
            cmd_saddle(a, &mut out).map(|_| true)
        }
        Command::Kernel(a) => {
            out.header("kernel", &cfg(a), None, det)?;
            cmd_kernel(a, &mut out).map(|_| true)
        }
        Command::SineScan(a) => {
            out.header("sine-scan", &cfg(a), None, det)?;
            cmd_sine_scan(a, &mut out).map(|_| true)
        }
        Command::McVerify(a) => {
            out.header("mc-verify", &cfg(a), Some(a.seed), det)?;
            cmd_mc_verify(a, &mut out)
        }
        Command::Gue(a) => {
            out.header("gue", &cfg(a), None, det)?;
            cmd_gue(a, &mut out).map(|_| true)
        }
    };
    out.finish()?;
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some z-scores exceed the threshold");
            ExitCode::from(3)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
