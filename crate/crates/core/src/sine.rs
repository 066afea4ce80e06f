//! Bulk scaling of the fixed-top kernel and its distance to the Sine kernel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gue::gue_level_kernel;
use crate::kernel::{kernel_fixed_top, KernelSpec, Precision};
use crate::measures::{from_spectrum, quantile_spectrum, Measure};
use crate::saddle::{solve_saddle, Saddle};

/// `sin(pi (v - u)) / (pi (v - u))`, 1 on the diagonal.
pub fn sine_kernel(u: f64, v: f64) -> f64 {
    let d = v - u;
    if d.abs() < 1e-12 {
        1.0
    } else {
        (PI * d).sin() / (PI * d)
    }
}

fn scaled_position(n: usize, saddle: &Saddle, u: f64) -> f64 {
    saddle.c + u / (n as f64 * saddle.rho)
}

/// `C^{v-u} / (n rho) * K_n((q, c + u/(n rho)), (q, c + v/(n rho)))`.
pub fn scaled_kernel(spec: &KernelSpec, q: usize, saddle: &Saddle, u: f64, v: f64) -> Result<f64> {
    let n = spec.n();
    let (a, b) = spec.spectrum().bounds();
    let (x, y) = (scaled_position(n, saddle, u), scaled_position(n, saddle, v));
    for p in [x, y] {
        if !(p > a && p < b) {
            return Err(Error::InvalidParameter(format!("scaled point {p} outside ({a}, {b})")));
        }
    }
    let k = kernel_fixed_top(spec, q, q, x, y)?;
    Ok(saddle.gauge.powf(v - u) / (n as f64 * saddle.rho) * k)
}

/// [`scaled_kernel`], moving `u` by `eps` once if it lands on an atom.
pub fn scaled_kernel_perturbed(spec: &KernelSpec, q: usize, saddle: &Saddle, u: f64, v: f64, eps: f64) -> Result<f64> {
    match scaled_kernel(spec, q, saddle, u, v) {
        Err(Error::AtomCollision { .. }) => scaled_kernel(spec, q, saddle, u + eps, v),
        other => other,
    }
}

/// `det [[S(a,a), S(a,b)], [S(b,a), S(b,b)]]` for a two-point kernel `S`.
fn det2<F: FnMut(f64, f64) -> Result<f64>>(a: f64, b: f64, mut s: F) -> Result<f64> {
    Ok(s(a, a)? * s(b, b)? - s(a, b)? * s(b, a)?)
}

/// Points of the two-point determinant comparison.
pub const DET_POINTS: (f64, f64) = (0.0, 0.5);

/// `q_n = round(alpha n)`.
pub fn level_for(alpha: f64, n: usize) -> usize {
    (alpha * n as f64).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingWindow {
    pub c: f64,
    pub alpha: f64,
    pub grid_u: Vec<f64>,
    pub grid_v: Vec<f64>,
    pub n_list: Vec<usize>,
    /// Use the saddle of the limit measure instead of the per-n empirical one.
    pub limit_saddle: bool,
    pub precision: Precision,
}

impl ScalingWindow {
    /// `[-1,1]^2` with 21 points per axis.
    pub fn new(c: f64, alpha: f64, n_list: Vec<usize>) -> Self {
        let grid = symmetric_grid(1.0, 21);
        ScalingWindow {
            c,
            alpha,
            grid_u: grid.clone(),
            grid_v: grid,
            n_list,
            limit_saddle: false,
            precision: Precision::Auto,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} outside (0,1)", self.alpha)));
        }
        if self.grid_u.is_empty() || self.grid_v.is_empty() {
            return Err(Error::InvalidParameter("empty grid".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("n_list must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// `points` equally spaced values on `[-half, half]`.
pub fn symmetric_grid(half: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| -half + 2.0 * half * i as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    NotInAalpha,
    Failed(String),
}

impl RowStatus {
    pub fn label(&self) -> String {
        match self {
            RowStatus::Ok => "OK".into(),
            RowStatus::NotInAalpha => "NOT-IN-A_ALPHA".into(),
            RowStatus::Failed(msg) => format!("FAILED: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub u: f64,
    pub v: f64,
    pub scaled: f64,
    pub sine: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineRow {
    pub n: usize,
    pub q: usize,
    pub status: RowStatus,
    pub saddle: Option<Saddle>,
    /// `sup |scaled - sine|` over the grid.
    pub sup_error: f64,
    /// `sup |scaled(u,u) - 1|` over the diagonal of the grid.
    pub diag_error: f64,
    /// `|det2(scaled) - det2(sine)|` at [`DET_POINTS`].
    pub det_error: f64,
    pub points: Vec<GridPoint>,
}

impl SineRow {
    fn failed(n: usize, q: usize, status: RowStatus) -> Self {
        SineRow {
            n,
            q,
            status,
            saddle: None,
            sup_error: f64::NAN,
            diag_error: f64::NAN,
            det_error: f64::NAN,
            points: Vec::new(),
        }
    }
}

fn scan_one(m: &Measure, window: &ScalingWindow, n: usize) -> Result<SineRow> {
    let q = level_for(window.alpha, n);
    if q == 0 || q >= n {
        return Err(Error::LevelOutOfRange {
            level: q,
            max: n.saturating_sub(1),
        });
    }
    let x = quantile_spectrum(m, n)?;
    // the limit only exists inside A_alpha of the limit measure, whichever
    // saddle does the scaling; finite-n saddles are non-real even at its edges
    let limit = solve_saddle(m, window.alpha, window.c)?;
    if limit.is_none() {
        return Ok(SineRow::failed(n, q, RowStatus::NotInAalpha));
    }
    let saddle = if window.limit_saddle {
        limit
    } else {
        let empirical = from_spectrum(&x)?;
        solve_saddle(&empirical, q as f64 / n as f64, window.c)?
    };
    let Some(saddle) = saddle else {
        return Ok(SineRow::failed(n, q, RowStatus::NotInAalpha));
    };
    let spec = KernelSpec::new(x).with_precision(window.precision);
    let us: Vec<f64> = window.grid_u.iter().map(|&u| scaled_position(n, &saddle, u)).collect();
    let vs: Vec<f64> = window.grid_v.iter().map(|&v| scaled_position(n, &saddle, v)).collect();
    let scale = 1.0 / (n as f64 * saddle.rho);
    let scaled_at = |u: f64, v: f64, k: f64| saddle.gauge.powf(v - u) * scale * k;
    let matrix = match spec.kernel_matrix(q, q, &us, &vs) {
        Ok(mat) => mat,
        Err(Error::AtomCollision { .. }) => {
            // pointwise, nudging colliding points by a tiny fraction of the grid step
            let eps = 1e-9 * grid_step(&window.grid_u);
            let mut mat = Vec::with_capacity(us.len());
            for &u in &window.grid_u {
                let mut row = Vec::with_capacity(vs.len());
                for &v in &window.grid_v {
                    let s = scaled_kernel_perturbed(&spec, q, &saddle, u, v, eps)?;
                    row.push(s / scaled_at(u, v, 1.0));
                }
                mat.push(row);
            }
            mat
        }
        Err(e) => return Err(e),
    };
    let mut points = Vec::with_capacity(us.len() * vs.len());
    let (mut sup, mut diag) = (0.0f64, 0.0f64);
    for (iu, &u) in window.grid_u.iter().enumerate() {
        for (iv, &v) in window.grid_v.iter().enumerate() {
            let scaled = scaled_at(u, v, matrix[iu][iv]);
            let sine = sine_kernel(u, v);
            let abs_err = (scaled - sine).abs();
            sup = sup.max(abs_err);
            if u == v {
                diag = diag.max(abs_err);
            }
            points.push(GridPoint {
                u,
                v,
                scaled,
                sine,
                abs_err,
            });
        }
    }
    let (a, b) = DET_POINTS;
    let d_scaled = det2(a, b, |u, v| scaled_kernel_perturbed(&spec, q, &saddle, u, v, 1e-12))?;
    let d_sine = det2(a, b, |u, v| Ok(sine_kernel(u, v)))?;
    Ok(SineRow {
        n,
        q,
        status: RowStatus::Ok,
        saddle: Some(saddle),
        sup_error: sup,
        diag_error: diag,
        det_error: (d_scaled - d_sine).abs(),
        points,
    })
}

fn grid_step(grid: &[f64]) -> f64 {
    grid.windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}

/// One row per `n` in the window: spectrum from the quantiles of `m`,
/// level `q_n = round(alpha n)`, and the distance of the scaled kernel to the
/// Sine kernel over the grid. Failures are reported per row.
pub fn sine_sup_error(m: &Measure, window: &ScalingWindow) -> Result<Vec<SineRow>> {
    window.validate()?;
    Ok(window
        .n_list
        .iter()
        .map(|&n| {
            scan_one(m, window, n).unwrap_or_else(|e| {
                let status = match e {
                    Error::OutsideAalpha { .. } => RowStatus::NotInAalpha,
                    other => RowStatus::Failed(other.to_string()),
                };
                SineRow::failed(n, level_for(window.alpha, n), status)
            })
        })
        .collect())
}

/// True when every row succeeded and `key` strictly decreases along the rows.
pub fn strictly_decreasing<F: Fn(&SineRow) -> f64>(rows: &[SineRow], key: F) -> bool {
    rows.iter().all(|r| r.status == RowStatus::Ok) && rows.windows(2).all(|w| key(&w[1]) < key(&w[0]))
}

/// `(pi/sqrt n) K_n^GUE(pi u/sqrt n, pi v/sqrt n)`: the GUE kernel around the
/// origin, where the density of eigenvalues is `sqrt(n)/pi`.
pub fn gue_scaled_kernel(n: usize, u: f64, v: f64) -> Result<f64> {
    let s = PI / (n as f64).sqrt();
    Ok(s * gue_level_kernel(n, s * u, s * v)?)
}

/// `(n, sup |scaled GUE kernel - sine|)` over `grid x grid`.
pub fn gue_bulk_sup_error(n_list: &[usize], grid: &[f64]) -> Result<Vec<(usize, f64)>> {
    n_list
        .iter()
        .map(|&n| {
            let mut sup = 0.0f64;
            for &u in grid {
                for &v in grid {
                    sup = sup.max((gue_scaled_kernel(n, u, v)? - sine_kernel(u, v)).abs());
                }
            }
            Ok((n, sup))
        })
        .collect()
}
