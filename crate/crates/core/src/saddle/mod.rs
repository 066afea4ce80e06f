//! The saddle equation `w G_mu(w + c) = 1 - alpha`: its upper-half-plane root,
//! the bulk set `A_alpha`, the atoms of `mu_alpha` and a mass audit.

mod closed_form;
mod roots;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureKind};
use crate::numeric::GaussRule;

pub use closed_form::{closed_form_saddle, three_atom_edges, two_atom_density, two_atom_edges, ClosedFormExample};
pub use roots::{IM_THRESHOLD, POLISH_RESIDUAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saddle {
    pub w: Complex64,
    pub alpha: f64,
    pub c: f64,
    /// `rho_alpha(c) = -((1 - alpha)/pi) Im(1/w)`.
    pub rho: f64,
    /// `C_{alpha,c} = exp(pi Re(1/w) / Im(1/w))`.
    pub gauge: f64,
    /// `|w G(w + c) - (1 - alpha)|`.
    pub residual: f64,
}

impl Saddle {
    pub fn from_root(m: &Measure, alpha: f64, c: f64, w: Complex64) -> Self {
        let inv = 1.0 / w;
        let residual = m
            .cauchy_transform(w + c)
            .map(|g| (w * g - (1.0 - alpha)).norm())
            .unwrap_or(f64::INFINITY);
        Saddle {
            w,
            alpha,
            c,
            rho: -(1.0 - alpha) / PI * inv.im,
            gauge: (PI * inv.re / inv.im).exp(),
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomReport {
    pub positions: Vec<f64>,
    pub masses: Vec<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0,1)")))
    }
}

/// Upper-half-plane root of `w G_mu(w + c) = 1 - alpha`; `None` when every root
/// is real (c outside `A_alpha`).
pub fn solve_saddle(m: &Measure, alpha: f64, c: f64) -> Result<Option<Saddle>> {
    check_alpha(alpha)?;
    if !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c = {c}")));
    }
    let beta = 1.0 - alpha;
    let w = match m.kind() {
        MeasureKind::Semicircle => semicircle_root(m, alpha, c),
        MeasureKind::Atomic => {
            if m.is_point_mass() {
                return Err(Error::PointMass);
            }
            let y: Vec<f64> = m.atoms().iter().map(|x| x - c).collect();
            roots::atomic_upper_root(&y, m.weights(), beta, c)?
        }
    };
    Ok(w.map(|w| Saddle::from_root(m, alpha, c, w)))
}

/// Damped Newton on `h(w) = w G(w + c) - (1 - alpha)` from the explicit root.
fn semicircle_root(m: &Measure, alpha: f64, c: f64) -> Option<Complex64> {
    let beta = 1.0 - alpha;
    let disc = 4.0 * alpha - c * c;
    // A_alpha is the open interval |c| < 2 sqrt(alpha); at its edges the root
    // is double and Newton would stall about sqrt(eps) above the axis
    if !(disc > 0.0) {
        return None;
    }
    let mut w = Complex64::new(beta * c, beta * disc.sqrt()) / (2.0 * alpha);
    let h = |w: Complex64| -> Option<(Complex64, Complex64)> {
        let g = m.cauchy_transform(w + c).ok()?;
        let dg = m.cauchy_derivative(w + c).ok()?;
        Some((w * g - beta, g + w * dg))
    };
    let (mut hv, mut dh) = h(w)?;
    for _ in 0..100 {
        if hv.norm() < 1e-15 {
            break;
        }
        let step = hv / dh;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let cand = w - step * t;
            if cand.im > 0.0 {
                if let Some((hc, dc)) = h(cand) {
                    if hc.norm() < hv.norm() {
                        w = cand;
                        hv = hc;
                        dh = dc;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (w.im > IM_THRESHOLD && hv.norm() < POLISH_RESIDUAL).then_some(w)
}

/// `G_{mu_alpha}(c + i0) = (1 - alpha) / conj(w)`.
pub fn g_mu_alpha_boundary(s: &Saddle) -> Complex64 {
    (1.0 - s.alpha) / s.w.conj()
}

/// Atoms of `mu_alpha`: atoms of mu heavier than `1 - alpha`, reduced by `1 - alpha`.
pub fn mu_alpha_atoms(m: &Measure, alpha: f64) -> Result<AtomReport> {
    check_alpha(alpha)?;
    let beta = 1.0 - alpha;
    let (positions, masses) = m
        .atoms()
        .iter()
        .zip(m.weights())
        .filter(|(_, &p)| p > beta)
        .map(|(&x, &p)| (x, p - beta))
        .unzip();
    Ok(AtomReport { positions, masses })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaScan {
    pub intervals: Vec<(f64, f64)>,
    /// Grid points where the solver reported more than one upper root.
    pub warnings: Vec<f64>,
}

fn interior_root(m: &Measure, alpha: f64, c: f64) -> std::result::Result<bool, f64> {
    match solve_saddle(m, alpha, c) {
        Ok(Some(_)) => Ok(true),
        Ok(None) => Ok(false),
        Err(_) => Err(c),
    }
}

/// Index ranges `[start, end)` of grid points with a non-real root, plus warning points.
fn scan_runs(m: &Measure, alpha: f64, grid: &[f64]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let hits: Vec<std::result::Result<bool, f64>> = grid.par_iter().map(|&c| interior_root(m, alpha, c)).collect();
    let warnings = hits.iter().filter_map(|h| h.err()).collect();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < grid.len() {
        if !matches!(hits[i], Ok(true)) {
            i += 1;
            continue;
        }
        let start = i;
        while i < grid.len() && matches!(hits[i], Ok(true)) {
            i += 1;
        }
        runs.push((start, i));
    }
    (runs, warnings)
}

/// Maximal runs of grid points with a non-real root, each widened to the
/// bracketing grid neighbours.
pub fn scan_a_alpha(m: &Measure, alpha: f64, grid: &[f64]) -> Result<AlphaScan> {
    check_alpha(alpha)?;
    if m.is_point_mass() {
        return Err(Error::PointMass);
    }
    let (runs, warnings) = scan_runs(m, alpha, grid);
    let intervals = runs
        .into_iter()
        .map(|(start, end)| {
            let lo = if start > 0 { grid[start - 1] } else { grid[start] };
            let hi = if end < grid.len() { grid[end] } else { grid[end - 1] };
            (lo, hi)
        })
        .collect();
    Ok(AlphaScan { intervals, warnings })
}

/// Uniform grid with `points` nodes strictly inside the support of m.
pub fn support_grid(m: &Measure, points: usize) -> Vec<f64> {
    let (a, b) = m.support();
    let h = (b - a) / (points + 1) as f64;
    (1..=points).map(|k| a + h * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassAudit {
    pub total: f64,
    pub continuous: f64,
    pub atomic: f64,
    /// Change between the last two quadrature refinements.
    pub tolerance: f64,
    pub intervals: Vec<(f64, f64)>,
}

const AUDIT_TOL: f64 = 1e-5;

/// Bisect between a point inside `A_alpha` and one outside.
fn refine_edge(m: &Measure, alpha: f64, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if matches!(interior_root(m, alpha, mid), Ok(true)) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

fn rho_at(m: &Measure, alpha: f64, c: f64) -> f64 {
    match solve_saddle(m, alpha, c) {
        Ok(Some(s)) => s.rho,
        _ => 0.0,
    }
}

/// `int_{A_alpha} rho_alpha(c) dc` over `panels` Gauss panels after `c = mid - half cos(theta)`,
/// which absorbs square-root and inverse-square-root edge behaviour.
fn integrate_interval(m: &Measure, alpha: f64, lo: f64, hi: f64, panels: usize, rule: &GaussRule) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let h = PI / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|k| rule.mapped(h * k as f64, h * (k + 1) as f64).collect::<Vec<_>>())
        .collect();
    nodes
        .par_iter()
        .map(|&(t, wt)| wt * half * t.sin() * rho_at(m, alpha, mid - half * t.cos()))
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Total mass of `mu_alpha` recovered from the saddle density plus atoms.
pub fn mass_audit(m: &Measure, alpha: f64, quad_points: usize) -> Result<MassAudit> {
    check_alpha(alpha)?;
    if quad_points < 100 {
        return Err(Error::InvalidParameter(format!("quad_points = {quad_points} < 100")));
    }
    if m.is_point_mass() {
        return Err(Error::PointMass);
    }
    let grid = support_grid(m, 4000);
    let (a, b) = m.support();
    let (runs, _) = scan_runs(m, alpha, &grid);
    let intervals: Vec<(f64, f64)> = runs
        .into_iter()
        .map(|(start, end)| {
            let out_lo = if start > 0 { grid[start - 1] } else { a };
            let out_hi = if end < grid.len() { grid[end] } else { b };
            (
                refine_edge(m, alpha, grid[start], out_lo),
                refine_edge(m, alpha, grid[end - 1], out_hi),
            )
        })
        .collect();

    let rule = GaussRule::new(8);
    let mut panels = (quad_points / 8).max(1);
    let eval = |panels: usize| -> f64 {
        intervals
            .iter()
            .map(|&(lo, hi)| integrate_interval(m, alpha, lo, hi, panels, &rule))
            .sum()
    };
    let mut prev = eval(panels);
    let mut discrepancy = f64::INFINITY;
    for _ in 0..6 {
        panels *= 2;
        let next = eval(panels);
        discrepancy = (next - prev).abs();
        prev = next;
        if discrepancy < AUDIT_TOL * 0.1 {
            break;
        }
    }
    let atoms = mu_alpha_atoms(m, alpha)?;
    let atomic: f64 = atoms.masses.iter().sum();
    if discrepancy > AUDIT_TOL {
        return Err(Error::QuadratureNonConvergence {
            estimate: prev + atomic,
            discrepancy,
        });
    }
    Ok(MassAudit {
        total: prev + atomic,
        continuous: prev,
        atomic,
        tolerance: discrepancy,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solve_examples() {
        let s = solve_saddle(&Measure::semicircle(), 0.25, 0.0).unwrap().unwrap();
        assert!((s.w - Complex64::new(0.0, 1.5)).norm() < 1e-12);
        assert!((s.rho - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!(s.residual < 1e-12);

        let two = Measure::two_atom(0.5).unwrap();
        let s = solve_saddle(&two, 0.5, 0.5).unwrap().unwrap();
        assert!((s.w - Complex64::new(0.0, 0.5)).norm() < 1e-12);
        assert!((s.rho - 1.0 / PI).abs() < 1e-12);
        assert!(solve_saddle(&two, 0.5, 1.5).unwrap().is_none());

        let point = Measure::atomic(vec![0.3], vec![1.0]).unwrap();
        assert!(matches!(solve_saddle(&point, 0.5, 0.3), Err(Error::PointMass)));
        assert!(solve_saddle(&two, 1.5, 0.5).is_err());
    }

    #[test]
    fn semicircle_density_scaling() {
        // rho = sqrt(alpha) rho_sc(c / sqrt(alpha))
        let alpha: f64 = 0.25;
        for &c in &[-0.9, -0.3, 0.0, 0.6] {
            let s = solve_saddle(&Measure::semicircle(), alpha, c).unwrap().unwrap();
            let expected = alpha.sqrt() * crate::measures::semicircle_density(c / alpha.sqrt());
            assert!((s.rho - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_examples() {
        let grid: Vec<f64> = (-1999..=1999).map(|k| k as f64 * 1e-3).collect();
        let scan = scan_a_alpha(&Measure::semicircle(), 0.25, &grid).unwrap();
        assert_eq!(scan.intervals.len(), 1);
        let (lo, hi) = scan.intervals[0];
        assert!((lo + 1.0).abs() <= 2e-3 && (hi - 1.0).abs() <= 2e-3);

        let grid: Vec<f64> = (-999..=999).map(|k| k as f64 * 1e-3).collect();
        let scan = scan_a_alpha(&Measure::three_atom(), 2.0 / 3.0, &grid).unwrap();
        assert_eq!(scan.intervals.len(), 2, "{:?}", scan.intervals);

        let grid: Vec<f64> = (1..1000).map(|k| k as f64 * 1e-3).collect();
        let scan = scan_a_alpha(&Measure::two_atom(0.5).unwrap(), 0.5, &grid).unwrap();
        assert_eq!(scan.intervals.len(), 1);
        let (lo, hi) = scan.intervals[0];
        assert!(lo <= 2e-3 && (hi - 1.0).abs() <= 2e-3);
    }

    #[test]
    fn atom_examples() {
        let m = Measure::two_atom(0.9).unwrap();
        let r = mu_alpha_atoms(&m, 0.5).unwrap();
        assert_eq!(r.positions, vec![1.0]);
        assert!((r.masses[0] - 0.4).abs() < 1e-15);
        assert!(mu_alpha_atoms(&Measure::two_atom(0.5).unwrap(), 0.4)
            .unwrap()
            .positions
            .is_empty());
        assert!(mu_alpha_atoms(&Measure::semicircle(), 0.3)
            .unwrap()
            .positions
            .is_empty());
    }

    #[test]
    fn mass_audit_examples() {
        let r = mass_audit(&Measure::two_atom(0.5).unwrap(), 0.5, 200).unwrap();
        assert!((r.total - 0.5).abs() < 1e-6, "{r:?}");
        let r = mass_audit(&Measure::semicircle(), 0.25, 200).unwrap();
        assert!((r.total - 0.25).abs() < 1e-6, "{r:?}");
        let r = mass_audit(&Measure::two_atom(0.9).unwrap(), 0.5, 200).unwrap();
        assert!((r.total - 0.5).abs() < 1e-6, "{r:?}");
        assert!((r.atomic - 0.4).abs() < 1e-12);
    }

    #[test]
    fn boundary_value_examples() {
        let s = solve_saddle(&Measure::semicircle(), 0.25, 0.0).unwrap().unwrap();
        let g = g_mu_alpha_boundary(&s);
        assert!((g - Complex64::new(0.0, 0.5)).norm() < 1e-12);
        assert!((g.im / PI - s.rho).abs() < 1e-12);
        let s = solve_saddle(&Measure::two_atom(0.5).unwrap(), 0.5, 0.5)
            .unwrap()
            .unwrap();
        let g = g_mu_alpha_boundary(&s);
        assert!((g - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn equal_weight_roots_are_consistent(
            raw in proptest::collection::vec(-2.0f64..2.0, 2..12),
            alpha in 0.05f64..0.95,
            t in 0.0f64..1.0,
        ) {
            let mut x = raw.clone();
            x.sort_by(|a, b| a.partial_cmp(b).unwrap());
            x.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            prop_assume!(x.len() >= 2);
            let n = x.len();
            let m = Measure::atomic(x.clone(), vec![1.0 / n as f64; n]).unwrap();
            let c = x[0] + t * (x[n - 1] - x[0]);
            prop_assume!(x.iter().all(|a| (a - c).abs() > 1e-6));
            match solve_saddle(&m, alpha, c).unwrap() {
                Some(s) => {
                    prop_assert!(s.w.im > 0.0 && s.rho > 0.0 && s.residual < 1e-10);
                    prop_assert!((s.rho + (1.0 - alpha) / PI * (1.0 / s.w).im).abs() < 1e-14);
                    // subordination at the boundary point
                    let g = g_mu_alpha_boundary(&s);
                    let back = m.cauchy_transform(c + (1.0 - alpha) / g).unwrap();
                    prop_assert!((back - g).norm() < 1e-10 * (1.0 + g.norm()));
                    prop_assert!(m.point_weight(c) < 1.0 - alpha);
                }
                None => {}
            }
        }
    }
}
