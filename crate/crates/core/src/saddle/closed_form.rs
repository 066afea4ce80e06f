//! Closed-form saddles for the three worked families: the semicircle law,
//! `(1-beta) delta_0 + beta delta_1`, and `(delta_{-1} + delta_0 + delta_1)/3`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Saddle;
use crate::error::{Error, Result};
use crate::measures::Measure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClosedFormExample {
    Semicircle,
    TwoAtom { beta: f64 },
    ThreeAtom,
}

impl ClosedFormExample {
    pub fn measure(&self) -> Measure {
        match *self {
            ClosedFormExample::Semicircle => Measure::semicircle(),
            ClosedFormExample::TwoAtom { beta } => Measure::two_atom(beta).expect("beta in (0,1)"),
            ClosedFormExample::ThreeAtom => Measure::three_atom(),
        }
    }

    /// Open intervals making up `A_alpha`.
    pub fn a_alpha(&self, alpha: f64) -> Vec<(f64, f64)> {
        match *self {
            ClosedFormExample::Semicircle => {
                let r = 2.0 * alpha.sqrt();
                vec![(-r, r)]
            }
            ClosedFormExample::TwoAtom { beta } => {
                let (lo, hi) = two_atom_edges(alpha, beta);
                vec![(lo, hi)]
            }
            ClosedFormExample::ThreeAtom => {
                let (cm, cp) = three_atom_edges(alpha);
                let sp = cp.sqrt();
                if alpha >= 2.0 / 3.0 {
                    let sm = cm.max(0.0).sqrt();
                    vec![(-sp, -sm), (sm, sp)]
                } else {
                    vec![(-sp, sp)]
                }
            }
        }
    }
}

/// `c_{alpha,beta}^{-/+} = (sqrt((1-alpha) beta) -/+ sqrt(alpha (1-beta)))^2`.
pub fn two_atom_edges(alpha: f64, beta: f64) -> (f64, f64) {
    let a = ((1.0 - alpha) * beta).sqrt();
    let b = (alpha * (1.0 - beta)).sqrt();
    ((a - b).powi(2), (a + b).powi(2))
}

/// `c_alpha^{-/+}` (values of `c^2`) for the three-atom law.
pub fn three_atom_edges(alpha: f64) -> (f64, f64) {
    let t = 2.0 / 3.0 - alpha;
    let g = 3.0 * alpha * alpha + 6.0 * t * alpha - t * t;
    let root = (g * g + 64.0 / 3.0 * t.powi(3) * alpha).sqrt();
    (0.375 * (g - root), 0.375 * (g + root))
}

/// Roots of `a z^3 + b z^2 + c z + d` (real coefficients, `a != 0`) by Cardano.
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 3] {
    let (b, c, d) = (b / a, c / a, d / a);
    // z = t - b/3 gives t^3 + p t + q
    let p = c - b * b / 3.0;
    let q = 2.0 * b.powi(3) / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = Complex64::new(q * q / 4.0 + p.powi(3) / 27.0, 0.0).sqrt();
    let mut u3 = Complex64::new(-q / 2.0, 0.0) + disc;
    if u3.norm() < 1e-300 {
        u3 = Complex64::new(-q / 2.0, 0.0) - disc;
    }
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let u = u3.cbrt();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut uk = u;
    for slot in out.iter_mut() {
        let t = if uk.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            uk - p / (3.0 * uk)
        };
        *slot = t + shift;
        uk *= omega;
    }
    // one Newton step each to clean up cancellation in Cardano
    for z in out.iter_mut() {
        let f = ((*z + b) * *z + c) * *z + d;
        let df = (3.0 * *z + 2.0 * b) * *z + c;
        if df.norm() > 1e-12 {
            *z -= f / df;
        }
    }
    out
}

/// The explicit `w_{alpha,c}` of each family.
pub fn closed_form_saddle(example: ClosedFormExample, alpha: f64, c: f64) -> Result<Saddle> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0,1)")));
    }
    let inside = example.a_alpha(alpha).iter().any(|&(lo, hi)| lo < c && c < hi);
    if !inside {
        return Err(Error::OutsideAalpha { c });
    }
    let b = 1.0 - alpha;
    let w = match example {
        ClosedFormExample::Semicircle => Complex64::new(b * c, b * (4.0 * alpha - c * c).sqrt()) / (2.0 * alpha),
        ClosedFormExample::TwoAtom { beta } => {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::InvalidParameter(format!("beta = {beta} outside (0,1)")));
            }
            let (lo, hi) = two_atom_edges(alpha, beta);
            let im = ((c - lo) * (hi - c)).sqrt();
            Complex64::new(-c, 0.0) + Complex64::new(alpha + c - beta, im) / (2.0 * alpha)
        }
        ClosedFormExample::ThreeAtom => {
            let z = cubic_roots(alpha, -c, 2.0 / 3.0 - alpha, c / 3.0)
                .into_iter()
                .max_by(|x, y| x.im.partial_cmp(&y.im).unwrap())
                .unwrap();
            if z.im <= 0.0 {
                return Err(Error::OutsideAalpha { c });
            }
            z - c
        }
    };
    Ok(Saddle::from_root(&example.measure(), alpha, c, w))
}

/// Density `rho_alpha(c)` of the two-atom family.
pub fn two_atom_density(alpha: f64, beta: f64, c: f64) -> f64 {
    let (lo, hi) = two_atom_edges(alpha, beta);
    if c <= lo || c >= hi {
        return 0.0;
    }
    ((c - lo) * (hi - c)).sqrt() / (2.0 * std::f64::consts::PI * c * (1.0 - c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn semicircle_example() {
        // c = 2 sqrt(alpha) is the edge of A_alpha: the root is the real double root 1.5
        assert!(matches!(
            closed_form_saddle(ClosedFormExample::Semicircle, 0.25, 1.0),
            Err(Error::OutsideAalpha { .. })
        ));
        let s = closed_form_saddle(ClosedFormExample::Semicircle, 0.25, 0.5).unwrap();
        assert!((s.w - Complex64::new(0.75, 0.75 * 3f64.sqrt())).norm() < 1e-14);
        assert!(s.residual < 1e-14);
        let s = closed_form_saddle(ClosedFormExample::Semicircle, 0.25, 0.0).unwrap();
        assert!((s.w - Complex64::new(0.0, 1.5)).norm() < 1e-15);
        assert!((s.rho - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn two_atom_example() {
        let s = closed_form_saddle(ClosedFormExample::TwoAtom { beta: 0.5 }, 0.5, 0.5).unwrap();
        assert!((s.w - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        assert!((s.rho - 1.0 / PI).abs() < 1e-15);
        assert!((s.rho - two_atom_density(0.5, 0.5, 0.5)).abs() < 1e-15);
        assert!(s.residual < 1e-14);
    }

    #[test]
    fn three_atom_excludes_zero_at_two_thirds() {
        assert!(matches!(
            closed_form_saddle(ClosedFormExample::ThreeAtom, 2.0 / 3.0, 0.0),
            Err(Error::OutsideAalpha { .. })
        ));
        let iv = ClosedFormExample::ThreeAtom.a_alpha(2.0 / 3.0);
        assert!((iv[0].0 + 1.0).abs() < 1e-12 && iv[0].1.abs() < 1e-12);
        assert!(iv[1].0.abs() < 1e-12 && (iv[1].1 - 1.0).abs() < 1e-12);
        let s = closed_form_saddle(ClosedFormExample::ThreeAtom, 2.0 / 3.0, 0.5).unwrap();
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn density_edges_are_roots_of_discriminant() {
        for &alpha in &[0.3, 0.5, 0.8] {
            let iv = ClosedFormExample::ThreeAtom.a_alpha(alpha);
            for &(lo, hi) in &iv {
                for c in [lo + 1e-6, hi - 1e-6] {
                    let s = closed_form_saddle(ClosedFormExample::ThreeAtom, alpha, c).unwrap();
                    assert!(s.w.im > 0.0 && s.w.im < 1e-2, "alpha {alpha} c {c}: {}", s.w);
                }
            }
        }
    }
}
