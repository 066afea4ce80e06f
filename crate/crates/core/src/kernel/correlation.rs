//! Correlation determinants and the level counting identity.

use super::{kernel_fixed_top, KernelPoint, KernelSpec};
use crate::error::{Error, Result};
use crate::numeric::{determinant, panel_edges, GaussRule};

/// Largest number of points accepted by [`correlation_det`].
pub const MAX_POINTS: usize = 8;

/// `det[K(p_i, p_j)]`, the m-point correlation density.
pub fn correlation_det(spec: &KernelSpec, points: &[KernelPoint]) -> Result<f64> {
    if points.len() > MAX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "{} points exceed the limit of {MAX_POINTS}",
            points.len()
        )));
    }
    let mut m = vec![vec![0.0; points.len()]; points.len()];
    for (j, q) in points.iter().enumerate() {
        let row = spec.row(q.level, q.position)?;
        for (i, p) in points.iter().enumerate() {
            m[i][j] = row.eval(p.level, p.position)?;
        }
    }
    Ok(determinant(m))
}

/// `int K((r,u),(r,u)) du` over the spectrum's bounds; equals r.
///
/// On each interval between atoms the diagonal is a polynomial of degree
/// below 2n, so a Gauss rule with more than n nodes per panel is exact; the
/// doubled rule serves as the convergence check.
pub fn level_mass(spec: &KernelSpec, r: usize, quad_points: usize) -> Result<f64> {
    spec.check_levels(r, r)?;
    let (a, b) = spec.spectrum().bounds();
    let edges = panel_edges(a, b, spec.spectrum().values());
    let order = quad_points.max(spec.n() + 1);
    let integrate = |order: usize| -> Result<f64> {
        let rule = GaussRule::new(order);
        let mut total = 0.0;
        for w in edges.windows(2) {
            total += rule.try_integrate(w[0], w[1], |u| kernel_fixed_top(spec, r, r, u, u))?;
        }
        Ok(total)
    };
    let coarse = integrate(order)?;
    let fine = integrate(2 * order)?;
    let discrepancy = (fine - coarse).abs();
    if discrepancy > 1e-9 * (r as f64).max(1.0) {
        return Err(Error::QuadratureNonConvergence {
            estimate: fine,
            discrepancy,
        });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::Spectrum;

    #[test]
    fn level_mass_examples() {
        let spec = KernelSpec::from_values(vec![1.0, 0.0]).unwrap();
        assert!((level_mass(&spec, 1, 16).unwrap() - 1.0).abs() < 1e-8);
        let spec = KernelSpec::from_values(vec![2.0, 1.0, 0.0]).unwrap();
        assert!((level_mass(&spec, 2, 16).unwrap() - 2.0).abs() < 1e-6);
        let spec = KernelSpec::new(Spectrum::equispaced(6).unwrap());
        assert!((level_mass(&spec, 3, 16).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn correlation_examples() {
        let spec = KernelSpec::from_values(vec![1.0, 0.0]).unwrap();
        let one = correlation_det(&spec, &[KernelPoint::new(1, 0.3)]).unwrap();
        assert!((one - 1.0).abs() < 1e-14);
        let two = correlation_det(&spec, &[KernelPoint::new(1, 0.3), KernelPoint::new(1, 0.8)]).unwrap();
        assert!(two.abs() < 1e-10);
        let spec = KernelSpec::from_values(vec![2.0, 1.0, 0.0]).unwrap();
        let pts = [
            KernelPoint::new(2, 0.3),
            KernelPoint::new(2, 1.2),
            KernelPoint::new(2, 1.7),
        ];
        assert!(correlation_det(&spec, &pts).unwrap().abs() < 1e-8);
        let too_many = vec![KernelPoint::new(1, 0.5); 9];
        assert!(correlation_det(&spec, &too_many).is_err());
    }
}
