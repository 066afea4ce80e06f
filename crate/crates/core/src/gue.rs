//! GUE eigenvalue and minor-process kernels built from monic Hermite
//! polynomials, and the orthogonal-polynomial (Rodrigues) route to the same
//! minor kernel.

use std::f64::consts::PI;

use libm::erfc;

use crate::error::{Error, Result};
use crate::numeric::{ln_factorial, GaussRule, NeumaierSum};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Monic Hermite `He_j(x)`: `He_0 = 1`, `He_1 = x`, `He_{j+1} = x He_j - j He_{j-1}`.
pub fn hermite(j: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if j == 0 {
        return a;
    }
    for k in 1..j {
        let next = x * b - k as f64 * a;
        a = b;
        b = next;
    }
    b
}

/// `He_0(x), ..., He_d(x)`.
pub fn hermite_all(d: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d + 1);
    out.push(1.0);
    if d >= 1 {
        out.push(x);
    }
    for k in 1..d {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// `He_j(x) / sqrt(j!)` for `j = 0..=d`; stays finite where `He_j` itself overflows.
pub fn hermite_normalized(d: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d + 1);
    out.push(1.0);
    if d >= 1 {
        out.push(x);
    }
    for i in 1..d {
        let next = (x * out[i] - (i as f64).sqrt() * out[i - 1]) / ((i + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// A family `psi_j` orthogonal for `e^{-V}` and satisfying a generalized
/// Rodrigues formula `psi_j^{(k)} = a_{j,k} alpha^{-k} e^V (d/dx)^{j-k}(alpha^j e^{-V})`.
pub trait RodriguesFamily {
    fn psi(&self, j: usize, x: f64) -> f64;
    /// `psi_j^{(k)}(x)`.
    fn psi_derivative(&self, j: usize, k: usize, x: f64) -> f64;
    /// `c_j^2 = int psi_j^2 e^{-V}`.
    fn norm_sq(&self, j: usize) -> f64;
    fn potential(&self, x: f64) -> f64;
    fn alpha(&self, x: f64) -> f64;
    fn rodrigues_coefficient(&self, j: usize, k: usize) -> f64;
}

/// Monic Hermite polynomials for the weight `e^{-x^2/2}`.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    max_degree: usize,
}

impl HermiteBasis {
    pub fn new(max_degree: usize) -> Self {
        HermiteBasis { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn values(&self, x: f64) -> Vec<f64> {
        hermite_all(self.max_degree, x)
    }
}

impl RodriguesFamily for HermiteBasis {
    fn psi(&self, j: usize, x: f64) -> f64 {
        hermite(j, x)
    }

    fn psi_derivative(&self, j: usize, k: usize, x: f64) -> f64 {
        if k > j {
            return 0.0;
        }
        (ln_factorial(j) - ln_factorial(j - k)).exp() * hermite(j - k, x)
    }

    fn norm_sq(&self, j: usize) -> f64 {
        ln_factorial(j).exp() * SQRT_2PI
    }

    fn potential(&self, x: f64) -> f64 {
        0.5 * x * x
    }

    fn alpha(&self, _x: f64) -> f64 {
        1.0
    }

    fn rodrigues_coefficient(&self, j: usize, k: usize) -> f64 {
        let sign = if (j - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * (ln_factorial(j) - ln_factorial(j - k)).exp()
    }
}

/// `K_n(u, v) = sum_{i<n} He_i(u) He_i(v) e^{-(u^2+v^2)/4} / (sqrt(2 pi) i!)`.
pub fn gue_level_kernel(n: usize, u: f64, v: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let hu = hermite_normalized(n - 1, u);
    let hv = hermite_normalized(n - 1, v);
    let mut s = NeumaierSum::new();
    for i in 0..n {
        s.add(hu[i] * hv[i]);
    }
    Ok(s.value() * (-(u * u + v * v) / 4.0).exp() / SQRT_2PI)
}

/// `I_k(u) = int_u^inf (x-u)^k/k! e^{-x^2/2} dx` for `k = 0..=kmax`.
///
/// Forward recurrence `(k+1) I_{k+1} = I_{k-1} - u I_k` (with `I_{-1} = e^{-u^2/2}`)
/// is exact in exact arithmetic but cancels for `u > 0`; once it has lost about
/// six digits in total the remaining orders come from quadrature.
pub fn incomplete_moments(kmax: usize, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    let mut prev = (-0.5 * u * u).exp();
    let mut cur = (PI / 2.0).sqrt() * erfc(u / std::f64::consts::SQRT_2);
    out.push(cur);
    let mut lost = 1.0;
    for k in 0..kmax {
        let a = prev;
        let b = u * cur;
        let next = (a - b) / (k + 1) as f64;
        // errors compound, so track the accumulated amplification
        lost *= a.abs().max(b.abs()) / (a - b).abs();
        if !(lost < 1e6) || !(next > 0.0) {
            for kk in k + 1..=kmax {
                out.push(incomplete_moment_quadrature(kk, u));
            }
            return out;
        }
        out.push(next);
        prev = cur;
        cur = next;
    }
    out
}

/// `I_k(u) = int_0^inf t^k/k! e^{-(t+u)^2/2} dt` by Gauss-Legendre panels.
pub fn incomplete_moment_quadrature(k: usize, u: f64) -> f64 {
    let lnk = ln_factorial(k);
    // integrand peaks where k/t = t + u
    let peak = 0.5 * (-u + (u * u + 4.0 * k as f64).sqrt());
    let end = peak + 40.0 / (peak + u).max(1.0) + 12.0;
    let rule = GaussRule::new(20);
    let panels = 64;
    let h = end / panels as f64;
    let mut acc = NeumaierSum::new();
    for p in 0..panels {
        let v = rule.integrate(h * p as f64, h * (p + 1) as f64, |t| {
            if t <= 0.0 {
                return if k == 0 { (-0.5 * u * u).exp() } else { 0.0 };
            }
            (k as f64 * t.ln() - lnk - 0.5 * (t + u) * (t + u)).exp()
        });
        acc.add(v);
    }
    acc.value()
}

fn check_levels(n: usize, r: usize, s: usize) -> Result<()> {
    for &l in &[r, s] {
        if l == 0 || l > n {
            return Err(Error::LevelOutOfRange { level: l, max: n });
        }
    }
    Ok(())
}

/// GUE minor-process kernel `J_n((r,u),(s,v))`.
///
/// The first sum runs over `i = -min(r,s)..-1`; earlier terms vanish because
/// Hermite polynomials of negative degree are zero.
pub fn gue_minor_kernel(n: usize, r: usize, u: f64, s: usize, v: f64) -> Result<f64> {
    check_levels(n, r, s)?;
    let d = r.max(s);
    let hu = hermite_normalized(d, u);
    let hv = hermite_normalized(d, v);
    let mut first = NeumaierSum::new();
    for i in 1..=r.min(s) {
        let (a, b) = (r - i, s - i);
        // He_a(u) He_b(v) / b! = h_a h_b sqrt(a!/b!)
        let scale = (0.5 * (ln_factorial(a) - ln_factorial(b))).exp();
        first.add(hu[a] * hv[b] * scale);
    }
    let mut total = first.value() * (-(u * u + v * v) / 4.0).exp() / SQRT_2PI;
    if s > r {
        let top = s - r - 1;
        let hv_raw = hermite_all(top, v);
        let mut second = NeumaierSum::new();
        if v > u {
            // The polynomial (v-u)^top/top! is the full-line version of the
            // sum, so only the lower tail int_{-inf}^u survives.
            let moments = incomplete_moments(top, -u);
            for l in 0..=top {
                let sign = if (top - l).is_multiple_of(2) { -1.0 } else { 1.0 };
                second.add(sign * hv_raw[l] / (SQRT_2PI * ln_factorial(l).exp()) * moments[top - l]);
            }
        } else {
            let moments = incomplete_moments(top, u);
            for l in 0..=top {
                second.add(hv_raw[l] / (SQRT_2PI * ln_factorial(l).exp()) * moments[top - l]);
            }
        }
        total += ((u * u - v * v) / 4.0).exp() * second.value();
    }
    Ok(total)
}

/// `int (x-u)^m/m! He_j(x) e^{-x^2/2} dx` over `[u, inf)` (or `(-inf, u]` when
/// `lower`) for `j = 0..=jmax`. Since `He_j e^{-x^2/2} = (-d/dx)^j e^{-x^2/2}`,
/// integrating by parts gives `I_{m-j}(u)` for `j <= m` and
/// `He_{j-m-1}(u) e^{-u^2/2}` for `j > m`; the lower tail mirrors this.
fn moment_integrals(jmax: usize, m: usize, u: f64, lower: bool) -> Vec<f64> {
    let moments = if lower {
        incomplete_moments(m, -u)
    } else {
        incomplete_moments(m, u)
    };
    let he = hermite_all(jmax.saturating_sub(m + 1), u);
    let g = (-0.5 * u * u).exp();
    (0..=jmax)
        .map(|j| match (j <= m, lower) {
            (true, false) => moments[m - j],
            (true, true) => {
                if (m - j).is_multiple_of(2) {
                    moments[m - j]
                } else {
                    -moments[m - j]
                }
            }
            (false, false) => he[j - m - 1] * g,
            (false, true) => -he[j - m - 1] * g,
        })
        .collect()
}

/// Minor kernel from the orthogonal-polynomial formula with `psi_j = He_j`,
/// `V(x) = x^2/2`:
///
/// `K = sum_{j=n-s}^{n-1} c_j^{-2} He_j^{(n-s)}(v) int_u^inf (x-u)^{n-r-1}/(n-r-1)! He_j(x) e^{-V} dx
///      - 1{v>u, s>r} (v-u)^{s-r-1}/(s-r-1)!`.
///
/// For `v > u` the polynomial term is absorbed by the full-line identity, leaving
/// `-sum ... int_{-inf}^u`, which avoids the cancellation. Agrees with
/// [`gue_minor_kernel`] up to the gauge factor `e^{(u^2 - v^2)/4}`.
pub fn uie_minor_kernel_gue(n: usize, r: usize, s: usize, u: f64, v: f64) -> Result<f64> {
    check_levels(n, r, s)?;
    if r > n - 1 {
        return Err(Error::LevelOutOfRange { level: r, max: n - 1 });
    }
    let basis = HermiteBasis::new(n - 1);
    let m = n - r - 1;
    let lower = v > u;
    let integrals = moment_integrals(n - 1, m, u, lower);
    let mut acc = NeumaierSum::new();
    for j in (n - s)..n {
        acc.add(basis.psi_derivative(j, n - s, v) / basis.norm_sq(j) * integrals[j]);
    }
    Ok(if lower { -acc.value() } else { acc.value() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite(0, 3.7), 1.0);
        assert_eq!(hermite(2, 0.0), -1.0);
        assert_eq!(hermite(3, 2.0), 2.0); // x^3 - 3x
        let rule = GaussRule::new(60);
        let v = rule.integrate(-12.0, 12.0, |x| hermite(1, x).powi(2) * (-0.5 * x * x).exp());
        assert!((v - SQRT_2PI).abs() < 1e-10);
        let w = rule.integrate(-12.0, 12.0, |x| hermite(2, x) * hermite(3, x) * (-0.5 * x * x).exp());
        assert!(w.abs() < 1e-10);
    }

    #[test]
    fn level_kernel_examples() {
        let k = gue_level_kernel(1, 0.0, 0.0).unwrap();
        assert!((k - 1.0 / SQRT_2PI).abs() < 1e-15);
        assert_eq!(
            gue_level_kernel(4, 0.3, -1.1).unwrap(),
            gue_level_kernel(4, -1.1, 0.3).unwrap()
        );
        let rule = GaussRule::new(80);
        let mass = rule.integrate(-15.0, 15.0, |u| gue_level_kernel(3, u, u).unwrap());
        assert!((mass - 3.0).abs() < 1e-8);
    }

    #[test]
    fn incomplete_moment_examples() {
        assert!((incomplete_moments(0, 0.0)[0] - (PI / 2.0).sqrt()).abs() < 1e-15);
        // recurrence vs quadrature across the unstable side
        for &u in &[-3.0, -0.5, 0.0, 0.7, 2.5, 6.0] {
            let rec = incomplete_moments(14, u);
            for (k, &val) in rec.iter().enumerate() {
                let q = incomplete_moment_quadrature(k, u);
                assert!((val - q).abs() <= 1e-9 * q.abs(), "u={u} k={k}: {val} vs {q}");
                assert!(val > 0.0);
            }
        }
    }

    #[test]
    fn minor_kernel_reduces_to_level_kernel() {
        for r in 1..=4 {
            for &(u, v) in &[(0.0, 0.0), (0.5, -1.2), (2.0, 1.5)] {
                let j = gue_minor_kernel(4, r, u, r, v).unwrap();
                let k = gue_level_kernel(r, u, v).unwrap();
                assert!((j - k).abs() < 1e-12);
            }
        }
        assert!(gue_minor_kernel(4, 5, 0.0, 1, 0.0).is_err());
    }

    #[test]
    fn uie_examples() {
        let a = uie_minor_kernel_gue(3, 2, 2, 0.0, 0.0).unwrap();
        let b = gue_minor_kernel(3, 2, 0.0, 2, 0.0).unwrap();
        assert!((a - b).abs() < 1e-12);
        let a = uie_minor_kernel_gue(3, 1, 2, 0.5, -0.5).unwrap();
        let b = gue_minor_kernel(3, 1, 0.5, 2, -0.5).unwrap();
        assert!((a - b).abs() < 1e-12);
        let (u, v) = (0.3, 0.7);
        let a = uie_minor_kernel_gue(4, 2, 3, u, v).unwrap();
        let b = gue_minor_kernel(4, 2, u, 3, v).unwrap();
        assert!((b / a - (-0.1f64).exp()).abs() < 1e-10, "{}", b / a);
    }

    proptest! {
        #[test]
        fn gauge_relation_holds(
            n in 2usize..8,
            rr in 0usize..8,
            ss in 0usize..8,
            u in -2.5f64..2.5,
            v in -2.5f64..2.5,
        ) {
            let r = 1 + rr % (n - 1);
            let s = 1 + ss % n;
            let j = gue_minor_kernel(n, r, u, s, v).unwrap();
            let k = uie_minor_kernel_gue(n, r, s, u, v).unwrap();
            let gauge = ((u * u - v * v) / 4.0).exp();
            prop_assert!((j - gauge * k).abs() < 1e-9 * j.abs().max(1.0), "{} vs {}", j, gauge * k);
        }
    }
}
