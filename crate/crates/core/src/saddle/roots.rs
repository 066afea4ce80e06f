//! Upper-half-plane root of `f(w) = sum_i p_i/(w - y_i) - beta/w` for finite atomic
//! measures (`y_i = x_i - c`, `beta = 1 - alpha`).
//!
//! The cleared polynomial `P(w) = w prod_i (w - y_i) f(w)` has degree n. Its
//! monomial coefficients are useless when atoms cluster (quantile spectra put
//! dozens of atoms within 1e-9 of each other), so Aberth-Ehrlich runs on the
//! implicit form `P'/P = f'/f + sum_i 1/(w - y_i) + 1/w` and never expands P.
//! When Aberth stalls we bracket the n-2 interlacing real roots instead and
//! recover the remaining pair from the two outer Vieta relations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{LogSigned, NeumaierSum};

/// Roots with imaginary part above this count as genuinely non-real.
pub const IM_THRESHOLD: f64 = 1e-9;
/// Target for `|w f(w)|` after polishing.
pub const POLISH_RESIDUAL: f64 = 1e-12;

const ABERTH_MAX_ITER: usize = 600;

pub(crate) struct AtomicSaddleEq<'a> {
    pub y: &'a [f64],
    pub p: &'a [f64],
    pub beta: f64,
}

impl AtomicSaddleEq<'_> {
    /// `(f, f')` at `w`.
    fn eval(&self, w: Complex64) -> (Complex64, Complex64) {
        let mut f = -self.beta / w;
        let mut df = self.beta / (w * w);
        for (&y, &p) in self.y.iter().zip(self.p) {
            let inv = 1.0 / (w - y);
            f += p * inv;
            df -= p * inv * inv;
        }
        (f, df)
    }

    /// `|w G(w + c) - (1 - alpha)| = |w f(w)|`.
    pub fn residual(&self, w: Complex64) -> f64 {
        (w * self.eval(w).0).norm()
    }

    fn log_derivative(&self, w: Complex64) -> Complex64 {
        let (f, df) = self.eval(w);
        let mut s = df / f + 1.0 / w;
        for &y in self.y {
            s += 1.0 / (w - y);
        }
        s
    }

    fn mass(&self) -> f64 {
        self.p.iter().sum()
    }

    fn degree(&self) -> usize {
        if (self.mass() - self.beta).abs() > 1e-14 {
            self.y.len()
        } else {
            self.y.len() - 1
        }
    }

    /// Poles of f sorted ascending, with residues.
    fn poles(&self) -> Vec<(f64, f64)> {
        let mut poles: Vec<(f64, f64)> = self.y.iter().copied().zip(self.p.iter().copied()).collect();
        poles.push((0.0, -self.beta));
        poles.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        poles
    }

    /// Gaps between consecutive poles of equal-sign residue; each holds a real root.
    fn guaranteed_gaps(&self) -> Vec<(f64, f64)> {
        self.poles()
            .windows(2)
            .filter(|w| w[0].1 > 0.0 && w[1].1 > 0.0 && w[1].0 > w[0].0)
            .map(|w| (w[0].0, w[1].0))
            .collect()
    }

    /// Newton on f from `w0`; `None` unless the residual target is met.
    fn polish(&self, w0: Complex64) -> Option<Complex64> {
        let mut w = w0;
        let mut best = (self.residual(w), w);
        for _ in 0..60 {
            let (f, df) = self.eval(w);
            if !df.is_finite() || df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            w -= step;
            if !w.is_finite() {
                break;
            }
            let r = self.residual(w);
            if r < best.0 {
                best = (r, w);
            }
            if step.norm() <= 1e-16 * w.norm() {
                break;
            }
        }
        (best.0 < POLISH_RESIDUAL).then_some(best.1)
    }

    fn aberth(&self) -> Option<Vec<Complex64>> {
        let deg = self.degree();
        let gaps = self.guaranteed_gaps();
        let mut z: Vec<Complex64> = gaps
            .iter()
            .take(deg)
            .map(|&(a, b)| Complex64::new(0.5 * (a + b), 0.0))
            .collect();
        let lo = self.y.iter().copied().fold(0.0f64, f64::min);
        let hi = self.y.iter().copied().fold(0.0f64, f64::max);
        let radius = 0.5 * (hi - lo).max(1e-3);
        let mut k = 0usize;
        while z.len() < deg {
            // not conjugate-symmetric, so the iteration can leave the real axis
            let theta = 0.4 + 2.3 * k as f64;
            let r = radius * (0.6 + 0.15 * k as f64);
            z.push(Complex64::from_polar(r, theta));
            k += 1;
        }
        for _ in 0..ABERTH_MAX_ITER {
            let mut moved = false;
            for i in 0..z.len() {
                let ratio = self.log_derivative(z[i]);
                let newton = 1.0 / ratio;
                let mut repel = Complex64::new(0.0, 0.0);
                for (j, zj) in z.iter().enumerate() {
                    if j != i {
                        repel += 1.0 / (z[i] - zj);
                    }
                }
                let step = newton / (1.0 - newton * repel);
                if !step.is_finite() {
                    continue;
                }
                z[i] -= step;
                if step.norm() > 1e-14 * (1.0 + z[i].norm()) {
                    moved = true;
                }
            }
            if !moved {
                return Some(z);
            }
        }
        None
    }

    /// Bisection for the real root inside a guaranteed gap.
    fn bracket_root(&self, a: f64, b: f64) -> f64 {
        let f = |x: f64| -> f64 {
            let mut s = NeumaierSum::new();
            s.add(-self.beta / x);
            for (&y, &p) in self.y.iter().zip(self.p) {
                s.add(p / (x - y));
            }
            s.value()
        };
        // f runs from -inf just right of a to +inf just left of b
        let (mut lo, mut hi) = (a, b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Real roots in the guaranteed gaps plus the pair left over by Vieta.
    fn vieta_pair(&self) -> Result<Option<Complex64>> {
        let deg = self.degree();
        let n = self.y.len();
        if deg != n || self.y.contains(&0.0) {
            return Err(Error::NoConvergence);
        }
        let gaps = self.guaranteed_gaps();
        if gaps.len() + 2 != deg {
            // at most one root left over and it must be real
            return Ok(None);
        }
        let roots: Vec<f64> = gaps.iter().map(|&(a, b)| self.bracket_root(a, b)).collect();
        let total_y: f64 = self.y.iter().sum();
        let lead = self.mass() - self.beta;
        let mut next = NeumaierSum::new();
        for (&y, &p) in self.y.iter().zip(self.p) {
            next.add(-p * (total_y - y));
        }
        next.add(self.beta * total_y);
        let mut pair_sum = NeumaierSum::new();
        pair_sum.add(-next.value() / lead);
        for &r in &roots {
            pair_sum.add(-r);
        }
        let s = pair_sum.value();
        // product of all roots = -beta prod(y) / lead
        let mut prod = LogSigned::from_f64(-self.beta / lead);
        for &y in self.y {
            prod = prod * LogSigned::from_f64(y);
        }
        for &r in &roots {
            prod = prod / LogSigned::from_f64(r);
        }
        let p = prod.to_f64();
        let disc = s * s - 4.0 * p;
        if disc >= 0.0 {
            return Ok(None);
        }
        Ok(Some(Complex64::new(0.5 * s, 0.5 * (-disc).sqrt())))
    }
}

/// Distinct polished roots with `Im > IM_THRESHOLD`.
fn upper_candidates(eq: &AtomicSaddleEq, raw: &[Complex64]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::new();
    for &z in raw {
        if z.im.abs() <= IM_THRESHOLD {
            continue;
        }
        let seed = if z.im > 0.0 { z } else { z.conj() };
        if let Some(w) = eq.polish(seed) {
            if w.im > IM_THRESHOLD && !out.iter().any(|o| (o - w).norm() < 1e-8 * (1.0 + w.norm())) {
                out.push(w);
            }
        }
    }
    out
}

/// Upper root for the atoms `y_i = x_i - c` with weights `p_i`.
pub(crate) fn atomic_upper_root(y: &[f64], p: &[f64], beta: f64, c: f64) -> Result<Option<Complex64>> {
    let eq = AtomicSaddleEq { y, p, beta };
    let found = match eq.aberth() {
        Some(raw) => upper_candidates(&eq, &raw),
        None => match eq.vieta_pair()? {
            Some(seed) => upper_candidates(&eq, &[seed]),
            None => Vec::new(),
        },
    };
    match found.len() {
        0 => Ok(None),
        1 => Ok(Some(found[0])),
        count => Err(Error::MultipleUpperRoots { count, c }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vieta_route_matches_aberth() {
        for &(c, alpha) in &[(0.5, 0.5), (0.3, 0.4), (0.7, 0.8)] {
            let y = [-c, 1.0 - c];
            let p = [0.5, 0.5];
            let eq = AtomicSaddleEq {
                y: &y,
                p: &p,
                beta: 1.0 - alpha,
            };
            let a = upper_candidates(&eq, &eq.aberth().unwrap());
            let v = upper_candidates(&eq, &[eq.vieta_pair().unwrap().unwrap()]);
            assert_eq!(a.len(), 1);
            assert!((a[0] - v[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn clustered_atoms_keep_single_pair() {
        // two tight clusters, as produced by quantile spectra of two-point laws
        let n = 120;
        let eps = 1e-9 / n as f64;
        let mut x: Vec<f64> = (0..n / 2).map(|k| eps * k as f64).collect();
        x.extend((0..n / 2).map(|k| 1.0 - eps * k as f64));
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let y: Vec<f64> = x.iter().map(|v| v - 0.5).collect();
        let p = vec![1.0 / n as f64; n];
        let w = atomic_upper_root(&y, &p, 0.5, 0.5).unwrap().unwrap();
        assert!((w - Complex64::new(0.0, 0.5)).norm() < 1e-6, "{w}");
        let eq = AtomicSaddleEq {
            y: &y,
            p: &p,
            beta: 0.5,
        };
        let v = upper_candidates(&eq, &[eq.vieta_pair().unwrap().unwrap()]);
        assert!((v[0] - w).norm() < 1e-10);
    }
}
