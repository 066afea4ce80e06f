//! Equal-level kernel as a double contour integral
//!
//! ```text
//! K((r,u),(r,v)) = 1/(4 pi^2) oint_gamma dw oint_Gamma dz
//!     ((z+v-u)^{n-r} - z^{n-r}) / ((v-u) w^{n-r+1})
//!     * sum_j (v-x_j)/(z+v-x_j)^2 prod_{i!=j} (w+v-x_i)/(z+v-x_i)
//! ```
//!
//! gamma circles 0; Gamma encloses the shifted atoms `x_j - v` with `x_j > u`
//! (clockwise) when `v <= u`, and those with `x_j <= u` (counter-clockwise)
//! otherwise. Both are discretized by the periodic trapezoid rule.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::multiprec::{mp, mp_one, mp_uint, mp_zero, to_f64, Mp};
use super::KernelSpec;
use crate::error::{Error, Result};

/// Largest node count tried before giving up.
pub const MAX_NODES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourQuad {
    /// Initial node count per contour; doubled until converged.
    pub nodes: usize,
    /// Relative agreement of successive refinements.
    pub tol: f64,
}

impl Default for ContourQuad {
    fn default() -> Self {
        ContourQuad { nodes: 64, tol: 1e-12 }
    }
}

/// A circle in the z-plane and the orientation factor of the enclosed poles.
struct Circle {
    center: f64,
    radius: f64,
    orientation: f64,
    /// Closest approach of an excluded or enclosed pole, relative to the radius.
    clearance: f64,
}

/// Smallest circle through the midpoints of the gaps that isolate `inside`
/// (a contiguous run of sorted poles) from the rest.
fn isolating_circle(poles: &[f64], inside: &[bool], orientation: f64, span: f64) -> Option<Circle> {
    let enclosed: Vec<f64> = poles.iter().zip(inside).filter(|(_, &k)| k).map(|(&p, _)| p).collect();
    if enclosed.is_empty() {
        return None;
    }
    let lo = enclosed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = enclosed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let below = poles
        .iter()
        .zip(inside)
        .filter(|(&p, &k)| !k && p < lo)
        .map(|(&p, _)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    let above = poles
        .iter()
        .zip(inside)
        .filter(|(&p, &k)| !k && p > hi)
        .map(|(&p, _)| p)
        .fold(f64::INFINITY, f64::min);
    let free = 0.25 * span.max(hi - lo).max(1e-300);
    let left = if below.is_finite() {
        0.5 * (below + lo)
    } else {
        lo - free
    };
    let right = if above.is_finite() {
        0.5 * (above + hi)
    } else {
        hi + free
    };
    let radius = 0.5 * (right - left);
    let margin = (lo - left).min(right - hi);
    Some(Circle {
        center: 0.5 * (left + right),
        radius,
        orientation,
        clearance: margin / radius,
    })
}

/// `((z + d)^k - z^k) / d` as `sum_t (z+d)^t z^{k-1-t}`, which is also `k z^{k-1}` at `d = 0`.
fn divided_power(z: Complex64, d: f64, k: usize) -> Complex64 {
    if d.abs() < 1e-12 {
        return k as f64 * z.powu(k as u32 - 1);
    }
    let a = z + d;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut ap = Complex64::new(1.0, 0.0);
    let mut zp = z.powu(k as u32 - 1);
    let zinv = 1.0 / z;
    for t in 0..k {
        acc += ap * zp;
        ap *= a;
        if t + 1 < k {
            zp *= zinv;
        }
    }
    acc
}

/// Trapezoid value of the double integral and the summed magnitude of its
/// node contributions (the scale that sets the roundoff floor).
fn evaluate(x: &[f64], r: usize, u: f64, v: f64, w_radius: f64, gamma: &Circle, nodes: usize) -> (f64, f64) {
    let n = x.len();
    let k = n - r;
    let shifted: Vec<f64> = x.iter().map(|xi| xi - v).collect();
    let h = 2.0 * PI / nodes as f64;
    let mut iw = vec![Complex64::new(0.0, 0.0); n];
    let mut iz = vec![Complex64::new(0.0, 0.0); n];
    let mut iw_abs = vec![0.0; n];
    let mut iz_abs = vec![0.0; n];
    for l in 0..nodes {
        let e = Complex64::from_polar(1.0, h * l as f64);
        // w-contour: dw = i w dtheta
        let w = w_radius * e;
        let factors: Vec<Complex64> = shifted.iter().map(|p| w - p).collect();
        let weight = Complex64::new(0.0, h) * w / w.powu(k as u32 + 1);
        // leave-one-out products without division: a node may sit on a root
        let mut suffix = vec![Complex64::new(1.0, 0.0); n + 1];
        for j in (0..n).rev() {
            suffix[j] = suffix[j + 1] * factors[j];
        }
        let mut prefix = Complex64::new(1.0, 0.0);
        for j in 0..n {
            let t = weight * prefix * suffix[j + 1];
            iw[j] += t;
            iw_abs[j] += t.norm();
            prefix *= factors[j];
        }
        // z-contour
        let z = gamma.center + gamma.radius * e;
        let dz = Complex64::new(0.0, h) * gamma.radius * e * gamma.orientation;
        let diffs: Vec<Complex64> = shifted.iter().map(|p| z - p).collect();
        let q: Complex64 = diffs.iter().map(|d| 1.0 / d).product();
        let dd = divided_power(z, v - u, k);
        for j in 0..n {
            let t = dz * dd * (v - x[j]) * q / diffs[j];
            iz[j] += t;
            iz_abs[j] += t.norm();
        }
    }
    let total: Complex64 = iw.iter().zip(&iz).map(|(a, b)| a * b).sum();
    let scale: f64 = iw_abs.iter().zip(&iz_abs).map(|(a, b)| a * b).sum();
    (total.re / (4.0 * PI * PI), scale / (4.0 * PI * PI))
}

/// `K((r,u),(r,v))` from the double contour integral.
pub fn kernel_contour(spec: &KernelSpec, r: usize, u: f64, v: f64, quad: ContourQuad) -> Result<f64> {
    let n = spec.n();
    spec.check_levels(r, r)?;
    if !u.is_finite() || !v.is_finite() {
        return Err(Error::InvalidParameter("non-finite position".into()));
    }
    let x = spec.spectrum().values();
    let (a, b) = spec.spectrum().bounds();
    let span = if b > a { b - a } else { 1.0 };
    let gap_tol = 1e-8 * span;
    let nearest = x.iter().map(|xj| (xj - u).abs()).fold(f64::INFINITY, f64::min);
    if nearest <= gap_tol {
        return Err(Error::ContourSeparationFailure { gap: nearest });
    }

    let poles: Vec<f64> = x.iter().map(|xi| xi - v).collect();
    let (inside, orientation): (Vec<bool>, f64) = if v <= u {
        (x.iter().map(|&xj| xj > u).collect(), -1.0)
    } else {
        (x.iter().map(|&xj| xj <= u).collect(), 1.0)
    };
    if !inside.iter().any(|&k| k) {
        return Ok(0.0);
    }
    // The z-integrand decays like z^{-r-2}, so circling the complementary
    // poles with the opposite orientation gives the same value; take
    // whichever circle stays further from the poles.
    let complement: Vec<bool> = inside.iter().map(|k| !k).collect();
    let direct = isolating_circle(&poles, &inside, orientation, span);
    let flipped = isolating_circle(&poles, &complement, -orientation, span);
    let gamma = match (direct, flipped) {
        (Some(d), Some(f)) => {
            if f.clearance > d.clearance {
                f
            } else {
                d
            }
        }
        (Some(d), None) => d,
        (None, _) => unreachable!("enclosed set is non-empty"),
    };
    if !(gamma.clearance > 0.0) {
        return Err(Error::ContourSeparationFailure { gap: nearest });
    }

    // The w-integrand is a polynomial over w^{n-r+1}, so any circle about 0
    // is exact once the node count exceeds n; a radius on the scale of the
    // shifted atoms keeps the roundoff down (a small one amplifies it by R^{-(n-r)}).
    let far = x.iter().map(|xj| (xj - v).abs()).fold(0.0, f64::max);
    let w_radius = if far > 0.0 { far } else { span };

    let mut nodes = quad.nodes.max(n + 2);
    let (mut prev, _) = evaluate(x, r, u, v, w_radius, &gamma, nodes);
    while nodes < MAX_NODES {
        nodes *= 2;
        let (next, scale) = evaluate(x, r, u, v, w_radius, &gamma, nodes);
        let diff = (next - prev).abs();
        if diff <= quad.tol * next.abs() {
            return Ok(next);
        }
        // refinements cannot agree below the cancellation floor of the j-sum:
        // redo the quadrature with enough bits to see past it
        if diff <= 64.0 * n as f64 * f64::EPSILON * scale {
            return refine_multi(x, r, u, v, w_radius, &gamma, nodes / 2, scale, next, quad.tol);
        }
        prev = next;
    }
    Err(Error::NonConvergence { nodes })
}

/// Largest working precision tried by [`refine_multi`].
const MAX_BITS: usize = 4096;

#[allow(clippy::too_many_arguments)]
fn refine_multi(
    x: &[f64],
    r: usize,
    u: f64,
    v: f64,
    w_radius: f64,
    gamma: &Circle,
    start_nodes: usize,
    scale: f64,
    estimate: f64,
    tol: f64,
) -> Result<f64> {
    let n = x.len();
    let ratio = scale / estimate.abs().max(scale * 1e-300).max(f64::MIN_POSITIVE);
    let mut bits = round_up((ratio.log2().max(0.0) + 53.0 + 48.0) as usize);
    loop {
        let floor = 64.0 * n as f64 * (-(bits as f64)).exp2() * scale;
        let q = MultiQuad::new(x, r, u, v, w_radius, gamma, bits);
        let mut nodes = start_nodes;
        let mut sums = q.z_sums(&MpC::real(mp_one(bits), bits), &root_of_unity(nodes, bits), nodes);
        let mut prev = q.combine(&sums, nodes);
        let mut done = None;
        while nodes < MAX_NODES {
            // the doubled rule reuses every node of the current one
            let omega = root_of_unity(2 * nodes, bits);
            let odd = q.z_sums(&omega, &omega.mul(&omega), nodes);
            for (s, o) in sums.iter_mut().zip(&odd) {
                *s = s.add(o);
            }
            nodes *= 2;
            let next = q.combine(&sums, nodes);
            let diff = (next - prev).abs();
            if diff <= tol * next.abs() {
                return Ok(next);
            }
            if diff <= floor {
                done = Some(next);
                break;
            }
            prev = next;
        }
        match done {
            Some(val) if bits >= MAX_BITS => return Ok(val),
            Some(_) => bits = (2 * bits).min(MAX_BITS),
            None => return Err(Error::NonConvergence { nodes }),
        }
    }
}

fn round_up(bits: usize) -> usize {
    bits.div_ceil(64) * 64
}

#[derive(Clone)]
struct MpC {
    re: Mp,
    im: Mp,
}

impl MpC {
    fn real(x: Mp, bits: usize) -> Self {
        MpC {
            re: x,
            im: mp_zero(bits),
        }
    }

    fn add(&self, o: &MpC) -> MpC {
        MpC {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    fn sub(&self, o: &MpC) -> MpC {
        MpC {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }

    fn mul(&self, o: &MpC) -> MpC {
        MpC {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    fn scale(&self, s: &Mp) -> MpC {
        MpC {
            re: &self.re * s,
            im: &self.im * s,
        }
    }

    fn inv(&self) -> MpC {
        let norm = self.re.sqr() + self.im.sqr();
        MpC {
            re: &self.re / &norm,
            im: -(&self.im / &norm),
        }
    }

    fn powu(&self, mut k: usize, bits: usize) -> MpC {
        let mut acc = MpC::real(mp_one(bits), bits);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

/// `exp(2 pi i / nodes)` to `bits`, by Newton on `z^nodes = 1` from the `f64` value.
fn root_of_unity(nodes: usize, bits: usize) -> MpC {
    let e = Complex64::from_polar(1.0, 2.0 * PI / nodes as f64);
    let mut z = MpC {
        re: mp(e.re, bits),
        im: mp(e.im, bits),
    };
    let one = MpC::real(mp_one(bits), bits);
    let nn = mp_uint(nodes, bits);
    let mut good = 50usize;
    while good < bits + 16 {
        let zn1 = z.powu(nodes - 1, bits);
        let f = zn1.mul(&z).sub(&one);
        let step = f.mul(&zn1.scale(&nn).inv());
        z = z.sub(&step);
        good *= 2;
    }
    z
}

/// The quadrature at `bits` of working precision. The `i h` factors of both
/// contours are folded into the final `-1/(nodes_w nodes_z)`, so no `pi` is needed.
struct MultiQuad {
    bits: usize,
    k: usize,
    shifted: Vec<MpC>,
    gaps: Vec<Mp>,
    d: MpC,
    center: MpC,
    radius: Mp,
    orient_rad: Mp,
    /// Un-normalized w-sums, exact for any node count above n.
    iw: Vec<MpC>,
    w_nodes: usize,
}

impl MultiQuad {
    fn new(x: &[f64], r: usize, u: f64, v: f64, w_radius: f64, gamma: &Circle, bits: usize) -> Self {
        let n = x.len();
        let k = n - r;
        let vv = mp(v, bits);
        let shifted: Vec<MpC> = x.iter().map(|&xi| MpC::real(mp(xi, bits) - &vv, bits)).collect();
        let gaps = x.iter().map(|&xi| &vv - mp(xi, bits)).collect();
        let one = MpC::real(mp_one(bits), bits);
        let wr = mp(w_radius, bits);
        let w_nodes = (n + 1).next_power_of_two();
        let omega = root_of_unity(w_nodes, bits);
        let mut iw = vec![MpC::real(mp_zero(bits), bits); n];
        let mut e = one.clone();
        for _ in 0..w_nodes {
            let w = e.scale(&wr);
            let factors: Vec<MpC> = shifted.iter().map(|p| w.sub(p)).collect();
            let weight = w.inv().powu(k, bits);
            for (acc, t) in iw.iter_mut().zip(leave_one_out(&factors, &weight, &one)) {
                *acc = acc.add(&t);
            }
            e = e.mul(&omega);
        }
        MultiQuad {
            bits,
            k,
            shifted,
            gaps,
            d: MpC::real(&vv - mp(u, bits), bits),
            center: MpC::real(mp(gamma.center, bits), bits),
            radius: mp(gamma.radius, bits),
            orient_rad: mp(gamma.orientation, bits) * mp(gamma.radius, bits),
            iw,
            w_nodes,
        }
    }

    /// Un-normalized z-sums over the `count` nodes `first * step^l`.
    fn z_sums(&self, first: &MpC, step: &MpC, count: usize) -> Vec<MpC> {
        let bits = self.bits;
        let one = MpC::real(mp_one(bits), bits);
        let mut iz = vec![MpC::real(mp_zero(bits), bits); self.shifted.len()];
        let mut e = first.clone();
        for _ in 0..count {
            let z = self.center.add(&e.scale(&self.radius));
            let diffs: Vec<MpC> = self.shifted.iter().map(|p| z.sub(p)).collect();
            // sum_t (z+d)^t z^{k-1-t} by Horner in z
            let a = z.add(&self.d);
            let mut dd = one.clone();
            let mut ap = one.clone();
            for _ in 1..self.k {
                ap = ap.mul(&a);
                dd = dd.mul(&z).add(&ap);
            }
            // prod_i 1/d_i * 1/d_j = (prod_{i != j} d_i) / (prod_i d_i)^2
            let prod = diffs.iter().fold(one.clone(), |acc, di| acc.mul(di));
            let inv = prod.mul(&prod).inv();
            let common = e.scale(&self.orient_rad).mul(&dd).mul(&inv);
            for ((acc, t), g) in iz.iter_mut().zip(leave_one_out(&diffs, &common, &one)).zip(&self.gaps) {
                *acc = acc.add(&t.scale(g));
            }
            e = e.mul(step);
        }
        iz
    }

    fn combine(&self, iz: &[MpC], z_nodes: usize) -> f64 {
        let bits = self.bits;
        let total = self
            .iw
            .iter()
            .zip(iz)
            .fold(MpC::real(mp_zero(bits), bits), |acc, (a, b)| acc.add(&a.mul(b)));
        let norm = mp_uint(self.w_nodes, bits) * mp_uint(z_nodes, bits);
        -to_f64(&(total.re / norm))
    }
}

/// `lead * prod_{i != j} f_i` for every j.
fn leave_one_out(f: &[MpC], lead: &MpC, one: &MpC) -> Vec<MpC> {
    let n = f.len();
    let mut suffix = vec![one.clone(); n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1].mul(&f[j]);
    }
    let mut prefix = lead.clone();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        out.push(prefix.mul(&suffix[j + 1]));
        prefix = prefix.mul(&f[j]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_fixed_top;

    #[test]
    fn two_particle_example() {
        let spec = KernelSpec::from_values(vec![1.0, 0.0]).unwrap();
        let k = kernel_contour(&spec, 1, 0.5, 0.5, ContourQuad::default()).unwrap();
        assert!((k - 1.0).abs() < 1e-8, "{k}");
    }

    #[test]
    fn matches_direct_formula() {
        let x = vec![0.93, 0.81, 0.55, 0.42, 0.17, 0.05];
        let spec = KernelSpec::from_values(x).unwrap();
        for &(u, v) in &[(0.5, 0.5), (0.3, 0.6), (0.7, 0.2), (0.1, 0.88)] {
            let c = kernel_contour(&spec, 3, u, v, ContourQuad::default()).unwrap();
            let d = kernel_fixed_top(&spec, 3, 3, u, v).unwrap();
            assert!((c - d).abs() <= 1e-6 * d.abs().max(1.0), "u={u} v={v}: {c} vs {d}");
        }
    }

    #[test]
    fn atom_proximity_is_rejected() {
        let spec = KernelSpec::from_values(vec![1.0, 0.5, 0.0]).unwrap();
        assert!(matches!(
            kernel_contour(&spec, 1, 0.5 + 1e-10, 0.3, ContourQuad::default()),
            Err(Error::ContourSeparationFailure { .. })
        ));
    }
}
