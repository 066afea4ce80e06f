//! Scalar helpers shared by the kernel and saddle code: sign/log-magnitude
//! numbers, compensated sums, a minimal double-double, and Gauss-Legendre
//! quadrature.

use std::cmp::Ordering;
use std::ops::{Div, Mul, Neg};

/// A real number stored as `sign * exp(logmag)`.
///
/// Products of many factors (Lagrange denominators, falling powers) stay
/// finite in this form long after the plain `f64` product would overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSigned {
    pub sign: i8,
    pub logmag: f64,
}

impl LogSigned {
    pub const ZERO: LogSigned = LogSigned {
        sign: 0,
        logmag: f64::NEG_INFINITY,
    };
    pub const ONE: LogSigned = LogSigned { sign: 1, logmag: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogSigned {
                sign: if x > 0.0 { 1 } else { -1 },
                logmag: x.abs().ln(),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.logmag.exp()
        }
    }

    pub fn abs(self) -> Self {
        LogSigned {
            sign: self.sign.abs(),
            logmag: self.logmag,
        }
    }

    pub fn powi(self, k: u32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        LogSigned {
            sign: if self.sign < 0 && k % 2 == 1 { -1 } else { 1 },
            logmag: self.logmag * f64::from(k),
        }
    }

    pub fn recip(self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero");
        LogSigned {
            sign: self.sign,
            logmag: -self.logmag,
        }
    }

    /// log2 of the magnitude (`-inf` for zero).
    pub fn log2(self) -> f64 {
        self.logmag / std::f64::consts::LN_2
    }
}

impl Mul for LogSigned {
    type Output = LogSigned;
    fn mul(self, rhs: LogSigned) -> LogSigned {
        if self.sign == 0 || rhs.sign == 0 {
            return LogSigned::ZERO;
        }
        LogSigned {
            sign: self.sign * rhs.sign,
            logmag: self.logmag + rhs.logmag,
        }
    }
}

impl Div for LogSigned {
    type Output = LogSigned;
    fn div(self, rhs: LogSigned) -> LogSigned {
        self * rhs.recip()
    }
}

impl Neg for LogSigned {
    type Output = LogSigned;
    fn neg(self) -> LogSigned {
        LogSigned {
            sign: -self.sign,
            logmag: self.logmag,
        }
    }
}

/// Result of a signed log-domain summation.
#[derive(Debug, Clone, Copy)]
pub struct SignedSum {
    pub value: LogSigned,
    /// Sum of the absolute values of the terms, in log form.
    pub abs_total: LogSigned,
}

/// Sums signed log-domain terms: the largest magnitude is factored out, the
/// scaled terms are added in descending magnitude with Neumaier compensation.
pub fn signed_log_sum(terms: &[LogSigned]) -> SignedSum {
    let lmax = terms
        .iter()
        .filter(|t| t.sign != 0)
        .map(|t| t.logmag)
        .fold(f64::NEG_INFINITY, f64::max);
    if lmax == f64::NEG_INFINITY {
        return SignedSum {
            value: LogSigned::ZERO,
            abs_total: LogSigned::ZERO,
        };
    }
    let mut scaled: Vec<f64> = terms
        .iter()
        .filter(|t| t.sign != 0)
        .map(|t| f64::from(t.sign) * (t.logmag - lmax).exp())
        .collect();
    let abs_scaled: f64 = scaled.iter().map(|x| x.abs()).sum();
    sort_descending_magnitude(&mut scaled);
    let s = neumaier_sum(scaled.iter().copied());
    let rescale = |x: f64| {
        let l = LogSigned::from_f64(x);
        if l.sign == 0 {
            l
        } else {
            LogSigned {
                sign: l.sign,
                logmag: l.logmag + lmax,
            }
        }
    };
    SignedSum {
        value: rescale(s),
        abs_total: rescale(abs_scaled),
    }
}

fn sort_descending_magnitude(v: &mut [f64]) {
    v.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap_or(Ordering::Equal));
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = NeumaierSum::new();
    for x in iter {
        acc.add(x);
    }
    acc.value()
}

/// Sorts by decreasing magnitude, then adds with compensation.
pub fn sum_descending(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    sort_descending_magnitude(&mut v);
    neumaier_sum(v)
}

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Unevaluated sum `hi + lo` carrying roughly 106 bits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, other: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, e);
        DoubleDouble { hi, lo }
    }

    pub fn mul_f64(self, b: f64) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

/// ln(k!) by direct summation for small k, Stirling series beyond.
pub fn ln_factorial(k: usize) -> f64 {
    if k < 2 {
        return 0.0;
    }
    if k <= 170 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = k as f64 + 1.0;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(m, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let d = m as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Fixed-order Gauss-Legendre rule mapped to [a, b].
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(m: usize) -> Self {
        let (nodes, weights) = gauss_legendre(m);
        GaussRule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        neumaier_sum(self.mapped(a, b).map(|(x, w)| w * f(x)))
    }

    pub fn try_integrate<E, F>(&self, a: f64, b: f64, mut f: F) -> std::result::Result<f64, E>
    where
        F: FnMut(f64) -> std::result::Result<f64, E>,
    {
        let mut acc = NeumaierSum::new();
        for (x, w) in self.mapped(a, b) {
            acc.add(w * f(x)?);
        }
        Ok(acc.value())
    }
}

/// Merges and sorts panel breakpoints, keeping only those strictly inside (a, b).
pub fn panel_edges(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    edges.extend(inner);
    edges.push(b);
    edges
}

/// Determinant by LU factorization with partial pivoting.
pub fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap_or(Ordering::Equal))
            .unwrap();
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        let pivot = a[k][k];
        det *= pivot;
        for i in k + 1..n {
            let f = a[i][k] / pivot;
            if f != 0.0 {
                for j in k + 1..n {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_small_cases() {
        assert_eq!(determinant(vec![]), 1.0);
        assert_eq!(determinant(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), -1.0);
        let d = determinant(vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]);
        assert!((d - 18.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussRule::new(5);
        // degree 9 is the highest exact degree for 5 nodes
        let v = rule.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let w: f64 = gauss_legendre(7).1.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn log_signed_sum_handles_cancellation_and_overflow() {
        let big = LogSigned { sign: 1, logmag: 800.0 };
        let s = signed_log_sum(&[big, -big, LogSigned::from_f64(3.0)]);
        assert!((s.value.to_f64() - 3.0).abs() < 1e-12 || s.value.sign == 0);
        let s = signed_log_sum(&[big, big]);
        assert!((s.value.logmag - (800.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(signed_log_sum(&[]).value.sign, 0);
    }

    #[test]
    fn log_signed_arithmetic() {
        let a = LogSigned::from_f64(-2.0);
        let b = LogSigned::from_f64(0.5);
        assert!(((a * b).to_f64() + 1.0).abs() < 1e-15);
        assert!(((a / b).to_f64() + 4.0).abs() < 1e-14);
        assert!((a.powi(3).to_f64() + 8.0).abs() < 1e-13);
        assert_eq!(LogSigned::ZERO.powi(0), LogSigned::ONE);
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(v), 2.0);
        assert_eq!(sum_descending(&v), 2.0);
    }

    #[test]
    fn ln_factorial_matches_direct() {
        for k in [0usize, 1, 5, 20, 170, 171, 300] {
            let direct: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
            assert!((ln_factorial(k) - direct).abs() < 1e-9 * direct.max(1.0), "k={k}");
        }
    }
}
