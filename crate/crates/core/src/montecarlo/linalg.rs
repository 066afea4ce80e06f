//! Dense complex matrices, Haar unitaries and a Hermitian eigenvalue solver
//! (Householder tridiagonalization followed by implicit-shift QL).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("matrix must be square".into()));
        }
        Ok(CMatrix { n, data: rows.concat() })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn mul(&self, other: &CMatrix) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        m
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Replace by `(A + A*)/2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            self[(i, i)].im = 0.0;
            for j in 0..i {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)].conj());
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    /// Top-left `r x r` block.
    pub fn leading_block(&self, r: usize) -> Self {
        let mut m = Self::zeros(r);
        for i in 0..r {
            for j in 0..r {
                m[(i, j)] = self[(i, j)];
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Standard complex Gaussian: real and imaginary parts `N(0, 1/2)`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Unit phase of `z` (1 for `z = 0`).
fn phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        ONE
    } else {
        z / r
    }
}

/// Householder vector for `x`: returns `(v, alpha)` with `(I - 2 v v*) x = alpha e_1`
/// and `|v| = 1`, or `None` when `x` is already zero.
fn householder(x: &[Complex64]) -> Option<(Vec<Complex64>, Complex64)> {
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    let alpha = -phase(x[0]) * norm;
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if vn == 0.0 {
        return None;
    }
    for z in v.iter_mut() {
        *z /= vn;
    }
    Some((v, alpha))
}

/// Haar-distributed unitary: Householder QR of a complex Ginibre matrix, with
/// `Q` multiplied by the phases of `diag(R)` so that the factorization is unique.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let mut a = CMatrix::zeros(n);
    for z in a.data.iter_mut() {
        *z = complex_gaussian(rng);
    }
    let mut q = CMatrix::identity(n);
    let mut diag = vec![ONE; n];
    for k in 0..n {
        let x: Vec<Complex64> = (k..n).map(|i| a[(i, k)]).collect();
        let Some((v, alpha)) = householder(&x) else {
            continue;
        };
        diag[k] = alpha;
        // A <- H A on rows k..n
        for j in k..n {
            let dot: Complex64 = (k..n).map(|i| v[i - k].conj() * a[(i, j)]).sum();
            for i in k..n {
                a[(i, j)] -= 2.0 * v[i - k] * dot;
            }
        }
        // Q <- Q H on columns k..n
        for i in 0..n {
            let dot: Complex64 = (k..n).map(|j| q[(i, j)] * v[j - k]).sum();
            for j in k..n {
                q[(i, j)] -= 2.0 * dot * v[j - k].conj();
            }
        }
    }
    for (j, d) in diag.iter().enumerate() {
        let p = phase(*d);
        for i in 0..n {
            q[(i, j)] *= p;
        }
    }
    q
}

/// GUE matrix: diagonal `N(0,1)`, off-diagonal real and imaginary parts `N(0,1/2)`.
pub fn sample_gue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let mut h = CMatrix::zeros(n);
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        h[(i, i)] = Complex64::new(d, 0.0);
        for j in 0..i {
            let z = complex_gaussian(rng);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Reduce a Hermitian matrix to a real symmetric tridiagonal one with the
/// same spectrum: returns `(diagonal, off-diagonal moduli)`.
fn tridiagonalize(h: &CMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = h.n;
    let mut a = h.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let Some((v, _)) = householder(&x) else {
            continue;
        };
        let off = k + 1;
        // p = A v, w = p - (v* p) v, A <- A - 2 v w* - 2 w v*
        let p: Vec<Complex64> = (0..n).map(|i| (off..n).map(|j| a[(i, j)] * v[j - off]).sum()).collect();
        let kappa: Complex64 = (off..n).map(|i| v[i - off].conj() * p[i]).sum();
        let w: Vec<Complex64> = (0..n)
            .map(|i| if i >= off { p[i] - kappa * v[i - off] } else { p[i] })
            .collect();
        let vfull = |i: usize| if i >= off { v[i - off] } else { ZERO };
        for i in 0..n {
            for j in 0..n {
                let delta = 2.0 * (vfull(i) * w[j].conj() + w[i] * vfull(j).conj());
                a[(i, j)] -= delta;
            }
        }
    }
    let d = (0..n).map(|i| a[(i, i)].re).collect();
    let e = (1..n).map(|i| a[(i, i - 1)].norm()).collect();
    (d, e)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson-type shifts.
fn tridiagonal_ql(mut d: Vec<f64>, e_in: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    let mut e = e_in;
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(d)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigs(h: &CMatrix) -> Result<Vec<f64>> {
    let defect = h.hermitian_defect();
    if !(defect < 1e-12) {
        return Err(Error::NonHermitian { asymmetry: defect });
    }
    if h.n == 0 {
        return Ok(Vec::new());
    }
    let (d, e) = tridiagonalize(h);
    if d.iter().chain(e.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence);
    }
    tridiagonal_ql(d, e)
}
