//! Gelfand-Tsetlin patterns, interlacing predicates and the small
//! combinatorial primitives used by the kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::DoubleDouble;

/// Strictly decreasing top row `x_1 > x_2 > ... > x_n` inside `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Spectrum {
    /// Bounds default to the smallest and largest value.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let lo = values.last().copied().unwrap_or(0.0);
        let hi = values.first().copied().unwrap_or(0.0);
        Self::with_bounds(values, lo, hi)
    }

    pub fn with_bounds(values: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("spectrum value {i} is not finite")));
        }
        for i in 1..values.len() {
            if values[i] >= values[i - 1] {
                return Err(Error::NotDecreasing { index: i });
            }
        }
        if lo > values[values.len() - 1] || hi < values[0] {
            return Err(Error::InvalidParameter(format!(
                "spectrum does not fit inside [{lo}, {hi}]"
            )));
        }
        Ok(Spectrum { values, lo, hi })
    }

    /// Equispaced spectrum `(n-1)/(n-1), ..., 0` on [0, 1] (just `0` for n = 1).
    pub fn equispaced(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySpectrum);
        }
        if n == 1 {
            return Self::with_bounds(vec![0.0], 0.0, 1.0);
        }
        let d = (n - 1) as f64;
        Self::with_bounds((0..n).rev().map(|i| i as f64 / d).collect(), 0.0, 1.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Interlaced triangular array; `levels[r - 1]` holds the `r` entries of level r,
/// in decreasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GTPattern {
    levels: Vec<Vec<f64>>,
}

impl GTPattern {
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("pattern depth must be at least 1".into()));
        }
        for (r, level) in levels.iter().enumerate() {
            if level.len() != r + 1 {
                return Err(Error::InvalidParameter(format!(
                    "level {} has {} entries",
                    r + 1,
                    level.len()
                )));
            }
        }
        Ok(GTPattern { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Entries of level `r` (1-based).
    pub fn level(&self, r: usize) -> &[f64] {
        &self.levels[r - 1]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let levels: Vec<Vec<f64>> = serde_json::from_str(s)?;
        Self::new(levels)
    }
}

/// `lambda^(r+1)_1 >= lambda^(r)_1 >= lambda^(r+1)_2 >= ... >= lambda^(r+1)_{r+1}` for every r.
pub fn check_symmetric_interlacing(p: &GTPattern) -> bool {
    p.levels.windows(2).all(|w| {
        let (lower, upper) = (&w[0], &w[1]);
        lower
            .iter()
            .enumerate()
            .all(|(i, &y)| upper[i] >= y && y >= upper[i + 1])
    })
}

/// `y^(r+1)_1 > y^(r)_1 >= y^(r+1)_2 > y^(r)_2 >= ...`, with every level strictly decreasing.
pub fn check_asymmetric_interlacing(p: &GTPattern) -> bool {
    let strict = p.levels.iter().all(|l| l.windows(2).all(|w| w[0] > w[1]));
    strict
        && p.levels.windows(2).all(|w| {
            let (lower, upper) = (&w[0], &w[1]);
            lower
                .iter()
                .enumerate()
                .all(|(i, &y)| upper[i] > y && y >= upper[i + 1])
        })
}

fn sorted_descending(z: &[f64]) -> Vec<f64> {
    let mut v = z.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Determinant of the order-indicator matrix `[1{z'_(k) > z_(j)}]` with both
/// vectors read in decreasing order. Equals 1 exactly on interlaced pairs.
pub fn warren_indicator(z: &[f64], z_next: &[f64]) -> i64 {
    assert_eq!(z.len(), z_next.len(), "warren_indicator needs equal lengths");
    let zs = sorted_descending(z);
    let zn = sorted_descending(z_next);
    let n = zs.len();
    let mut m: Vec<Vec<i128>> = (0..n)
        .map(|j| (0..n).map(|k| i128::from(zn[k] > zs[j])).collect())
        .collect();
    bareiss_determinant(&mut m) as i64
}

/// Fraction-free Gaussian elimination; exact for integer matrices.
fn bareiss_determinant(m: &mut [Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

/// Pairwise check of `z'_(1) > z_(1) >= z'_(2) > z_(2) >= ... >= z'_(n) > z_(n)`.
pub fn is_interlaced_pair(z: &[f64], z_next: &[f64]) -> bool {
    let zs = sorted_descending(z);
    let zn = sorted_descending(z_next);
    (0..zs.len()).all(|j| zn[j] > zs[j] && (j + 1 == zs.len() || zs[j] >= zn[j + 1]))
}

/// `prod_{i<j} (y_i - y_j)`.
pub fn vandermonde(y: &[f64]) -> f64 {
    let mut p = 1.0;
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            p *= y[i] - y[j];
        }
    }
    p
}

/// `e_0, ..., e_m` of the values, by coefficientwise multiplication of
/// `prod (1 + a_i t)` in double-double accumulation.
pub fn elem_sym_all(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut e = vec![DoubleDouble::ZERO; m + 1];
    e[0] = DoubleDouble::ONE;
    for (i, &a) in values.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] = e[k].add(e[k - 1].mul_f64(a));
        }
    }
    e.into_iter().map(DoubleDouble::to_f64).collect()
}

/// Elementary symmetric polynomial `e_k`; zero when `k > len`.
pub fn elem_sym(values: &[f64], k: usize) -> f64 {
    if k > values.len() {
        return 0.0;
    }
    let mut e = vec![DoubleDouble::ZERO; k + 1];
    e[0] = DoubleDouble::ONE;
    for (i, &a) in values.iter().enumerate() {
        for j in (1..=k.min(i + 1)).rev() {
            e[j] = e[j].add(e[j - 1].mul_f64(a));
        }
    }
    e[k].to_f64()
}
