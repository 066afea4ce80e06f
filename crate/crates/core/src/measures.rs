//! Limiting measures (finite atomic or semicircle), their Cauchy transforms,
//! and the deterministic quantile discretization that produces top rows.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::Spectrum;

/// Distance below which an evaluation point counts as sitting on an atom.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Atomic,
    Semicircle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure {
    kind: MeasureKind,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
    support_lo: f64,
    support_hi: f64,
}

/// On-disk form: `{"kind":"atomic","atoms":[..],"weights":[..]}` or `{"kind":"semicircle"}`.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum MeasureFile {
    Atomic {
        atoms: Vec<f64>,
        weights: Vec<f64>,
        #[serde(default)]
        support: Option<[f64; 2]>,
    },
    Semicircle,
}

impl Measure {
    pub fn atomic(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let lo = atoms.first().copied().unwrap_or(0.0);
        let hi = atoms.last().copied().unwrap_or(0.0);
        Self::atomic_with_support(atoms, weights, lo, hi)
    }

    pub fn atomic_with_support(atoms: Vec<f64>, weights: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite entry".into()));
        }
        if atoms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMeasure("atoms must be strictly ascending".into()));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidMeasure("weights must be positive".into()));
        }
        if !(lo <= atoms[0] && atoms[atoms.len() - 1] <= hi) {
            return Err(Error::InvalidMeasure(format!("atoms not inside [{lo}, {hi}]")));
        }
        let mass = weights.iter().sum();
        Ok(Measure {
            kind: MeasureKind::Atomic,
            atoms,
            weights,
            mass,
            support_lo: lo,
            support_hi: hi,
        })
    }

    /// Like [`Measure::atomic`] but also insists the weights sum to `mass`.
    pub fn atomic_with_mass(atoms: Vec<f64>, weights: Vec<f64>, mass: f64) -> Result<Self> {
        let m = Self::atomic(atoms, weights)?;
        if (m.mass - mass).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {} instead of {mass}",
                m.mass
            )));
        }
        Ok(m)
    }

    /// Standard semicircle law on [-2, 2].
    pub fn semicircle() -> Self {
        Measure {
            kind: MeasureKind::Semicircle,
            atoms: Vec::new(),
            weights: Vec::new(),
            mass: 1.0,
            support_lo: -2.0,
            support_hi: 2.0,
        }
    }

    /// `(1 - beta) delta_0 + beta delta_1`.
    pub fn two_atom(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} outside (0,1)")));
        }
        Self::atomic(vec![0.0, 1.0], vec![1.0 - beta, beta])
    }

    /// `(delta_{-1} + delta_0 + delta_1) / 3`.
    pub fn three_atom() -> Self {
        let t = 1.0 / 3.0;
        Self::atomic(vec![-1.0, 0.0, 1.0], vec![t, t, t]).expect("valid three-atom measure")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        match serde_json::from_str::<MeasureFile>(s)? {
            MeasureFile::Semicircle => Ok(Self::semicircle()),
            MeasureFile::Atomic {
                atoms,
                weights,
                support: None,
            } => Self::atomic(atoms, weights),
            MeasureFile::Atomic {
                atoms,
                weights,
                support: Some([lo, hi]),
            } => Self::atomic_with_support(atoms, weights, lo, hi),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    pub fn is_point_mass(&self) -> bool {
        self.kind == MeasureKind::Atomic && self.atoms.len() == 1
    }

    /// Weight carried by the single point `c` (zero off the atoms).
    pub fn point_weight(&self, c: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .find(|(&a, _)| a == c)
            .map_or(0.0, |(_, &w)| w)
    }

    /// `G(w) = int dmu(x) / (w - x)`.
    pub fn cauchy_transform(&self, w: Complex64) -> Result<Complex64> {
        match self.kind {
            MeasureKind::Semicircle => {
                if w.im == 0.0 && w.re.abs() <= 2.0 + POLE_TOL {
                    return Err(Error::PoleProximity { re: w.re, im: w.im });
                }
                Ok(semicircle_g(w))
            }
            MeasureKind::Atomic => {
                let mut g = Complex64::new(0.0, 0.0);
                for (&x, &p) in self.atoms.iter().zip(&self.weights) {
                    let d = w - x;
                    if d.norm() < POLE_TOL {
                        return Err(Error::PoleProximity { re: w.re, im: w.im });
                    }
                    g += p / d;
                }
                Ok(g)
            }
        }
    }

    /// `G'(w)`.
    pub fn cauchy_derivative(&self, w: Complex64) -> Result<Complex64> {
        match self.kind {
            MeasureKind::Semicircle => {
                if w.im == 0.0 && w.re.abs() <= 2.0 + POLE_TOL {
                    return Err(Error::PoleProximity { re: w.re, im: w.im });
                }
                let g = semicircle_g(w);
                let s = w * (Complex64::new(1.0, 0.0) - 4.0 / (w * w)).sqrt();
                Ok(-g / s)
            }
            MeasureKind::Atomic => {
                let mut g = Complex64::new(0.0, 0.0);
                for (&x, &p) in self.atoms.iter().zip(&self.weights) {
                    let d = w - x;
                    if d.norm() < POLE_TOL {
                        return Err(Error::PoleProximity { re: w.re, im: w.im });
                    }
                    g -= p / (d * d);
                }
                Ok(g)
            }
        }
    }

    /// `mu((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            MeasureKind::Semicircle => semicircle_cdf(x),
            MeasureKind::Atomic => self
                .atoms
                .iter()
                .zip(&self.weights)
                .filter(|(&a, _)| a <= x)
                .map(|(_, &w)| w)
                .sum(),
        }
    }

    /// Generalized inverse `inf { x : F(x) >= p }` of the normalized CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self.kind {
            MeasureKind::Semicircle => semicircle_quantile(p),
            MeasureKind::Atomic => {
                let target = p * self.mass;
                let mut acc = 0.0;
                for (&a, &w) in self.atoms.iter().zip(&self.weights) {
                    acc += w;
                    if acc >= target * (1.0 - 1e-14) {
                        return a;
                    }
                }
                self.atoms[self.atoms.len() - 1]
            }
        }
    }
}

/// Semicircle density `sqrt(4 - x^2) / (2 pi)`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

fn semicircle_g(w: Complex64) -> Complex64 {
    // (w/2)(1 - sqrt(1 - 4/w^2)) with the principal root behaves like 1/w at
    // infinity and keeps its cut on [-2, 2].
    let one = Complex64::new(1.0, 0.0);
    w * 0.5 * (one - (one - 4.0 / (w * w)).sqrt())
}

fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
    }
}

fn semicircle_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return -2.0;
    }
    if p >= 1.0 {
        return 2.0;
    }
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    let mut x = 0.0;
    for _ in 0..200 {
        let f = semicircle_cdf(x) - p;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = semicircle_density(x);
        let newton = x - f / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
        x = next;
    }
    x
}

/// Empirical measure `(1/n) sum delta_{x_i}` of a top row.
pub fn from_spectrum(x: &Spectrum) -> Result<Measure> {
    if x.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let n = x.len();
    let atoms: Vec<f64> = x.values().iter().rev().copied().collect();
    let weights = vec![1.0 / n as f64; n];
    let (lo, hi) = x.bounds();
    let m = Measure::atomic_with_support(atoms, weights, lo, hi)?;
    Ok(Measure { mass: 1.0, ..m })
}

/// Deterministic top row `x_i = F^{-1}((n - i + 1/2)/n)`, decreasing; coincident
/// quantiles (atoms) are pulled apart by `eps * rank`, `eps = (b - a) 1e-9 / n`.
pub fn quantile_spectrum(m: &Measure, n: usize) -> Result<Spectrum> {
    if n == 0 {
        return Err(Error::EmptySpectrum);
    }
    let (a, b) = m.support();
    let mut x: Vec<f64> = (1..=n)
        .map(|i| m.quantile((n as f64 - i as f64 + 0.5) / n as f64))
        .collect();
    let eps = (b - a) * 1e-9 / n as f64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[end] == x[start] {
            end += 1;
        }
        let k = end - start;
        if k > 1 {
            let base = x[start];
            let half = 0.5 * (k - 1) as f64;
            // decreasing within the group; shift back inside [a, b] if needed
            let mut shift = 0.0;
            let top = base + eps * half;
            let bottom = base - eps * half;
            if top > b {
                shift = b - top;
            } else if bottom < a {
                shift = a - bottom;
            }
            for (rank, xi) in x[start..end].iter_mut().enumerate() {
                *xi = base + eps * (half - rank as f64) + shift;
            }
        }
        start = end;
    }
    Spectrum::with_bounds(x, a.min(b), b.max(a))
}
