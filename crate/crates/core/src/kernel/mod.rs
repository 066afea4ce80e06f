//! The fixed-top-row correlation kernel
//!
//! ```text
//! K_n((r,u),(s,v)) = sum_j [1{v<=u<x_j} - 1{v>u>x_j}] (x_j-u)^{n-r-1}/(n-r-1)!
//!                    * (n-s)! e_{s-1}({v-x_i}_{i!=j}) / prod_{i!=j}(x_j-x_i)
//! ```
//!
//! evaluated term-by-term in sign/log form, with automatic escalation to
//! multiprecision when the terms cancel too much for `f64`.

mod contour;
mod correlation;
mod exact;
pub(crate) mod multiprec;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ln_factorial, signed_log_sum, LogSigned};
use crate::patterns::Spectrum;
use multiprec::Mp;

pub use contour::{kernel_contour, ContourQuad};
pub use correlation::{correlation_det, level_mass};
pub use exact::{kernel_fixed_top_exact, rational_from_f64, rational_to_f64, EXACT_MAX_N};

/// `u` closer than this to an atom is rejected by the direct formula.
pub const ATOM_TOL: f64 = 1e-14;

/// Relative accuracy the automatic mode aims for.
pub const AUTO_TARGET: f64 = 1e-12;

/// Working precision at which the automatic mode stops escalating.
pub const AUTO_MAX_BITS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Precision {
    /// Plain `f64` terms, no escalation.
    Double,
    /// `f64` first; multiprecision when the cancellation estimate exceeds [`AUTO_TARGET`].
    #[default]
    Auto,
    /// Always multiprecision with the given number of bits.
    Multi { bits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub level: usize,
    pub position: f64,
}

impl KernelPoint {
    pub fn new(level: usize, position: f64) -> Self {
        KernelPoint { level, position }
    }
}

type MpCache = Mutex<BTreeMap<usize, Arc<Vec<Mp>>>>;

pub struct KernelSpec {
    spectrum: Spectrum,
    precision: Precision,
    /// `prod_{i != j} (x_j - x_i)`.
    denominators: Vec<LogSigned>,
    normalizer: LogSigned,
    mp_inverse_denominators: MpCache,
}

impl std::fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelSpec")
            .field("spectrum", &self.spectrum)
            .field("precision", &self.precision)
            .finish()
    }
}

impl Clone for KernelSpec {
    fn clone(&self) -> Self {
        KernelSpec {
            spectrum: self.spectrum.clone(),
            precision: self.precision,
            denominators: self.denominators.clone(),
            normalizer: self.normalizer,
            mp_inverse_denominators: Mutex::new(self.mp_inverse_denominators.lock().unwrap().clone()),
        }
    }
}

fn round_bits(bits: usize) -> usize {
    bits.max(128).div_ceil(256) * 256
}

impl KernelSpec {
    pub fn new(spectrum: Spectrum) -> Self {
        let x = spectrum.values();
        let n = x.len();
        let denominators: Vec<LogSigned> = (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&i| i != j)
                    .fold(LogSigned::ONE, |acc, i| acc * LogSigned::from_f64(x[j] - x[i]))
            })
            .collect();
        let mut normalizer = LogSigned::ONE;
        for i in 0..n {
            for j in i + 1..n {
                normalizer = normalizer * LogSigned::from_f64(x[i] - x[j]);
            }
        }
        KernelSpec {
            spectrum,
            precision: Precision::Auto,
            denominators,
            normalizer,
            mp_inverse_denominators: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Ok(Self::new(Spectrum::new(values)?))
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn n(&self) -> usize {
        self.spectrum.len()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// `B_n = Delta_n(x) = prod_{i<j} (x_i - x_j)`, in sign/log form.
    pub fn normalizer(&self) -> LogSigned {
        self.normalizer
    }

    fn mp_inverse_denominators(&self, bits: usize) -> Arc<Vec<Mp>> {
        let mut cache = self.mp_inverse_denominators.lock().unwrap();
        if let Some((_, v)) = cache.range(bits..).next() {
            return Arc::clone(v);
        }
        let v = Arc::new(multiprec::inverse_denominators(self.spectrum.values(), bits));
        cache.insert(bits, Arc::clone(&v));
        v
    }

    fn check_levels(&self, r: usize, s: usize) -> Result<()> {
        let n = self.n();
        if n < 2 || r == 0 || r > n - 1 {
            return Err(Error::LevelOutOfRange {
                level: r,
                max: n.saturating_sub(1),
            });
        }
        if s == 0 || s > n {
            return Err(Error::LevelOutOfRange { level: s, max: n });
        }
        Ok(())
    }

    fn check_position(&self, u: f64) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::InvalidParameter(format!("position {u}")));
        }
        if let Some(&atom) = self.spectrum.values().iter().find(|&&x| (x - u).abs() < ATOM_TOL) {
            return Err(Error::AtomCollision { u, atom });
        }
        Ok(())
    }

    /// Data shared by every `K((., .), (s, v))`.
    pub fn row(&self, s: usize, v: f64) -> Result<KernelRow<'_>> {
        let n = self.n();
        if s == 0 || s > n {
            return Err(Error::LevelOutOfRange { level: s, max: n });
        }
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("position {v}")));
        }
        let x = self.spectrum.values();
        let a: Vec<f64> = x.iter().map(|xi| v - xi).collect();
        let scale = a.iter().fold(0.0f64, |m, ai| m.max(ai.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let b: Vec<f64> = a.iter().map(|ai| ai / scale).collect();
        let b_abs: Vec<f64> = b.iter().map(|bi| bi.abs()).collect();
        let k = s - 1;
        Ok(KernelRow {
            spec: self,
            s,
            v,
            e: leave_one_out(&b, k),
            e_abs: leave_one_out(&b_abs, k),
            log_common: ln_factorial(n - s) + k as f64 * scale.ln(),
            mp: Mutex::new(None),
        })
    }

    /// `K((r,u),(s,v))` for all `u` in `us` and `v` in `vs`; result indexed `[iu][iv]`.
    pub fn kernel_matrix(&self, r: usize, s: usize, us: &[f64], vs: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_levels(r, s)?;
        for &u in us {
            self.check_position(u)?;
        }
        let rows: Vec<KernelRow> = vs.iter().map(|&v| self.row(s, v)).collect::<Result<_>>()?;
        let cols: Vec<Vec<f64>> = us
            .par_iter()
            .map(|&u| {
                // (x_j - u)^m / m! shared across the row
                let mut powers = None;
                rows.iter()
                    .map(|row| {
                        let est = row.estimate(r, u);
                        row.resolve(r, u, &est, &mut powers)
                    })
                    .collect()
            })
            .collect();
        Ok(cols)
    }

    /// `(x_j - u)^m / m!` with `m = n - r - 1`, at `bits`.
    fn mp_powers(&self, r: usize, u: f64, bits: usize) -> Vec<Mp> {
        let m = self.n() - r - 1;
        let inv_fact = multiprec::mp_one(bits) / multiprec::factorial(m, bits);
        let uu = multiprec::mp(u, bits);
        self.spectrum
            .values()
            .iter()
            .map(|&xj| multiprec::powu(&(multiprec::mp(xj, bits) - &uu), m, bits) * &inv_fact)
            .collect()
    }
}

/// `e_k` of the values with entry j removed, for every j.
fn leave_one_out(a: &[f64], k: usize) -> Vec<f64> {
    let n = a.len();
    if k >= n {
        return vec![0.0; n];
    }
    let mut suffix = vec![vec![0.0; k + 1]; n + 1];
    suffix[n][0] = 1.0;
    for j in (0..n).rev() {
        let (head, tail) = suffix.split_at_mut(j + 1);
        let next = &tail[0];
        let cur = &mut head[j];
        cur[0] = 1.0;
        for t in 1..=k {
            cur[t] = next[t] + a[j] * next[t - 1];
        }
    }
    let mut prefix = vec![0.0; k + 1];
    prefix[0] = 1.0;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let suf = &suffix[j + 1];
        out.push((0..=k).map(|t| prefix[t] * suf[k - t]).sum());
        for t in (1..=k).rev() {
            prefix[t] += a[j] * prefix[t - 1];
        }
    }
    out
}

/// Per-(s, v) factors: `(n-s)! e_{s-1}({v - x_i}_{i != j})`, scaled.
pub struct KernelRow<'a> {
    spec: &'a KernelSpec,
    s: usize,
    v: f64,
    e: Vec<f64>,
    e_abs: Vec<f64>,
    log_common: f64,
    mp: Mutex<Option<(usize, Arc<Vec<Mp>>)>>,
}

struct Estimate {
    value: f64,
    /// Natural log of the summed term magnitudes (upper bound, uses `e_k(|a|)`).
    log_abs: f64,
}

impl KernelRow<'_> {
    pub fn level(&self) -> usize {
        self.s
    }

    pub fn position(&self) -> f64 {
        self.v
    }

    fn contributes(&self, xj: f64, u: f64) -> Option<bool> {
        if self.v <= u {
            (xj > u).then_some(true)
        } else {
            (xj < u).then_some(false)
        }
    }

    fn estimate(&self, r: usize, u: f64) -> Estimate {
        let spec = self.spec;
        let n = spec.n();
        let m = n - r - 1;
        let lnm = ln_factorial(m);
        let x = spec.spectrum.values();
        let mut terms = Vec::with_capacity(n);
        let mut abs_logs = Vec::with_capacity(n);
        for (j, &xj) in x.iter().enumerate() {
            let Some(positive) = self.contributes(xj, u) else {
                continue;
            };
            let d = LogSigned::from_f64(xj - u).powi(m as u32);
            let base = d.logmag - lnm + self.log_common - spec.denominators[j].logmag;
            abs_logs.push(base + self.e_abs[j].ln());
            let e = LogSigned::from_f64(self.e[j]);
            let mut t = d * e / spec.denominators[j];
            t.logmag += -lnm + self.log_common;
            terms.push(if positive { t } else { -t });
        }
        let sum = signed_log_sum(&terms);
        let lmax = abs_logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_abs = if lmax == f64::NEG_INFINITY {
            lmax
        } else {
            lmax + abs_logs.iter().map(|l| (l - lmax).exp()).sum::<f64>().ln()
        };
        Estimate {
            value: sum.value.to_f64(),
            log_abs,
        }
    }

    /// `None` when the `f64` estimate is good enough for the `KernelSpec`'s precision mode.
    fn required_bits(&self, est: &Estimate) -> Option<usize> {
        let n = self.spec.n() as f64;
        match self.spec.precision {
            Precision::Double => None,
            Precision::Multi { bits } => Some(bits),
            Precision::Auto => {
                if est.log_abs == f64::NEG_INFINITY {
                    return None;
                }
                if Self::within_target(n, 53, est.log_abs, est.value) {
                    None
                } else {
                    // the f64 value is only a hint; a bad one costs a doubling in `eval`
                    let lost = if est.value != 0.0 && est.value.is_finite() {
                        est.log_abs - est.value.abs().ln()
                    } else {
                        est.log_abs
                    };
                    let bits = lost.max(0.0) / std::f64::consts::LN_2 + 2.0 * n.log2() + 110.0;
                    Some(round_bits(bits.ceil().max(0.0) as usize))
                }
            }
        }
    }

    /// Whether `4n` roundoffs at `bits` on terms of total size `e^log_abs` stay
    /// below [`AUTO_TARGET`] relative to `value`.
    fn within_target(n: f64, bits: usize, log_abs: f64, value: f64) -> bool {
        let log_err = (4.0 * n).ln() - bits as f64 * std::f64::consts::LN_2 + log_abs;
        value.is_finite() && value != 0.0 && log_err <= (AUTO_TARGET * value.abs()).ln()
    }

    fn mp_factors(&self, bits: usize) -> Arc<Vec<Mp>> {
        let mut slot = self.mp.lock().unwrap();
        if let Some((b, v)) = slot.as_ref() {
            if *b >= bits {
                return Arc::clone(v);
            }
        }
        let x = self.spec.spectrum.values();
        let n = x.len();
        let vv = multiprec::mp(self.v, bits);
        let a: Vec<Mp> = x.iter().map(|&xi| &vv - multiprec::mp(xi, bits)).collect();
        let fact = multiprec::factorial(n - self.s, bits);
        let e: Vec<Mp> = multiprec::elem_sym_leave_one_out(&a, self.s - 1, bits)
            .into_iter()
            .map(|ej| ej * &fact)
            .collect();
        let e = Arc::new(e);
        *slot = Some((bits, Arc::clone(&e)));
        e
    }

    /// Multiprecision sum given `(x_j - u)^m / m!` for every j.
    fn sum_multi(&self, u: f64, powers: &[Mp], bits: usize) -> f64 {
        let e = self.mp_factors(bits);
        let inv_d = self.spec.mp_inverse_denominators(bits);
        let x = self.spec.spectrum.values();
        let mut total = multiprec::mp_zero(bits);
        for (j, &xj) in x.iter().enumerate() {
            let Some(positive) = self.contributes(xj, u) else {
                continue;
            };
            let t = &(&powers[j] * &e[j]) * &inv_d[j];
            if positive {
                total += t;
            } else {
                total -= t;
            }
        }
        multiprec::to_f64(&total)
    }

    /// The estimate, or a multiprecision value when the estimate is not
    /// trusted; `powers` caches `(x_j - u)^m / m!` across rows sharing `(r, u)`.
    fn resolve(&self, r: usize, u: f64, est: &Estimate, powers: &mut Option<(usize, Vec<Mp>)>) -> f64 {
        let Some(mut bits) = self.required_bits(est) else {
            return est.value;
        };
        loop {
            if powers.as_ref().is_none_or(|(b, _)| *b < bits) {
                *powers = Some((bits, self.spec.mp_powers(r, u, bits)));
            }
            let (b, pw) = powers.as_ref().unwrap();
            let value = self.sum_multi(u, pw, *b);
            let settled = match self.spec.precision {
                Precision::Auto => Self::within_target(self.spec.n() as f64, *b, est.log_abs, value),
                _ => true,
            };
            // an exact zero never meets a relative target; the cap ends the search
            if settled || *b >= AUTO_MAX_BITS {
                return value;
            }
            bits = (2 * *b).min(AUTO_MAX_BITS);
        }
    }

    /// `K((r, u), (s, v))`.
    pub fn eval(&self, r: usize, u: f64) -> Result<f64> {
        self.spec.check_levels(r, self.s)?;
        self.spec.check_position(u)?;
        let est = self.estimate(r, u);
        Ok(self.resolve(r, u, &est, &mut None))
    }
}

/// `K_n((r, u), (s, v))` for the `KernelSpec`'s top row.
pub fn kernel_fixed_top(spec: &KernelSpec, r: usize, s: usize, u: f64, v: f64) -> Result<f64> {
    spec.check_levels(r, s)?;
    spec.check_position(u)?;
    spec.row(s, v)?.eval(r, u)
}
