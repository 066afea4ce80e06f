//! Exact rational evaluation of the fixed-top-row kernel; the correctness
//! oracle for the floating-point paths.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Largest top-row size the oracle accepts.
pub const EXACT_MAX_N: usize = 16;

fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn elem_sym(values: &[BigRational], k: usize) -> BigRational {
    if k > values.len() {
        return BigRational::zero();
    }
    let mut e = vec![BigRational::zero(); k + 1];
    e[0] = BigRational::one();
    for a in values {
        for t in (1..=k).rev() {
            let add = &e[t - 1] * a;
            e[t] += add;
        }
    }
    e.swap_remove(k)
}

/// The kernel at `((r, u), (s, v))` for the top row `x` (strictly decreasing), exactly.
pub fn kernel_fixed_top_exact(
    x: &[BigRational],
    r: usize,
    s: usize,
    u: &BigRational,
    v: &BigRational,
) -> Result<BigRational> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptySpectrum);
    }
    if n > EXACT_MAX_N {
        return Err(Error::SizeGuard { n, max: EXACT_MAX_N });
    }
    if r == 0 || r >= n {
        return Err(Error::LevelOutOfRange { level: r, max: n - 1 });
    }
    if s == 0 || s > n {
        return Err(Error::LevelOutOfRange { level: s, max: n });
    }
    for i in 1..n {
        if x[i] >= x[i - 1] {
            return Err(Error::NotDecreasing { index: i });
        }
    }
    if let Some(xj) = x.iter().find(|xj| *xj == u) {
        return Err(Error::AtomCollision {
            u: rational_to_f64(u),
            atom: rational_to_f64(xj),
        });
    }
    let m = n - r - 1;
    let lower = v <= u;
    let mut total = BigRational::zero();
    let coeff = BigRational::new(factorial(n - s), factorial(m));
    for j in 0..n {
        let contributes = if lower { x[j] > *u } else { x[j] < *u };
        if !contributes {
            continue;
        }
        let rest: Vec<BigRational> = (0..n).filter(|&i| i != j).map(|i| v - &x[i]).collect();
        let mut denom = BigRational::one();
        for i in (0..n).filter(|&i| i != j) {
            denom *= &x[j] - &x[i];
        }
        let mut pow = BigRational::one();
        let d = &x[j] - u;
        for _ in 0..m {
            pow *= &d;
        }
        let term = pow * &coeff * elem_sym(&rest, s - 1) / denom;
        if lower {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

/// Exact rational with the same value as the double.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    // keep the leading 64 bits of numerator and denominator, track the exponent
    fn top_bits(b: &BigInt) -> (f64, i64) {
        let bits = b.bits() as i64;
        let shift = (bits - 64).max(0);
        let head = b.abs() >> shift as usize;
        (num_traits::ToPrimitive::to_f64(&head).unwrap_or(f64::NAN), shift)
    }
    if x.is_zero() {
        return 0.0;
    }
    let (nf, ne) = top_bits(x.numer());
    let (df, de) = top_bits(x.denom());
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    let e = ne - de;
    let half = (e / 2) as i32;
    sign * (nf / df) * 2f64.powi(half) * 2f64.powi(e as i32 - half)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn two_particle_example_is_exactly_one() {
        let x = [q(1, 1), q(0, 1)];
        let k = kernel_fixed_top_exact(&x, 1, 1, &q(1, 2), &q(1, 2)).unwrap();
        assert_eq!(k, BigRational::one());
        let k = kernel_fixed_top_exact(&x, 1, 1, &q(1, 4), &q(3, 4)).unwrap();
        assert_eq!(k, BigRational::one());
        let k = kernel_fixed_top_exact(&x, 1, 1, &q(2, 1), &q(0, 1)).unwrap();
        assert!(k.is_zero());
    }

    #[test]
    fn guards() {
        let x: Vec<BigRational> = (0..17).rev().map(|i| q(i, 1)).collect();
        assert!(matches!(
            kernel_fixed_top_exact(&x, 1, 1, &q(1, 2), &q(1, 2)),
            Err(Error::SizeGuard { .. })
        ));
        let x = [q(1, 1), q(0, 1)];
        assert!(matches!(
            kernel_fixed_top_exact(&x, 2, 1, &q(1, 2), &q(1, 2)),
            Err(Error::LevelOutOfRange { .. })
        ));
        assert!(matches!(
            kernel_fixed_top_exact(&x, 1, 1, &q(1, 1), &q(1, 2)),
            Err(Error::AtomCollision { .. })
        ));
    }

    #[test]
    fn conversions_round_trip() {
        for &v in &[0.1, -3.75, 1e-300, 123456.789] {
            assert_eq!(rational_to_f64(&rational_from_f64(v)), v);
        }
    }
}
