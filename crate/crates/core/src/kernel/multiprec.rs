//! Arbitrary-precision evaluation of the fixed-top-row kernel, for top rows
//! whose Lagrange terms cancel beyond what `f64` can carry (tightly clustered
//! atoms make individual terms exceed 1e1000 while the kernel stays O(n)).

use dashu_float::FBig;

pub(crate) type Mp = FBig;

pub(crate) fn mp(x: f64, bits: usize) -> Mp {
    Mp::try_from(x).expect("finite input").with_precision(bits).value()
}

pub(crate) fn mp_uint(k: usize, bits: usize) -> Mp {
    Mp::from(k as u64).with_precision(bits).value()
}

pub(crate) fn mp_one(bits: usize) -> Mp {
    mp_uint(1, bits)
}

pub(crate) fn mp_zero(bits: usize) -> Mp {
    mp_uint(0, bits)
}

pub(crate) fn to_f64(x: &Mp) -> f64 {
    x.to_f64().value()
}

/// `k!` at the working precision.
pub(crate) fn factorial(k: usize, bits: usize) -> Mp {
    let mut acc = mp_one(bits);
    for i in 2..=k {
        acc *= mp_uint(i, bits);
    }
    acc
}

pub(crate) fn powu(x: &Mp, mut k: usize, bits: usize) -> Mp {
    let mut result = mp_one(bits);
    let mut base = x.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = base.sqr();
        }
    }
    result
}

/// `1 / prod_{i != j} (x_j - x_i)` for every j.
pub(crate) fn inverse_denominators(x: &[f64], bits: usize) -> Vec<Mp> {
    let xs: Vec<Mp> = x.iter().map(|&v| mp(v, bits)).collect();
    (0..x.len())
        .map(|j| {
            let mut p = mp_one(bits);
            for (i, xi) in xs.iter().enumerate() {
                if i != j {
                    p *= &xs[j] - xi;
                }
            }
            mp_one(bits) / p
        })
        .collect()
}

/// `e_k` of the values with entry j removed, for every j (prefix/suffix convolution).
pub(crate) fn elem_sym_leave_one_out(a: &[Mp], k: usize, bits: usize) -> Vec<Mp> {
    let n = a.len();
    if k >= n {
        // only n-1 values remain
        return vec![mp_zero(bits); n];
    }
    // suffix[j][t] = e_t(a_j, ..., a_{n-1}) for t <= k
    let mut suffix: Vec<Vec<Mp>> = Vec::with_capacity(n + 1);
    let mut cur = vec![mp_zero(bits); k + 1];
    cur[0] = mp_one(bits);
    suffix.push(cur.clone());
    for j in (0..n).rev() {
        for t in (1..=k).rev() {
            let add = &cur[t - 1] * &a[j];
            cur[t] += add;
        }
        suffix.push(cur.clone());
    }
    suffix.reverse();
    let mut prefix = vec![mp_zero(bits); k + 1];
    prefix[0] = mp_one(bits);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let suf = &suffix[j + 1];
        let mut s = mp_zero(bits);
        for t in 0..=k {
            s += &prefix[t] * &suf[k - t];
        }
        out.push(s);
        for t in (1..=k).rev() {
            let add = &prefix[t - 1] * &a[j];
            prefix[t] += add;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leave_one_out_matches_direct() {
        let vals = [0.5, -1.25, 2.0, 0.75];
        let bits = 128;
        let a: Vec<Mp> = vals.iter().map(|&v| mp(v, bits)).collect();
        for k in 0..=4 {
            let got = elem_sym_leave_one_out(&a, k, bits);
            for j in 0..vals.len() {
                let rest: Vec<f64> = vals
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != j)
                    .map(|(_, &v)| v)
                    .collect();
                let want = crate::patterns::elem_sym(&rest, k);
                assert!((to_f64(&got[j]) - want).abs() < 1e-14, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn precision_survives_catastrophic_cancellation() {
        let bits = 256;
        let big = powu(&mp(10.0, bits), 60, bits);
        let x = &(&big + &mp_one(bits)) - &big;
        assert_eq!(to_f64(&x), 1.0);
        assert_eq!(to_f64(&factorial(5, bits)), 120.0);
    }
}
