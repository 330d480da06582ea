use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result};

const TABLE_ROWS: usize = 400;

fn pascal() -> &'static Vec<Vec<Option<i128>>> {
    static TABLE: OnceLock<Vec<Vec<Option<i128>>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<Option<i128>>> = Vec::with_capacity(TABLE_ROWS);
        rows.push(vec![Some(1)]);
        for n in 1..TABLE_ROWS {
            let prev = &rows[n - 1];
            let mut row = Vec::with_capacity(n + 1);
            row.push(Some(1));
            for k in 1..n {
                let v = match (prev[k - 1], prev[k]) {
                    (Some(a), Some(b)) => a.checked_add(b),
                    _ => None,
                };
                row.push(v);
            }
            row.push(Some(1));
            rows.push(row);
        }
        rows
    })
}

/// Exact `C(n, k)` as a 128-bit integer; `Some(0)` when `k > n`, `None` on
/// overflow.
pub fn binomial_exact(n: u32, k: u32) -> Option<i128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    if (n as usize) < TABLE_ROWS {
        return pascal()[n as usize][k as usize];
    }
    let mut acc: i128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul((n - i) as i128)? / (i + 1) as i128;
    }
    Some(acc)
}

/// The alternating interference sum `sum_k C(m, m+k-j) C(n, k) (-1)^k`
/// evaluated in exact integer arithmetic.
///
/// Each term is bounded by `C(m+n, j)` (Vandermonde), so the 128-bit width
/// covers every `(j, m, n)` with `m + n <= 130` and, for small `j`, far
/// beyond.
pub fn interference_kernel(j: u32, m: u32, n: u32) -> Result<i128> {
    let overflow = || Error::KernelOverflow { j, m, n };
    let k_lo = j.saturating_sub(m);
    let k_hi = j.min(n);
    let mut sum: i128 = 0;
    for k in k_lo..=k_hi {
        let a = binomial_exact(m, j - k).ok_or_else(overflow)?;
        let b = binomial_exact(n, k).ok_or_else(overflow)?;
        let term = a.checked_mul(b).ok_or_else(overflow)?;
        sum = if k % 2 == 0 {
            sum.checked_add(term)
        } else {
            sum.checked_sub(term)
        }
        .ok_or_else(overflow)?;
    }
    Ok(sum)
}

/// `ln |K(j, m, n)|`, or `None` when the kernel vanishes.
///
/// Falls back to arbitrary-precision integers where the 128-bit sum
/// overflows, so the result stays exact up to the final rounding.
pub fn interference_kernel_ln_abs(j: u32, m: u32, n: u32) -> Option<f64> {
    match interference_kernel(j, m, n) {
        Ok(0) => None,
        Ok(k) => Some((k.unsigned_abs() as f64).ln()),
        Err(_) => big_kernel_ln_abs(j, m, n),
    }
}

fn big_binomial(n: u32, k: u32) -> BigInt {
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn big_kernel_ln_abs(j: u32, m: u32, n: u32) -> Option<f64> {
    let k_lo = j.saturating_sub(m);
    let k_hi = j.min(n);
    if k_lo > k_hi {
        return None;
    }
    let mut term = big_binomial(m, j - k_lo) * big_binomial(n, k_lo);
    let mut sum = BigInt::zero();
    for k in k_lo..=k_hi {
        if k % 2 == 0 {
            sum += &term;
        } else {
            sum -= &term;
        }
        if k < k_hi {
            // C(m, j-k-1) C(n, k+1) from C(m, j-k) C(n, k); the division is exact
            term *= u64::from(j - k) * u64::from(n - k);
            term /= u64::from(m + k + 1 - j) * u64::from(k + 1);
        }
    }
    if sum.is_zero() {
        return None;
    }
    let mag = sum.magnitude();
    let bits = mag.bits();
    let shift = bits.saturating_sub(64);
    let top = (mag >> shift).to_f64()?;
    Some(top.ln() + shift as f64 * std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent evaluation straight from the defining sum, with the lower
    // binomial index taken literally.
    fn kernel_direct(j: u32, m: u32, n: u32) -> i128 {
        let mut s = 0i128;
        for k in 0..=j as i64 {
            let lower = m as i64 + k - j as i64;
            let a = if lower < 0 || lower > m as i64 {
                0
            } else {
                binomial_exact(m, lower as u32).unwrap()
            };
            let b = binomial_exact(n, k as u32).unwrap();
            s += if k % 2 == 0 { a * b } else { -a * b };
        }
        s
    }

    #[test]
    fn documented_values() {
        for m in 0..10 {
            for n in 0..10 {
                assert_eq!(interference_kernel(0, m, n).unwrap(), 1);
            }
        }
        assert_eq!(interference_kernel(1, 3, 1).unwrap(), 2);
        assert_eq!(interference_kernel(2, 2, 2).unwrap(), -2);
    }

    #[test]
    fn matches_direct_sum() {
        for j in 0..=8 {
            for m in 0..=25 {
                for n in 0..=25 {
                    assert_eq!(interference_kernel(j, m, n).unwrap(), kernel_direct(j, m, n));
                }
            }
        }
    }

    #[test]
    fn squared_kernel_is_swap_symmetric() {
        for j in 0..=6 {
            for m in 0..=20 {
                for n in 0..=20 {
                    let a = interference_kernel(j, m, n).unwrap();
                    let b = interference_kernel(j, n, m).unwrap();
                    assert_eq!(a * a, b * b, "j={j} m={m} n={n}");
                }
            }
        }
    }

    #[test]
    fn single_photon_kernel_is_m_minus_n() {
        for m in 0..30 {
            for n in 0..30 {
                assert_eq!(interference_kernel(1, m, n).unwrap(), m as i128 - n as i128);
            }
        }
    }

    #[test]
    fn wide_inputs_fit_or_report_the_triple() {
        assert!(interference_kernel(16, 60, 60).is_ok());
        assert!(interference_kernel(60, 65, 65).is_ok());
        let err = interference_kernel(150, 150, 150).unwrap_err();
        assert_eq!(err, Error::KernelOverflow { j: 150, m: 150, n: 150 });
    }

    #[test]
    fn binomial_beyond_table() {
        assert_eq!(binomial_exact(500, 3), Some(500 * 499 * 498 / 6));
        assert_eq!(binomial_exact(5, 7), Some(0));
        assert_eq!(binomial_exact(20, 10), Some(184756));
    }

    #[test]
    fn log_kernel_agrees_across_the_overflow_boundary() {
        for &(j, m, n) in &[(3, 5, 2), (6, 10, 4), (12, 40, 33), (2, 1, 1), (9, 3, 20), (7, 2, 3)] {
            let exact = interference_kernel(j, m, n).unwrap();
            let via_big = big_kernel_ln_abs(j, m, n);
            if exact == 0 {
                assert_eq!(via_big, None);
            } else {
                let want = (exact.unsigned_abs() as f64).ln();
                assert!((via_big.unwrap() - want).abs() < 1e-12 * want.max(1.0));
            }
        }
        assert!(interference_kernel(103, 0, 148).is_err());
        // with m = 0 only the k = j term survives: C(n, j)
        let ln = interference_kernel_ln_abs(103, 0, 148).unwrap();
        let want = crate::numerics::ln_binomial(148, 103);
        assert!((ln - want).abs() < 1e-9 * want);
    }
}
