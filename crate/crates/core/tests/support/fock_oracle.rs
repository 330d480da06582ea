//! Brute-force beam-splitter simulation in a truncated Fock space.
//!
//! The input `|j>_a |alpha>_b` with the coherent state cut at `n_max`
//! photons is expanded as a polynomial in the output creation operators,
//! `a^dag -> (c^dag + i d^dag)/sqrt2`, `b^dag -> (d^dag + i c^dag)/sqrt2`.

use std::collections::BTreeMap;

use num_complex::Complex64;

fn ln_fact(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn binom(n: u32, k: u32) -> f64 {
    (ln_fact(n) - ln_fact(k) - ln_fact(n - k)).exp().round()
}

fn i_pow(k: u32) -> Complex64 {
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)]
        [(k % 4) as usize]
}

/// Output probabilities `P(p, q)` for every `p + q <= j + n_max`; these
/// entries are exact because each total photon number comes from a single
/// coherent-state component.
pub fn oracle_joint(j: u32, alpha_sq: f64, n_max: u32) -> BTreeMap<(u32, u32), f64> {
    let alpha = alpha_sq.sqrt();
    let mut amps: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
    for n in 0..=n_max {
        let coherent = if alpha_sq == 0.0 {
            if n == 0 { 1.0 } else { 0.0 }
        } else {
            (-0.5 * alpha_sq + n as f64 * alpha.ln() - 0.5 * ln_fact(n)).exp()
        };
        if coherent == 0.0 {
            continue;
        }
        let norm = (-(0.5 * (ln_fact(j) + ln_fact(n))) - 0.5 * (j + n) as f64 * 2f64.ln()).exp();
        for r in 0..=j {
            for s in 0..=n {
                // c^(r + n - s) d^(j - r + s)
                let p = r + n - s;
                let q = j - r + s;
                let coeff = i_pow(j - r + n - s) * binom(j, r) * binom(n, s) * norm;
                let fock = (0.5 * (ln_fact(p) + ln_fact(q))).exp();
                *amps.entry((p, q)).or_default() += coeff * fock * coherent;
            }
        }
    }
    amps.into_iter().map(|(k, a)| (k, a.norm_sqr())).collect()
}
