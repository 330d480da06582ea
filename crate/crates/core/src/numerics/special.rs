use std::sync::OnceLock;

const EXACT_LIMIT: u32 = 20;
const CACHE_LEN: usize = 1024;

fn log_factorial_cache() -> &'static [f64] {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut table = Vec::with_capacity(CACHE_LEN);
        let mut exact: u64 = 1;
        for n in 0..CACHE_LEN {
            if n as u32 <= EXACT_LIMIT {
                if n > 0 {
                    exact *= n as u64;
                }
                table.push((exact as f64).ln());
            } else {
                let prev = table[n - 1];
                table.push(prev + (n as f64).ln());
            }
        }
        table
    })
}

/// `ln(n!)`. Exact integer product up to 20!, a running sum of logarithms
/// beyond that.
pub fn log_factorial(n: u32) -> f64 {
    let cache = log_factorial_cache();
    let idx = n as usize;
    if idx < cache.len() {
        return cache[idx];
    }
    let mut acc = cache[cache.len() - 1];
    for k in cache.len()..=idx {
        acc += (k as f64).ln();
    }
    acc
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// Physicists' Hermite polynomial `H_j(x)` by three-term recurrence.
pub fn hermite(j: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if j == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..j {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `(ln|H_j(x)|, sign)`, with the recurrence rescaled as it runs so the
/// magnitude never leaves floating-point range. Returns `-inf` for a root.
pub fn hermite_log_abs(j: u32, x: f64) -> (f64, f64) {
    let mut prev = 1.0_f64;
    if j == 0 {
        return (0.0, 1.0);
    }
    let mut cur = 2.0 * x;
    let mut log_scale = 0.0_f64;
    for k in 1..j {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > 1e150 || (mag < 1e-150 && mag > 0.0) {
            let s = mag.ln();
            cur /= mag;
            prev /= mag;
            log_scale += s;
        }
    }
    if cur == 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    (cur.abs().ln() + log_scale, cur.signum())
}

/// Laguerre polynomial `L_k(x)`.
pub fn laguerre(k: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for i in 1..k {
        let i = i as f64;
        let next = ((2.0 * i + 1.0 - x) * cur - i * prev) / (i + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

pub fn poisson_ln_pmf(mean: f64, k: u32) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + k as f64 * mean.ln() - log_factorial(k)
}

/// `P(N > k)` for `N ~ Poisson(mean)`, summed upward from `k + 1` so small
/// tails keep full relative precision.
pub fn poisson_upper_tail(mean: f64, k: u32) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut tail = 0.0;
    let mut i = k + 1;
    loop {
        let term = poisson_ln_pmf(mean, i).exp();
        tail += term;
        // past the mode the terms shrink geometrically
        if (i as f64) > mean && term <= tail * 1e-17 {
            break;
        }
        if term == 0.0 && (i as f64) > mean {
            break;
        }
        i += 1;
    }
    tail.min(1.0)
}

/// Binomial probabilities `C(x, m) eta^m (1-eta)^(x-m)` for `m = 0..=x`,
/// built row by row so `eta = 1` and `eta = 0` stay exact.
pub fn binomial_pmf_row(x: u32, eta: f64) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..x {
        let mut next = vec![0.0; row.len() + 1];
        for (m, &p) in row.iter().enumerate() {
            next[m] += p * (1.0 - eta);
            next[m + 1] += p * eta;
        }
        row = next;
    }
    row
}
