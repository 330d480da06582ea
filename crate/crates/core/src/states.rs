//! Photon-number, phase-space and quadrature representations of the
//! heralded signal, and the herald-mode state engineered by conditioning on
//! a weak-field homodyne outcome.
//!
//! Phase-space convention: vacuum quadrature variance 1, so the quadrature
//! density of `|k>` is `H_k(x/sqrt2)^2 e^{-x^2/2} / (sqrt(2 pi) 2^k k!)` and
//! the Wigner function integrates to 1.

use std::f64::consts::PI;

use crate::numerics::{
    binomial_pmf_row, hermite_log_abs, laguerre, log_factorial, PhotonDist, TruncationPolicy,
};
use crate::quantum::{herald_mixture, outcome_probabilities, ExperimentParams, SourceParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpacePoint {
    pub x: f64,
    pub p: f64,
}

impl PhaseSpacePoint {
    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }
}

/// Photon-number distribution of the signal heralded by outcome `j`.
pub fn heralded_signal_dist(j: u32, source: &SourceParams, trunc: &TruncationPolicy) -> PhotonDist {
    let mix = herald_mixture(j, source, trunc);
    PhotonDist::with_deficit(mix.weights.iter().copied(), mix.tail)
        .expect("herald weights carry positive mass")
}

fn positive_mean(dist: &PhotonDist) -> Result<f64> {
    let mean = dist.mean();
    if mean > 0.0 {
        Ok(mean)
    } else {
        Err(Error::Domain("distribution has zero mean photon number".into()))
    }
}

/// Second-order correlation `sum (k^2 - k) P(k) / (sum k P(k))^2`.
pub fn g2_of_dist(dist: &PhotonDist) -> Result<f64> {
    let mean = positive_mean(dist)?;
    let factorial_moment: f64 = dist.iter().map(|(k, p)| k as f64 * (k as f64 - 1.0) * p).sum();
    Ok(factorial_moment / (mean * mean))
}

/// Variance over mean.
pub fn fano_of_dist(dist: &PhotonDist) -> Result<f64> {
    let mean = positive_mean(dist)?;
    Ok(dist.variance() / mean)
}

/// Single-mode binomial loss.
pub fn thinned(dist: &PhotonDist, eta: f64) -> Result<PhotonDist> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "efficiency must lie in (0, 1]",
        });
    }
    let mut out = Vec::new();
    for (k, p) in dist.iter() {
        for (m, w) in binomial_pmf_row(k, eta).into_iter().enumerate() {
            out.push((m as u32, p * w));
        }
    }
    PhotonDist::with_deficit(out, dist.deficit())
}

/// Wigner function of a diagonal Fock mixture,
/// `sum_k P(k) (-1)^k L_k(r^2) e^{-r^2/2} / (2 pi)`.
pub fn wigner(dist: &PhotonDist, pt: PhaseSpacePoint) -> f64 {
    let r2 = pt.x * pt.x + pt.p * pt.p;
    let gauss = (-0.5 * r2).exp() / (2.0 * PI);
    dist.iter()
        .map(|(k, p)| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            p * sign * laguerre(k, r2) * gauss
        })
        .sum()
}

/// Quadrature density of a diagonal Fock mixture at `x`.
pub fn quadrature_dist(dist: &PhotonDist, x: f64) -> f64 {
    let base = -0.5 * (2.0 * PI).ln() - 0.5 * x * x;
    dist.iter()
        .map(|(k, p)| {
            let (ln_h, _) = hermite_log_abs(k, x / std::f64::consts::SQRT_2);
            if ln_h == f64::NEG_INFINITY {
                return 0.0;
            }
            p * (base - k as f64 * std::f64::consts::LN_2 - log_factorial(k) + 2.0 * ln_h).exp()
        })
        .sum()
}

/// Photon-number distribution of the herald mode after detecting `(m, n)`
/// at the weak-field homodyne output.
///
/// For each herald number `j` the full-model joint probability of `(m, n)`
/// is evaluated with the per-`j` normalized herald mixture, and the result is
/// normalized over `j`. Without interference the signal and coherent state
/// are treated as occupying orthogonal modes (overlap 0).
pub fn engineered_herald_dist(
    m: u32,
    n: u32,
    params: &ExperimentParams,
    interfering: bool,
) -> Result<PhotonDist> {
    params.validate()?;
    let mut detector = params.detector;
    if !interfering {
        detector.mode_overlap = 0.0;
    }
    let trunc = &params.trunc;

    // without pairs no herald outcome other than 0 can occur
    if params.source.lambda_mag == 0.0 {
        let p0 = outcome_probabilities(m, n, &detector, trunc, 0, 0)?[0];
        if !(p0 > 1e-300) {
            return Err(Error::UnreachableOutcome { m, n });
        }
        return Ok(PhotonDist::point(0));
    }

    let mut cache: Vec<f64> = Vec::new();
    let mut values: Vec<(u32, f64)> = Vec::new();
    let mut total = 0.0;
    let mut tail_estimate = f64::INFINITY;
    let cap = trunc.hard_cap;
    for j in 0..=cap {
        let mix = herald_mixture(j, &params.source, trunc);
        let f_max = mix.max_pairs();
        if f_max as usize >= cache.len() {
            // extend in blocks to keep the parallel batches reasonably sized
            let start = cache.len() as u32;
            let end = f_max.max(start + 15).min(cap.max(f_max));
            cache.extend(outcome_probabilities(m, n, &detector, trunc, start, end)?);
        }
        let v: f64 = mix.weights.iter().map(|(f, w)| w * cache[*f as usize]).sum();
        values.push((j, v));
        total += v;

        if j >= 2 {
            let prev = values[j as usize - 1].1;
            if v < prev && prev > 0.0 {
                let ratio = v / prev;
                tail_estimate = v * ratio / (1.0 - ratio);
            }
            if v == 0.0 && prev == 0.0 && total > 0.0 {
                tail_estimate = 0.0;
            }
        }
        if total > 0.0 && tail_estimate < trunc.tail_epsilon * total {
            break;
        }
    }
    if !(total > 1e-300) {
        return Err(Error::UnreachableOutcome { m, n });
    }
    let tail = if tail_estimate.is_finite() {
        tail_estimate / (total + tail_estimate)
    } else {
        0.0
    };
    PhotonDist::with_deficit(values, tail)
}
