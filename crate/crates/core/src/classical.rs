//! Difference statistics under the classical-field approximation, evaluated
//! on the integer difference grid.
//!
//! The ideal density is the scaled quadrature distribution of a Fock state.
//! Loss rescales the amplitude, adds a Gaussian blur and, for unequal arm
//! efficiencies, shifts the mean. Mode mismatch contributes another Gaussian
//! factor. Everything Gaussian is convolved on a real grid of spacing
//! [`GRID_SPACING`] before the result is sampled at integer `dn` and
//! renormalized.

use serde::{Deserialize, Serialize};

use crate::numerics::{hermite_log_abs, log_factorial, DiffDist, TruncationPolicy};
use crate::quantum::{herald_mixture, ExperimentParams};
use crate::{Error, Result};

pub const GRID_SPACING: f64 = 0.25;
/// Support window half-width in combined standard deviations.
const WINDOW_SDS: f64 = 10.0;

/// Sign of the imbalance offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftConvention {
    /// Mean at `|a|^2 (eta_c - eta_d) / 2`, the same mean as the exact model
    /// for `dn = m - n`.
    #[default]
    CountingDifference,
    /// Mean at `|a|^2 (eta_d - eta_c) / 2`, the opposite sign convention for
    /// the shifted variable.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalChannel {
    /// Scaled amplitude `eta |a|`.
    pub g: f64,
    /// Blur width `sqrt(g^2 (1 - eta) / eta)`.
    pub sigma: f64,
    /// Imbalance offset of the mean.
    pub shift: f64,
    /// `(eta_c + eta_d) / 2`.
    pub eta_mean: f64,
}

impl ClassicalChannel {
    pub fn new(eta_c: f64, eta_d: f64, alpha_sq: f64, convention: ShiftConvention) -> Result<Self> {
        for (name, eta) in [("eta_c", eta_c), ("eta_d", eta_d)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: eta,
                    reason: "efficiency must lie in (0, 1]",
                });
            }
        }
        if !(alpha_sq >= 0.0 && alpha_sq.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha_sq",
                value: alpha_sq,
                reason: "must be finite and non-negative",
            });
        }
        let eta_mean = 0.5 * (eta_c + eta_d);
        let g = eta_mean * alpha_sq.sqrt();
        let sigma = (g * g * (1.0 - eta_mean) / eta_mean).max(0.0).sqrt();
        let half_imbalance = 0.5 * alpha_sq * (eta_d - eta_c);
        let shift = match convention {
            ShiftConvention::CountingDifference => -half_imbalance,
            ShiftConvention::AsPrinted => half_imbalance,
        };
        Ok(Self {
            g,
            sigma,
            shift,
            eta_mean,
        })
    }
}

fn undefined_at_zero() -> Error {
    Error::Domain("classical model undefined at alpha=0".into())
}

/// Ideal density at real `x` for amplitude `sqrt(amp_sq)`:
/// `H_j(x / sqrt(2 amp_sq))^2 e^{-x^2 / (2 amp_sq)} / (sqrt(2 pi amp_sq) 2^j j!)`.
pub fn classical_density(j: u32, amp_sq: f64, x: f64) -> Result<f64> {
    if !(amp_sq > 0.0) {
        return Err(undefined_at_zero());
    }
    Ok(density_unchecked(j, amp_sq, x))
}

fn density_unchecked(j: u32, amp_sq: f64, x: f64) -> f64 {
    let (ln_h, _) = hermite_log_abs(j, x / (2.0 * amp_sq).sqrt());
    if ln_h == f64::NEG_INFINITY {
        return 0.0;
    }
    let ln_p = -0.5 * (2.0 * std::f64::consts::PI * amp_sq).ln()
        - j as f64 * std::f64::consts::LN_2
        - log_factorial(j)
        + 2.0 * ln_h
        - x * x / (2.0 * amp_sq);
    ln_p.exp()
}

/// Ideal classical-approximation density at integer `dn`.
pub fn classical_ideal(j: u32, alpha_sq: f64, dn: i64) -> Result<f64> {
    classical_density(j, alpha_sq, dn as f64)
}

/// A weighted mixture of ideal Fock densities at amplitude `sqrt(ideal_amp_sq)`,
/// blurred by a zero-mean Gaussian of variance `blur_var`, shifted, then
/// sampled at integers.
fn discretize(components: &[(u32, f64)], ideal_amp_sq: f64, blur_var: f64, shift: f64) -> Result<DiffDist> {
    let ideal_var: f64 = components
        .iter()
        .map(|(f, w)| w * ideal_amp_sq * (2.0 * *f as f64 + 1.0))
        .sum();
    let sd = (ideal_var + blur_var).sqrt();
    let half_width = WINDOW_SDS * sd + 1.0;
    let lo = (shift - half_width).ceil() as i64;
    let hi = (shift + half_width).floor() as i64;

    let ideal_at = |x: f64| -> f64 {
        if ideal_amp_sq == 0.0 {
            return 0.0;
        }
        components
            .iter()
            .map(|(f, w)| w * density_unchecked(*f, ideal_amp_sq, x))
            .sum()
    };

    let samples: Vec<(i64, f64)> = if blur_var <= 0.0 {
        (lo..=hi).map(|dn| (dn, ideal_at(dn as f64 - shift))).collect()
    } else {
        let h = GRID_SPACING;
        let n = (half_width / h).ceil() as i64 + 1;
        let kn = ((WINDOW_SDS * blur_var.sqrt()) / h).ceil().max(1.0) as i64;
        let mut kernel: Vec<f64> = (-kn..=kn)
            .map(|k| {
                let x = k as f64 * h;
                (-x * x / (2.0 * blur_var)).exp()
            })
            .collect();
        let ksum: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|v| *v /= ksum);

        // a vanishing ideal amplitude leaves a point mass at the origin
        let ideal: Vec<f64> = if ideal_amp_sq == 0.0 {
            (-n..=n).map(|i| if i == 0 { 1.0 / h } else { 0.0 }).collect()
        } else {
            (-n..=n).map(|i| ideal_at(i as f64 * h)).collect()
        };
        let len = ideal.len() as i64;
        let blurred: Vec<f64> = (0..len)
            .map(|i| {
                let mut acc = 0.0;
                for (kk, w) in kernel.iter().enumerate() {
                    let src = i - (kk as i64 - kn);
                    if (0..len).contains(&src) {
                        acc += w * ideal[src as usize];
                    }
                }
                acc
            })
            .collect();
        let interp = |x: f64| -> f64 {
            let pos = x / h + n as f64;
            if pos < 0.0 || pos > (len - 1) as f64 {
                return 0.0;
            }
            let i0 = pos.floor() as usize;
            let frac = pos - i0 as f64;
            if i0 + 1 >= blurred.len() {
                return blurred[i0];
            }
            blurred[i0] * (1.0 - frac) + blurred[i0 + 1] * frac
        };
        (lo..=hi).map(|dn| (dn, interp(dn as f64 - shift))).collect()
    };

    let total: f64 = samples.iter().map(|(_, p)| p).sum();
    DiffDist::with_deficit(samples, 1.0 - total)
}

/// Lossy classical statistics for a pure Fock signal `j`.
pub fn classical_lossy(
    j: u32,
    alpha_sq: f64,
    channel: &ClassicalChannel,
    _trunc: &TruncationPolicy,
) -> Result<DiffDist> {
    if !(alpha_sq > 0.0) {
        return Err(undefined_at_zero());
    }
    discretize(&[(j, 1.0)], channel.g * channel.g, channel.sigma * channel.sigma, channel.shift)
}

/// Full classical model for herald outcome `j`: herald mixture, mode
/// mismatch and imbalanced loss, with the counting-difference sign.
pub fn classical_full(j: u32, params: &ExperimentParams) -> Result<DiffDist> {
    classical_full_with(j, params, ShiftConvention::default())
}

pub fn classical_full_with(
    j: u32,
    params: &ExperimentParams,
    convention: ShiftConvention,
) -> Result<DiffDist> {
    params.validate()?;
    let det = &params.detector;
    if !(det.alpha_sq > 0.0) {
        return Err(undefined_at_zero());
    }
    let overlap = det.mode_overlap;
    let matched =
        ClassicalChannel::new(det.eta_c, det.eta_d, overlap * det.alpha_sq, convention)?;
    let orthogonal = ClassicalChannel::new(
        det.eta_c,
        det.eta_d,
        (1.0 - overlap) * det.alpha_sq,
        convention,
    )?;
    // the orthogonal factor is a vacuum signal: a Gaussian of variance
    // g^2 + sigma^2, folded into the blur
    let orthogonal_var = orthogonal.g.powi(2) + orthogonal.sigma.powi(2);
    let mixture = herald_mixture(j, &params.source, &params.trunc);
    let dist = discretize(
        &mixture.weights,
        matched.g * matched.g,
        matched.sigma * matched.sigma + orthogonal_var,
        matched.shift + orthogonal.shift,
    )?;
    let deficit = 1.0 - (1.0 - dist.deficit()) * (1.0 - mixture.tail);
    DiffDist::with_deficit(dist.iter(), deficit)
}
