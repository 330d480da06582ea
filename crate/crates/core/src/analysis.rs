//! Quantifying the photon-number-to-quadrature transition: residual metric
//! between difference distributions, exponential decay fits and the
//! threshold mean photon number per herald outcome.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{classical_full_with, ShiftConvention};
use crate::numerics::DiffDist;
use crate::quantum::{herald_mixture, heralded_diff, ExperimentParams};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 6.7e-6;
pub const DEFAULT_LOWER_CUT: f64 = 4.0;
/// Entries below this level do not count towards the compared support.
pub const SUPPORT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionPoint {
    pub alpha_sq: f64,
    pub s_classical: f64,
    pub nu: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub a_std_err: f64,
    pub b_std_err: f64,
    pub threshold: f64,
    /// `ln(a / threshold) / b`, or 0 when the whole curve is below threshold.
    pub alpha_sq_min: f64,
    pub points_used: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Ordinary least squares of `ln s` against `alpha_sq`.
    #[default]
    LogLinear,
    /// Gauss-Newton on the linear-space residuals, seeded by the log fit.
    GaussNewton,
}

/// `S = (1/nu) sum |P_obs - P_model|^2` over the bins where either
/// distribution exceeds [`SUPPORT_FLOOR`]; returns `(S, nu)`.
pub fn residual_metric(observed: &DiffDist, model: &DiffDist) -> (f64, usize) {
    let support: BTreeSet<i64> = observed
        .iter()
        .chain(model.iter())
        .filter(|(_, p)| *p > SUPPORT_FLOOR)
        .map(|(k, _)| k)
        .collect();
    if support.is_empty() {
        return (0.0, 0);
    }
    let sum: f64 = support
        .iter()
        .map(|k| (observed.get(*k) - model.get(*k)).powi(2))
        .sum();
    (sum / support.len() as f64, support.len())
}

fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::FitFailure("x values are degenerate".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (se_slope, se_intercept) = if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let s2 = rss / (n - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / n + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok((slope, intercept, se_slope, se_intercept))
}

/// Ordinary least squares; returns `(slope, intercept)`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::FitFailure("need at least two points".into()));
    }
    let (slope, intercept, _, _) = ols(xs, ys)?;
    Ok((slope, intercept))
}

/// Fits `s = A exp(-B alpha_sq)` to the points with `alpha_sq >= lower_cut`.
pub fn fit_exponential(points: &[TransitionPoint], threshold: f64, lower_cut: f64) -> Result<ExpFit> {
    fit_exponential_with(points, threshold, lower_cut, FitMethod::LogLinear)
}

pub fn fit_exponential_with(
    points: &[TransitionPoint],
    threshold: f64,
    lower_cut: f64,
    method: FitMethod,
) -> Result<ExpFit> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter {
            name: "threshold",
            value: threshold,
            reason: "threshold must be positive",
        });
    }
    let mut used: Vec<TransitionPoint> = points.iter().copied().filter(|p| p.alpha_sq >= lower_cut).collect();
    used.sort_by(|a, b| a.alpha_sq.total_cmp(&b.alpha_sq).then(a.s_classical.total_cmp(&b.s_classical)));
    let distinct = used.windows(2).filter(|w| w[0].alpha_sq != w[1].alpha_sq).count() + usize::from(!used.is_empty());
    if distinct < 3 {
        return Err(Error::FitFailure(format!(
            "need at least 3 distinct points above the lower cut {lower_cut}, found {distinct}"
        )));
    }
    if let Some(p) = used.iter().find(|p| !(p.s_classical > 0.0)) {
        return Err(Error::FitFailure(format!("non-positive residual at alpha_sq = {}", p.alpha_sq)));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.alpha_sq).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.s_classical.ln()).collect();
    let (slope, intercept, se_slope, se_intercept) = ols(&xs, &ys)?;
    let (mut a, mut b) = (intercept.exp(), -slope);
    let (mut a_se, mut b_se) = (a * se_intercept, se_slope);
    if method == FitMethod::GaussNewton {
        (a, b, a_se, b_se) = gauss_newton(&xs, &used, a, b)?;
    }
    if !(b > 0.0) {
        return Err(Error::FitFailure(format!("fitted decay rate {b} is not positive")));
    }
    let alpha_sq_min = if a > threshold { (a / threshold).ln() / b } else { 0.0 };
    Ok(ExpFit {
        a,
        b,
        a_std_err: a_se,
        b_std_err: b_se,
        threshold,
        alpha_sq_min,
        points_used: used.len(),
    })
}

fn gauss_newton(xs: &[f64], pts: &[TransitionPoint], a0: f64, b0: f64) -> Result<(f64, f64, f64, f64)> {
    let (mut ln_a, mut b) = (a0.ln(), b0);
    let ys: Vec<f64> = pts.iter().map(|p| p.s_classical).collect();
    let mut jtj = [[0.0; 2]; 2];
    let mut rss = 0.0;
    for _ in 0..100 {
        // parameters (ln A, B); model A exp(-B x)
        jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        rss = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let f = (ln_a - b * x).exp();
            let r = y - f;
            let g = [f, -x * f];
            for i in 0..2 {
                jtr[i] += g[i] * r;
                for k in 0..2 {
                    jtj[i][k] += g[i] * g[k];
                }
            }
            rss += r * r;
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if !(det.abs() > 0.0) {
            return Err(Error::FitFailure("singular Gauss-Newton step".into()));
        }
        let d0 = (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let d1 = (jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        ln_a += d0;
        b += d1;
        if d0.abs() < 1e-14 * ln_a.abs().max(1.0) && d1.abs() < 1e-14 * b.abs().max(1.0) {
            break;
        }
    }
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let s2 = rss / dof;
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let var_ln_a = s2 * jtj[1][1] / det;
    let var_b = s2 * jtj[0][0] / det;
    let a = ln_a.exp();
    Ok((a, b, a * var_ln_a.max(0.0).sqrt(), var_b.max(0.0).sqrt()))
}

/// Where the difference statistics come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Synthetic data from the full quantum model.
    Model,
    /// Measured distributions, one per grid point in grid order.
    Observed(Vec<DiffDist>),
}

/// What the data are compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    #[default]
    Classical,
    Quantum,
}

fn reference_dist(j: u32, params: &ExperimentParams, reference: Reference, convention: ShiftConvention) -> Result<DiffDist> {
    match reference {
        Reference::Classical => classical_full_with(j, params, convention),
        Reference::Quantum => heralded_diff(j, params),
    }
}

/// Residual metric at every grid point, evaluated in parallel.
pub fn transition_scan(
    j: u32,
    alpha_sq_grid: &[f64],
    params: &ExperimentParams,
    data_source: &DataSource,
    reference: Reference,
) -> Result<Vec<TransitionPoint>> {
    transition_scan_with(j, alpha_sq_grid, params, data_source, reference, ShiftConvention::default())
}

pub fn transition_scan_with(
    j: u32,
    alpha_sq_grid: &[f64],
    params: &ExperimentParams,
    data_source: &DataSource,
    reference: Reference,
    convention: ShiftConvention,
) -> Result<Vec<TransitionPoint>> {
    if let Some(a) = alpha_sq_grid.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha_sq",
            value: *a,
            reason: "scan grid values must be positive and finite",
        });
    }
    if let DataSource::Observed(obs) = data_source {
        if obs.len() != alpha_sq_grid.len() {
            return Err(Error::Shape(format!(
                "{} observed distributions for {} grid points",
                obs.len(),
                alpha_sq_grid.len()
            )));
        }
    }
    alpha_sq_grid
        .par_iter()
        .enumerate()
        .map(|(i, &alpha_sq)| {
            let p = params.with_alpha_sq(alpha_sq);
            let observed = match data_source {
                DataSource::Model => heralded_diff(j, &p)?,
                DataSource::Observed(obs) => obs[i].clone(),
            };
            let model = reference_dist(j, &p, reference, convention)?;
            let (s_classical, nu) = residual_metric(&observed, &model);
            Ok(TransitionPoint { alpha_sq, s_classical, nu })
        })
        .collect()
}

/// First crossing of `threshold` from above, interpolated linearly in
/// `ln s` between neighbouring grid points.
pub fn threshold_crossing(points: &[TransitionPoint], threshold: f64) -> Option<f64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.alpha_sq.total_cmp(&b.alpha_sq));
    pts.windows(2).find_map(|w| {
        let (lo, hi) = (w[0], w[1]);
        if lo.s_classical > threshold && hi.s_classical <= threshold {
            let (l0, l1, lt) = (lo.s_classical.ln(), hi.s_classical.ln(), threshold.ln());
            Some(lo.alpha_sq + (hi.alpha_sq - lo.alpha_sq) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}

/// One point of the threshold-versus-signal-size relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub j: u32,
    /// Mean photon number of the heralded signal.
    pub n_mean: f64,
    pub fit: ExpFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
}

/// Scans and fits every herald outcome, then fits the threshold mean
/// photon number linearly against the signal mean.
pub fn scaling_analysis(
    herald_outcomes: &[u32],
    alpha_sq_grid: &[f64],
    params: &ExperimentParams,
    threshold: f64,
    lower_cut: f64,
) -> Result<ScalingResult> {
    let points = herald_outcomes
        .par_iter()
        .map(|&j| {
            let scan = transition_scan(j, alpha_sq_grid, params, &DataSource::Model, Reference::Classical)?;
            let fit = fit_exponential(&scan, threshold, lower_cut)?;
            let n_mean = herald_mixture(j, &params.source, &params.trunc).mean();
            Ok(ScalingPoint { j, n_mean, fit })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.n_mean).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.fit.alpha_sq_min).collect();
    let (slope, intercept) = fit_linear(&xs, &ys)?;
    Ok(ScalingResult { points, slope, intercept })
}
