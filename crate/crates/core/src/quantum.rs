//! Exact difference statistics without the classical-field approximation:
//! ideal Fock-state interference, detector loss, mode mismatch and imperfect
//! heralding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{
    interference_kernel_ln_abs, ln_binomial, log_factorial, poisson_upper_tail, DiffDist, Grid,
    JointPhotonDist, TruncationPolicy,
};
use crate::{Error, Result};

/// Pair source and herald arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// `|lambda| = tanh r`.
    pub lambda_mag: f64,
    /// Total herald-arm efficiency.
    pub eta_h: f64,
}

impl SourceParams {
    pub fn new(lambda_mag: f64, eta_h: f64) -> Result<Self> {
        let s = Self { lambda_mag, eta_h };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda_mag) {
            return Err(Error::InvalidParameter {
                name: "lambda_mag",
                value: self.lambda_mag,
                reason: "must lie in [0, 1)",
            });
        }
        check_efficiency("eta_h", self.eta_h)
    }

    /// Ratio of the negative-binomial herald mixture, `lambda^2 (1 - eta_h)`.
    pub fn mixture_ratio(&self) -> f64 {
        self.lambda_mag * self.lambda_mag * (1.0 - self.eta_h)
    }
}

/// Signal arms and the coherent state. The coherent-state phase is not
/// represented: the heralded signal carries no phase reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub eta_c: f64,
    pub eta_d: f64,
    pub mode_overlap: f64,
    /// Mean photon number `|alpha|^2` of the coherent state.
    pub alpha_sq: f64,
}

impl DetectorParams {
    pub fn new(eta_c: f64, eta_d: f64, mode_overlap: f64, alpha_sq: f64) -> Result<Self> {
        let d = Self {
            eta_c,
            eta_d,
            mode_overlap,
            alpha_sq,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        check_efficiency("eta_c", self.eta_c)?;
        check_efficiency("eta_d", self.eta_d)?;
        if !(0.0..=1.0).contains(&self.mode_overlap) {
            return Err(Error::InvalidParameter {
                name: "mode_overlap",
                value: self.mode_overlap,
                reason: "must lie in [0, 1]",
            });
        }
        check_alpha_sq(self.alpha_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub source: SourceParams,
    pub detector: DetectorParams,
    #[serde(default)]
    pub trunc: TruncationPolicy,
}

/// Mode overlap that best reproduces the measured statistics.
pub const TABLE1_MODE_OVERLAP: f64 = 0.82;

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.detector.validate()?;
        self.trunc.validate()
    }

    /// Measured operating point: `lambda = 0.797`, `eta_h = 0.395`,
    /// `eta_c = 0.274`, `eta_d = 0.352`, overlap 0.82.
    pub fn table1(alpha_sq: f64) -> Self {
        Self {
            source: SourceParams {
                lambda_mag: 0.797,
                eta_h: 0.395,
            },
            detector: DetectorParams {
                eta_c: 0.274,
                eta_d: 0.352,
                mode_overlap: TABLE1_MODE_OVERLAP,
                alpha_sq,
            },
            trunc: TruncationPolicy::default(),
        }
    }

    /// Lossless, mode-matched detection of a pure Fock signal: the herald
    /// is perfect, so the mixture collapses to the heralded number itself.
    pub fn ideal(alpha_sq: f64) -> Self {
        Self {
            source: SourceParams {
                lambda_mag: 0.5,
                eta_h: 1.0,
            },
            detector: DetectorParams {
                eta_c: 1.0,
                eta_d: 1.0,
                mode_overlap: 1.0,
                alpha_sq,
            },
            trunc: TruncationPolicy::default(),
        }
    }

    pub fn with_alpha_sq(mut self, alpha_sq: f64) -> Self {
        self.detector.alpha_sq = alpha_sq;
        self
    }

    pub fn with_mode_overlap(mut self, mode_overlap: f64) -> Self {
        self.detector.mode_overlap = mode_overlap;
        self
    }
}

fn check_efficiency(name: &'static str, eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: eta,
            reason: "efficiency must lie in (0, 1]",
        })
    }
}

fn check_alpha_sq(alpha_sq: f64) -> Result<()> {
    if alpha_sq >= 0.0 && alpha_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "alpha_sq",
            value: alpha_sq,
            reason: "must be finite and non-negative",
        })
    }
}

/// Weights of the true pair number `f >= j` behind a herald outcome `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldMixture {
    /// `(f, weight)`, renormalized over the retained terms.
    pub weights: Vec<(u32, f64)>,
    /// Normalized weight dropped by truncation.
    pub tail: f64,
    /// Closed-form normalizer `(1 - q)^(j+1) / (eta_h^j lambda^(2j))`;
    /// infinite when `lambda = 0` and `j > 0`.
    pub normalizer: f64,
}

impl HeraldMixture {
    pub fn mean(&self) -> f64 {
        self.weights.iter().map(|(f, w)| *f as f64 * w).sum()
    }

    pub fn max_pairs(&self) -> u32 {
        self.weights.last().map(|(f, _)| *f).unwrap_or(0)
    }
}

/// Negative-binomial weights `C(f, j) eta_h^j (1-eta_h)^(f-j) |lambda|^(2f)`.
///
/// Normalized through the closed form `sum_f C(f,j) q^f = q^j / (1-q)^(j+1)`
/// with `q = lambda^2 (1 - eta_h)`, so each weight is
/// `C(f, j) q^(f-j) (1-q)^(j+1)`.
pub fn herald_mixture(j: u32, source: &SourceParams, trunc: &TruncationPolicy) -> HeraldMixture {
    let q = source.mixture_ratio();
    let lam_sq = source.lambda_mag * source.lambda_mag;
    let normalizer = if j == 0 {
        1.0 - q
    } else {
        (1.0 - q).powi(j as i32 + 1) / (source.eta_h.powi(j as i32) * lam_sq.powi(j as i32))
    };
    if q == 0.0 {
        return HeraldMixture {
            weights: vec![(j, 1.0)],
            tail: 0.0,
            normalizer,
        };
    }

    let ln_q = q.ln();
    let ln_norm = (j as f64 + 1.0) * (1.0 - q).ln();
    let mode = (j as f64 * q / (1.0 - q)).ceil() as u32 + j;
    let mut weights = Vec::new();
    let mut cum = 0.0;
    let mut f = j;
    loop {
        let w = (ln_binomial(f, j) + (f - j) as f64 * ln_q + ln_norm).exp();
        cum += w;
        weights.push((f, w));
        let tail = (1.0 - cum).max(0.0);
        if (f >= mode && tail < trunc.tail_epsilon) || f >= trunc.hard_cap.max(j) {
            break;
        }
        f += 1;
    }
    let tail = (1.0 - cum).max(0.0);
    debug_assert!(
        {
            // closed form against the truncated numeric sum of the raw weights
            let raw: f64 = weights
                .iter()
                .map(|&(f, _)| {
                    (ln_binomial(f, j)
                        + j as f64 * source.eta_h.ln()
                        + (f - j) as f64 * (1.0 - source.eta_h).ln()
                        + f as f64 * lam_sq.ln())
                    .exp()
                })
                .sum();
            j > 0 && lam_sq == 0.0 || (raw * normalizer - cum).abs() <= 1e-9 * cum
        },
        "herald normalizer disagrees with the truncated sum"
    );
    for (_, w) in weights.iter_mut() {
        *w /= cum;
    }
    HeraldMixture {
        weights,
        tail,
        normalizer,
    }
}

/// Ideal joint statistics as a dense grid plus the truncated Poisson tail.
pub(crate) fn ideal_grid(j: u32, alpha_sq: f64, trunc: &TruncationPolicy) -> Result<(Grid, f64)> {
    check_alpha_sq(alpha_sq)?;
    // total photon number is j + Poisson(alpha_sq)
    let mut t_max = j;
    if alpha_sq > 0.0 {
        while t_max < trunc.hard_cap.max(j)
            && poisson_upper_tail(alpha_sq, t_max - j) >= trunc.tail_epsilon
        {
            t_max += 1;
        }
    }
    let deficit = poisson_upper_tail(alpha_sq, t_max - j);

    let size = t_max as usize + 1;
    let mut grid = Grid::zeros(size, size);
    let ln_alpha_sq = alpha_sq.ln();
    let base = -alpha_sq + log_factorial(j);
    for t in j..=t_max {
        if alpha_sq == 0.0 && t > j {
            break;
        }
        let ln_power = if t == j {
            0.0
        } else {
            (t - j) as f64 * ln_alpha_sq
        };
        let ln_level = base + ln_power - t as f64 * std::f64::consts::LN_2;
        for m in 0..=t {
            let n = t - m;
            let Some(ln_k) = interference_kernel_ln_abs(j, m, n) else {
                continue;
            };
            let ln_p = ln_level - log_factorial(m) - log_factorial(n) + 2.0 * ln_k;
            *grid.at_mut(m as usize, n as usize) = ln_p.exp();
        }
    }
    Ok((grid, deficit))
}

/// `P(m, n)` for a Fock state `|j>` and a coherent state of mean photon
/// number `alpha_sq` on a balanced splitter with ideal detectors.
///
/// `P(m, n) = e^{-|a|^2} j! |a|^{2(m+n-j)} / (2^{m+n} m! n!) K(j,m,n)^2`,
/// zero whenever `m + n < j`.
pub fn joint_ideal(j: u32, alpha_sq: f64, trunc: &TruncationPolicy) -> Result<JointPhotonDist> {
    let (grid, deficit) = ideal_grid(j, alpha_sq, trunc)?;
    grid.into_joint(deficit)
}

/// Binomial loss of efficiency `eta_c` on the first detector and `eta_d` on
/// the second. Mass is preserved exactly.
pub fn bernoulli_loss(joint: &JointPhotonDist, eta_c: f64, eta_d: f64) -> Result<JointPhotonDist> {
    check_efficiency("eta_c", eta_c)?;
    check_efficiency("eta_d", eta_d)?;
    Grid::from_joint(joint)
        .thinned(eta_c, eta_d)
        .into_joint(joint.deficit())
}

/// Lossy joint statistics of the vacuum-signal, orthogonal-mode factor.
fn orthogonal_factor(det: &DetectorParams, trunc: &TruncationPolicy) -> Result<(Grid, f64)> {
    let (grid, deficit) = ideal_grid(0, (1.0 - det.mode_overlap) * det.alpha_sq, trunc)?;
    Ok((grid.thinned(det.eta_c, det.eta_d), deficit))
}

fn mismatch_grid(
    j: u32,
    det: &DetectorParams,
    trunc: &TruncationPolicy,
    orthogonal: &(Grid, f64),
) -> Result<(Grid, f64)> {
    let (ideal, d1) = ideal_grid(j, det.mode_overlap * det.alpha_sq, trunc)?;
    let matched = ideal.thinned(det.eta_c, det.eta_d);
    let out = matched.convolve(&orthogonal.0);
    Ok((out, 1.0 - (1.0 - d1) * (1.0 - orthogonal.1)))
}

/// Lossy statistics with imperfect mode overlap: the matched-mode joint for
/// signal `j` at `M |a|^2` convolved with the orthogonal-mode joint for a
/// vacuum signal at `(1 - M) |a|^2`.
pub fn joint_with_mismatch(
    j: u32,
    detector: &DetectorParams,
    trunc: &TruncationPolicy,
) -> Result<JointPhotonDist> {
    detector.validate()?;
    let orthogonal = orthogonal_factor(detector, trunc)?;
    let (grid, deficit) = mismatch_grid(j, detector, trunc, &orthogonal)?;
    grid.into_joint(deficit)
}

pub(crate) fn heralded_grid(j: u32, params: &ExperimentParams) -> Result<(Grid, f64)> {
    params.validate()?;
    let mixture = herald_mixture(j, &params.source, &params.trunc);
    let orthogonal = orthogonal_factor(&params.detector, &params.trunc)?;
    let parts: Vec<(Grid, f64)> = mixture
        .weights
        .par_iter()
        .map(|&(f, _)| mismatch_grid(f, &params.detector, &params.trunc, &orthogonal))
        .collect::<Result<_>>()?;

    let mut acc = Grid::zeros(1, 1);
    let mut deficit = mixture.tail;
    for ((_, w), (grid, d)) in mixture.weights.iter().zip(&parts) {
        acc.add_scaled(grid, *w);
        deficit += w * d;
    }
    Ok((acc, deficit))
}

/// Joint statistics conditioned on herald outcome `j`: a mixture over the
/// true pair number weighted by [`herald_mixture`].
pub fn heralded_joint(j: u32, params: &ExperimentParams) -> Result<JointPhotonDist> {
    let (grid, deficit) = heralded_grid(j, params)?;
    grid.into_joint(deficit)
}

/// `P(f-photon signal -> outcome (m, n))` under mismatch and loss, for
/// every `f` in `f_lo..=f_hi`.
pub(crate) fn outcome_probabilities(
    m: u32,
    n: u32,
    detector: &DetectorParams,
    trunc: &TruncationPolicy,
    f_lo: u32,
    f_hi: u32,
) -> Result<Vec<f64>> {
    let (m, n) = (m as usize, n as usize);
    let (orth_ideal, _) = ideal_grid(0, (1.0 - detector.mode_overlap) * detector.alpha_sq, trunc)?;
    let orth = orth_ideal.thinned_corner(detector.eta_c, detector.eta_d, m, n);
    (f_lo..=f_hi)
        .into_par_iter()
        .map(|f| {
            let (ideal, _) = ideal_grid(f, detector.mode_overlap * detector.alpha_sq, trunc)?;
            let matched = ideal.thinned_corner(detector.eta_c, detector.eta_d, m, n);
            let mut p = 0.0;
            for a in 0..=m {
                for b in 0..=n {
                    p += matched.at(a, b) * orth.at(m - a, n - b);
                }
            }
            Ok(p)
        })
        .collect()
}

/// `P(dn) = sum_m P(m, m - dn)`.
pub fn diff_dist(joint: &JointPhotonDist) -> DiffDist {
    let raw = joint
        .iter()
        .map(|((m, n), p)| (m as i64 - n as i64, p));
    DiffDist::with_deficit(raw, joint.deficit())
        .expect("a normalized joint distribution has positive mass")
}

/// Difference statistics of the full model for herald outcome `j`.
pub fn heralded_diff(j: u32, params: &ExperimentParams) -> Result<DiffDist> {
    Ok(diff_dist(&heralded_joint(j, params)?))
}
