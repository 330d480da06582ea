//! Parameter estimation from count summaries: Klyshko efficiencies, the
//! pair-source squeezing parameter and the coherent-state strength.
//!
//! Any detector outcome of one photon or more counts as a detection in the
//! count summaries consumed here.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    pub herald_singles: u64,
    pub signal_singles_c: u64,
    pub signal_singles_d: u64,
    pub coincidences_hc: u64,
    pub coincidences_hd: u64,
    pub trials: u64,
}

impl CoincidenceCounts {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("inconsistent counts: {what}")));
        if self.coincidences_hc > self.signal_singles_c.min(self.herald_singles) {
            return bad("herald/c coincidences exceed singles");
        }
        if self.coincidences_hd > self.signal_singles_d.min(self.herald_singles) {
            return bad("herald/d coincidences exceed singles");
        }
        if self.herald_singles.max(self.signal_singles_c).max(self.signal_singles_d) > self.trials {
            return bad("singles exceed trials");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlyshkoEfficiencies {
    pub eta_h: Estimate,
    pub eta_c: Estimate,
    pub eta_d: Estimate,
    /// Mean signal-arm efficiency `(eta_c + eta_d) / 2`.
    pub eta_s: Estimate,
    /// Arm ratio `eta_c / eta_d`.
    pub ratio: Estimate,
    /// Set when any efficiency estimate exceeds 1.
    pub out_of_range: bool,
}

/// Relative variance of a Poisson count.
fn rel_var(count: f64) -> f64 {
    if count > 0.0 {
        1.0 / count
    } else {
        0.0
    }
}

/// Splits an arm-averaged efficiency into the two arms given their ratio.
pub fn split_efficiency(eta_s: f64, ratio: f64) -> (f64, f64) {
    let eta_d = 2.0 * eta_s / (1.0 + ratio);
    (ratio * eta_d, eta_d)
}

/// Klyshko estimates `eta_h = C / S_sig`, `eta_s = C / S_h`,
/// `R = S_c / S_d`, with `C = C_hc + C_hd` and `S_sig = S_c + S_d`.
///
/// Uncertainties follow from treating every count as Poisson and
/// independent. Estimates above 1 are returned unchanged with
/// `out_of_range` set.
pub fn klyshko_efficiencies(counts: &CoincidenceCounts) -> Result<KlyshkoEfficiencies> {
    counts.validate()?;
    let s_h = counts.herald_singles as f64;
    let s_c = counts.signal_singles_c as f64;
    let s_d = counts.signal_singles_d as f64;
    let coinc = (counts.coincidences_hc + counts.coincidences_hd) as f64;
    if s_h == 0.0 {
        return Err(Error::InsufficientData("no herald singles".into()));
    }
    if s_c + s_d == 0.0 {
        return Err(Error::InsufficientData("no signal singles".into()));
    }
    if s_d == 0.0 {
        return Err(Error::InsufficientData("no singles in arm d".into()));
    }

    let eta_h = coinc / (s_c + s_d);
    let eta_s = coinc / s_h;
    let ratio = s_c / s_d;
    let (eta_c, eta_d) = split_efficiency(eta_s, ratio);

    let rv_coinc = rel_var(coinc);
    let rv_eta_h = rv_coinc + rel_var(s_c + s_d);
    let rv_eta_s = rv_coinc + rel_var(s_h);
    let rv_ratio = rel_var(s_c) + rel_var(s_d);
    // d ln(eta_d) / d ln(R) = -R / (1 + R), d ln(eta_c) / d ln(R) = 1 / (1 + R)
    let lever_d = ratio / (1.0 + ratio);
    let lever_c = 1.0 / (1.0 + ratio);
    let est = |value: f64, rel_var: f64| Estimate { value, std_err: value * rel_var.sqrt() };

    let eta_h = est(eta_h, rv_eta_h);
    let eta_c = est(eta_c, rv_eta_s + lever_c * lever_c * rv_ratio);
    let eta_d = est(eta_d, rv_eta_s + lever_d * lever_d * rv_ratio);
    let out_of_range = [eta_h.value, eta_c.value, eta_d.value].iter().any(|v| *v > 1.0);
    if out_of_range {
        log::warn!("Klyshko efficiency estimate exceeds 1");
    }
    Ok(KlyshkoEfficiencies {
        eta_h,
        eta_c,
        eta_d,
        eta_s: est(eta_s, rv_eta_s),
        ratio: est(ratio, rv_ratio),
        out_of_range,
    })
}

/// `|lambda| = tanh(asinh(sqrt(n_h / eta_h)))`.
pub fn lambda_from_mean(mean_herald_photons: f64, eta_h: f64) -> Result<f64> {
    if !(mean_herald_photons >= 0.0) || !mean_herald_photons.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mean_herald_photons",
            value: mean_herald_photons,
            reason: "mean photon number must be finite and non-negative",
        });
    }
    if !(eta_h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eta_h",
            value: eta_h,
            reason: "efficiency must be positive",
        });
    }
    Ok((mean_herald_photons / eta_h).sqrt().asinh().tanh())
}

/// `|alpha| = sqrt(n_c / eta_c + n_d / eta_d)`.
pub fn alpha_from_counts(mean_c: f64, mean_d: f64, eta_c: f64, eta_d: f64) -> Result<f64> {
    for (name, v) in [("eta_c", eta_c), ("eta_d", eta_d)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter { name, value: v, reason: "efficiency must be positive" });
        }
    }
    for (name, v) in [("mean_c", mean_c), ("mean_d", mean_d)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "mean photon number must be finite and non-negative",
            });
        }
    }
    Ok((mean_c / eta_c + mean_d / eta_d).sqrt())
}

/// Everything `calibrate` reports for one count summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub efficiencies: KlyshkoEfficiencies,
    pub lambda_mag: Option<f64>,
    pub alpha_sq: Option<f64>,
    pub detection_rule: String,
}

/// Optional mean photon numbers that accompany a count summary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanPhotonNumbers {
    pub herald: Option<f64>,
    pub coherent_c: Option<f64>,
    pub coherent_d: Option<f64>,
}

pub fn calibrate(counts: &CoincidenceCounts, means: &MeanPhotonNumbers) -> Result<CalibrationReport> {
    let eff = klyshko_efficiencies(counts)?;
    let lambda_mag = means.herald.map(|n| lambda_from_mean(n, eff.eta_h.value)).transpose()?;
    let alpha_sq = match (means.coherent_c, means.coherent_d) {
        (Some(c), Some(d)) => Some(alpha_from_counts(c, d, eff.eta_c.value, eff.eta_d.value)?.powi(2)),
        _ => None,
    };
    Ok(CalibrationReport {
        efficiencies: eff,
        lambda_mag,
        alpha_sq,
        detection_rule: "any outcome of one or more photons counts as a detection".into(),
    })
}
