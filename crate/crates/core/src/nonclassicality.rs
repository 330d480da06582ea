//! Submultinomial and sub-Poissonian tests on heralded three-detector
//! event tallies.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{min_eigenvalue_symmetric, JointPhotonDist, PhotonDist};
use crate::states::g2_of_dist;
use crate::{Error, Result};

pub const DEFAULT_MAX_OUTCOME: u32 = 6;
pub const DEFAULT_RESAMPLES: usize = 10;

/// How the product-of-marginals term enters the correlation matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Covariance form: a multinomial null sits at `mu_min = 0`.
    #[default]
    Subtract,
    /// Both terms added.
    Add,
}

/// Event counts `E(j, k, l)` for herald outcome `j` and arm outcomes `k`, `l`.
///
/// Counts are real-valued so that expectation-valued tallies built from a
/// model can be analyzed exactly. Analyses only look at arm outcomes up to
/// `max_outcome`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTally {
    counts: BTreeMap<(u32, u32, u32), f64>,
    max_outcome: u32,
}

impl Default for EventTally {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_OUTCOME)
    }
}

impl EventTally {
    pub fn new(max_outcome: u32) -> Self {
        Self { counts: BTreeMap::new(), max_outcome }
    }

    pub fn max_outcome(&self) -> u32 {
        self.max_outcome
    }

    pub fn add(&mut self, j: u32, k: u32, l: u32, count: f64) -> Result<()> {
        if !(count >= 0.0) || !count.is_finite() {
            return Err(Error::InvalidParameter {
                name: "count",
                value: count,
                reason: "event counts must be finite and non-negative",
            });
        }
        if count > 0.0 {
            *self.counts.entry((j, k, l)).or_insert(0.0) += count;
        }
        Ok(())
    }

    pub fn get(&self, j: u32, k: u32, l: u32) -> f64 {
        self.counts.get(&(j, k, l)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32, u32), f64)> + '_ {
        self.counts.iter().map(|(key, c)| (*key, *c))
    }

    /// Herald outcomes with at least one event.
    pub fn herald_outcomes(&self) -> Vec<u32> {
        let mut js: Vec<u32> = self.counts.keys().map(|key| key.0).collect();
        js.dedup();
        js
    }

    /// Adds the expected counts `events * P(k, l)` for herald outcome `j`.
    pub fn add_expected(&mut self, j: u32, joint: &JointPhotonDist, events: f64) -> Result<()> {
        for ((k, l), p) in joint.iter() {
            self.add(j, k, l, events * p)?;
        }
        Ok(())
    }

    /// `E(k, l)` for one herald outcome, restricted to the analysis range.
    fn slice(&self, j: u32) -> Result<Vec<Vec<f64>>> {
        let dim = self.max_outcome as usize + 1;
        let mut e = vec![vec![0.0; dim]; dim];
        let mut total = 0.0;
        for (&(_, k, l), &c) in self.counts.range((j, 0, 0)..=(j, u32::MAX, u32::MAX)) {
            if k <= self.max_outcome && l <= self.max_outcome {
                e[k as usize][l as usize] += c;
                total += c;
            }
        }
        if total > 0.0 {
            Ok(e)
        } else {
            Err(Error::InsufficientData(format!("no events for herald outcome {j}")))
        }
    }
}

fn matrix_of(e: &[Vec<f64>], sign: SignConvention) -> Vec<Vec<f64>> {
    let dim = e.len();
    let total: f64 = e.iter().flatten().sum();
    let marginal: Vec<f64> = (0..dim)
        .map(|x| e[x].iter().sum::<f64>() + e.iter().map(|row| row[x]).sum::<f64>())
        .collect();
    let s = match sign {
        SignConvention::Subtract => -1.0,
        SignConvention::Add => 1.0,
    };
    let mut m = vec![vec![0.0; dim]; dim];
    for x in 0..dim {
        for y in x..dim {
            let v = 2.0 * (e[x][y] + e[y][x]) / total + s * (marginal[x] / total) * (marginal[y] / total);
            m[x][y] = v;
            m[y][x] = v;
        }
    }
    m
}

/// `M_xy = (2/E) sum (d_kx d_ly + d_ky d_lx) E(k,l) -/+ c_x c_y / E^2`
/// with `c_x = sum (d_kx + d_lx) E(k,l)`.
pub fn correlation_matrix(tally: &EventTally, j: u32, sign: SignConvention) -> Result<Vec<Vec<f64>>> {
    Ok(matrix_of(&tally.slice(j)?, sign))
}

/// Minimum eigenvalue of the (subtracted) correlation matrix.
pub fn submultinomial_witness(tally: &EventTally, j: u32) -> Result<f64> {
    submultinomial_witness_with(tally, j, SignConvention::Subtract)
}

pub fn submultinomial_witness_with(tally: &EventTally, j: u32, sign: SignConvention) -> Result<f64> {
    min_eigenvalue_symmetric(&correlation_matrix(tally, j, sign)?)
}

fn combined_of(e: &[Vec<f64>]) -> Result<PhotonDist> {
    let mut by_n: BTreeMap<u32, f64> = BTreeMap::new();
    for (k, row) in e.iter().enumerate() {
        for (l, c) in row.iter().enumerate() {
            if *c > 0.0 {
                *by_n.entry((k + l) as u32).or_insert(0.0) += c;
            }
        }
    }
    PhotonDist::from_relative(by_n)
}

/// `P(n) = (1/E) sum_{k+l=n} E(k, l)`.
pub fn combined_stats(tally: &EventTally, j: u32) -> Result<PhotonDist> {
    combined_of(&tally.slice(j)?)
}

/// `g2` of [`combined_stats`].
pub fn sub_poissonian_witness(tally: &EventTally, j: u32) -> Result<f64> {
    g2_of_dist(&combined_stats(tally, j)?)
}

/// Draws a multinomial resample of `E(k, l)` with the same (rounded) total.
fn resample<R: Rng>(e: &[Vec<f64>], rng: &mut R) -> Vec<Vec<f64>> {
    let total: f64 = e.iter().flatten().sum();
    let mut remaining_n = total.round().max(1.0) as u64;
    let mut remaining_p = 1.0;
    let dim = e.len();
    let mut out = vec![vec![0.0; dim]; dim];
    for k in 0..dim {
        for l in 0..dim {
            if remaining_n == 0 {
                return out;
            }
            let p = e[k][l] / total;
            let draw = if p <= 0.0 {
                0
            } else if p >= remaining_p {
                remaining_n
            } else {
                Binomial::new(remaining_n, (p / remaining_p).clamp(0.0, 1.0))
                    .expect("probability within [0, 1]")
                    .sample(rng)
            };
            out[k][l] = draw as f64;
            remaining_n -= draw;
            remaining_p -= p;
        }
    }
    out
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Both witnesses for one herald outcome with bootstrap uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub j: u32,
    pub events: f64,
    pub mu_min: f64,
    pub mu_min_std: f64,
    /// Minimum eigenvalue with both terms added, for comparison.
    pub mu_min_add: f64,
    pub g2: Option<f64>,
    pub g2_std: Option<f64>,
}

/// Runs both tests for herald outcome `j`, with the spread over
/// `resamples` multinomial bootstrap draws as the uncertainty.
pub fn witness_report<R: Rng>(tally: &EventTally, j: u32, resamples: usize, rng: &mut R) -> Result<WitnessReport> {
    let e = tally.slice(j)?;
    let mu_min = min_eigenvalue_symmetric(&matrix_of(&e, SignConvention::Subtract))?;
    let mu_min_add = min_eigenvalue_symmetric(&matrix_of(&e, SignConvention::Add))?;
    let g2 = g2_of_dist(&combined_of(&e)?).ok();

    let mut mus = Vec::with_capacity(resamples);
    let mut g2s = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let r = resample(&e, rng);
        mus.push(min_eigenvalue_symmetric(&matrix_of(&r, SignConvention::Subtract))?);
        if let Some(g) = combined_of(&r).ok().and_then(|d| g2_of_dist(&d).ok()) {
            g2s.push(g);
        }
    }
    Ok(WitnessReport {
        j,
        events: e.iter().flatten().sum(),
        mu_min,
        mu_min_std: std_dev(&mus),
        mu_min_add,
        g2,
        g2_std: g2.map(|_| std_dev(&g2s)),
    })
}

/// [`witness_report`] for every herald outcome in the tally, evaluated in
/// parallel. Each outcome gets its own generator seeded from `seed` and `j`,
/// so results do not depend on scheduling.
pub fn witness_reports(tally: &EventTally, resamples: usize, seed: u64) -> Result<Vec<WitnessReport>> {
    use rand::SeedableRng;
    tally
        .herald_outcomes()
        .into_par_iter()
        .map(|j| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (u64::from(j) << 32));
            witness_report(tally, j, resamples, &mut rng)
        })
        .collect()
}
