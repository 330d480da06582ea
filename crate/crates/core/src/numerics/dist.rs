use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Entries at or below this probability are not stored.
pub const STORE_FLOOR: f64 = 1e-300;

/// Bounds every infinite sum: extend the summation index until the neglected
/// mass drops below `tail_epsilon`, never beyond `hard_cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationPolicy {
    pub tail_epsilon: f64,
    pub hard_cap: u32,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_epsilon: 1e-12,
            hard_cap: 256,
        }
    }
}

impl TruncationPolicy {
    pub fn new(tail_epsilon: f64, hard_cap: u32) -> Result<Self> {
        let policy = Self {
            tail_epsilon,
            hard_cap,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_epsilon > 0.0 && self.tail_epsilon < 1e-3) {
            return Err(Error::InvalidParameter {
                name: "tail_epsilon",
                value: self.tail_epsilon,
                reason: "must lie in (0, 1e-3)",
            });
        }
        if self.hard_cap < 1 {
            return Err(Error::InvalidParameter {
                name: "hard_cap",
                value: self.hard_cap as f64,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// A normalized probability mass function over an ordered outcome space.
///
/// `deficit` is the mass that was missing before renormalization (truncated
/// tails, discretization loss); it is diagnostic only.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<K: Ord> {
    probs: BTreeMap<K, f64>,
    deficit: f64,
}

/// Photon-number distribution `P(n)`.
pub type PhotonDist = Distribution<u32>;
/// Joint detector statistics `P(m, n)`.
pub type JointPhotonDist = Distribution<(u32, u32)>;
/// Photon-number difference statistics `P(dn)`.
pub type DiffDist = Distribution<i64>;

impl<K: Ord + Copy> Distribution<K> {
    /// Normalizes absolute probabilities. The deficit is `1 - sum`.
    pub fn normalize<I>(weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
    {
        let (probs, total) = Self::accumulate(weights)?;
        Ok(Self::finish(probs, total, 1.0 - total))
    }

    /// Normalizes relative weights such as event counts. The deficit is 0.
    pub fn from_relative<I>(weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
    {
        let (probs, total) = Self::accumulate(weights)?;
        Ok(Self::finish(probs, total, 0.0))
    }

    /// Normalizes with an externally known pre-normalization deficit.
    pub fn with_deficit<I>(weights: I, deficit: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
    {
        let (probs, total) = Self::accumulate(weights)?;
        Ok(Self::finish(probs, total, deficit))
    }

    pub fn point(outcome: K) -> Self {
        Self {
            probs: BTreeMap::from([(outcome, 1.0)]),
            deficit: 0.0,
        }
    }

    fn accumulate<I>(weights: I) -> Result<(BTreeMap<K, f64>, f64)>
    where
        I: IntoIterator<Item = (K, f64)>,
    {
        let mut probs = BTreeMap::new();
        for (k, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Domain(format!("invalid probability weight {w}")));
            }
            *probs.entry(k).or_insert(0.0) += w;
        }
        let total: f64 = probs.values().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("distribution has no mass".into()));
        }
        Ok((probs, total))
    }

    fn finish(mut probs: BTreeMap<K, f64>, total: f64, deficit: f64) -> Self {
        probs.retain(|_, p| {
            *p /= total;
            *p > STORE_FLOOR
        });
        Self { probs, deficit }
    }

    pub fn get(&self, outcome: K) -> f64 {
        self.probs.get(&outcome).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (K, f64)> + '_ {
        self.probs.iter().map(|(k, p)| (*k, *p))
    }

    pub fn support(&self) -> impl Iterator<Item = K> + '_ {
        self.probs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    /// Smallest and largest stored outcome.
    pub fn bounds(&self) -> Option<(K, K)> {
        let lo = *self.probs.keys().next()?;
        let hi = *self.probs.keys().next_back()?;
        Some((lo, hi))
    }
}

macro_rules! scalar_moments {
    ($key:ty) => {
        impl Distribution<$key> {
            pub fn mean(&self) -> f64 {
                self.iter().map(|(k, p)| k as f64 * p).sum()
            }

            pub fn variance(&self) -> f64 {
                let mean = self.mean();
                self.iter().map(|(k, p)| (k as f64 - mean).powi(2) * p).sum()
            }

            pub fn moment(&self, order: i32) -> f64 {
                self.iter().map(|(k, p)| (k as f64).powi(order) * p).sum()
            }
        }
    };
}

scalar_moments!(u32);
scalar_moments!(i64);

impl PhotonDist {
    /// Poissonian photon statistics, truncated by `trunc`.
    pub fn poisson(mean: f64, trunc: &TruncationPolicy) -> Result<Self> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mean",
                value: mean,
                reason: "must be finite and non-negative",
            });
        }
        let mut kmax = 0;
        while kmax < trunc.hard_cap
            && crate::numerics::poisson_upper_tail(mean, kmax) >= trunc.tail_epsilon
        {
            kmax += 1;
        }
        Self::normalize((0..=kmax).map(|k| (k, crate::numerics::poisson_ln_pmf(mean, k).exp())))
    }
}

/// Dense row-major grid indexed by `(m, n)`; the working representation for
/// joint statistics.
#[derive(Debug, Clone)]
pub(crate) struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, m: usize, n: usize) -> f64 {
        if m < self.rows && n < self.cols {
            self.data[m * self.cols + n]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn at_mut(&mut self, m: usize, n: usize) -> &mut f64 {
        &mut self.data[m * self.cols + n]
    }

    #[cfg(test)]
    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn from_joint(joint: &JointPhotonDist) -> Self {
        let (rows, cols) = joint
            .support()
            .fold((1, 1), |(r, c), (m, n)| (r.max(m as usize + 1), c.max(n as usize + 1)));
        let mut grid = Self::zeros(rows, cols);
        for ((m, n), p) in joint.iter() {
            *grid.at_mut(m as usize, n as usize) = p;
        }
        grid
    }

    pub fn into_joint(self, deficit: f64) -> Result<JointPhotonDist> {
        let cols = self.cols;
        JointPhotonDist::with_deficit(
            self.data
                .into_iter()
                .enumerate()
                .filter(|(_, p)| *p > STORE_FLOOR)
                .map(|(i, p)| (((i / cols) as u32, (i % cols) as u32), p)),
            deficit,
        )
    }

    /// Independent binomial thinning of each axis.
    ///
    /// Every source cell `(x, y)` is pushed forward to `(m, n)` with weight
    /// `Bin(m; x, eta_c) Bin(n; y, eta_d)`; the two axes factorize so the
    /// scatter runs one axis at a time.
    pub fn thinned(&self, eta_c: f64, eta_d: f64) -> Grid {
        let rows_c: Vec<Vec<f64>> = (0..self.rows)
            .map(|x| crate::numerics::binomial_pmf_row(x as u32, eta_c))
            .collect();
        let rows_d: Vec<Vec<f64>> = (0..self.cols)
            .map(|y| crate::numerics::binomial_pmf_row(y as u32, eta_d))
            .collect();

        let mut half = Grid::zeros(self.rows, self.cols);
        for x in 0..self.rows {
            let src = &self.data[x * self.cols..(x + 1) * self.cols];
            if src.iter().all(|p| *p == 0.0) {
                continue;
            }
            for (m, &w) in rows_c[x].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let dst = &mut half.data[m * self.cols..(m + 1) * self.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }

        let mut out = Grid::zeros(self.rows, self.cols);
        for m in 0..self.rows {
            for y in 0..self.cols {
                let p = half.data[m * self.cols + y];
                if p == 0.0 {
                    continue;
                }
                for (n, &w) in rows_d[y].iter().enumerate() {
                    out.data[m * self.cols + n] += w * p;
                }
            }
        }
        out
    }

    /// The lower-left `(m_max + 1) x (n_max + 1)` block of [`Grid::thinned`].
    pub fn thinned_corner(&self, eta_c: f64, eta_d: f64, m_max: usize, n_max: usize) -> Grid {
        let rows = m_max + 1;
        let cols = n_max + 1;
        let mut half = Grid::zeros(rows, self.cols);
        for x in 0..self.rows {
            let src = &self.data[x * self.cols..(x + 1) * self.cols];
            if src.iter().all(|p| *p == 0.0) {
                continue;
            }
            let row = crate::numerics::binomial_pmf_row(x as u32, eta_c);
            for (m, &w) in row.iter().enumerate().take(rows) {
                let dst = &mut half.data[m * self.cols..(m + 1) * self.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        let mut out = Grid::zeros(rows, cols);
        for y in 0..self.cols {
            let row = crate::numerics::binomial_pmf_row(y as u32, eta_d);
            for m in 0..rows {
                let p = half.data[m * self.cols + y];
                if p == 0.0 {
                    continue;
                }
                for (n, &w) in row.iter().enumerate().take(cols) {
                    out.data[m * cols + n] += w * p;
                }
            }
        }
        out
    }

    /// Two-dimensional convolution: outcome indices add componentwise.
    pub fn convolve(&self, other: &Grid) -> Grid {
        let (big, small) = if self.nonzero() >= other.nonzero() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = Grid::zeros(self.rows + other.rows - 1, self.cols + other.cols - 1);
        for a in 0..small.rows {
            for b in 0..small.cols {
                let w = small.at(a, b);
                if w == 0.0 {
                    continue;
                }
                for m in 0..big.rows {
                    let src = &big.data[m * big.cols..(m + 1) * big.cols];
                    let start = (m + a) * out.cols + b;
                    let dst = &mut out.data[start..start + big.cols];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        out
    }

    fn nonzero(&self) -> usize {
        self.data.iter().filter(|p| **p != 0.0).count()
    }

    /// `self += weight * other`, growing as needed.
    pub fn add_scaled(&mut self, other: &Grid, weight: f64) {
        if other.rows > self.rows || other.cols > self.cols {
            let mut grown = Grid::zeros(self.rows.max(other.rows), self.cols.max(other.cols));
            for m in 0..self.rows {
                for n in 0..self.cols {
                    *grown.at_mut(m, n) = self.at(m, n);
                }
            }
            *self = grown;
        }
        for m in 0..other.rows {
            for n in 0..other.cols {
                let v = other.at(m, n);
                if v != 0.0 {
                    *self.at_mut(m, n) += weight * v;
                }
            }
        }
    }
}
