use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::nonclassicality::EventTally;
use crate::{Error, Result};

pub const MIN_RECORDS: usize = 100;
const MAX_BINS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Herald,
    C,
    D,
}

/// One matched-filter output of one detector for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnergyRecord {
    pub trial: u64,
    pub channel: Channel,
    pub value: f64,
}

/// Reads records from CSV with header `trial,channel,value`.
pub fn read_pulse_csv<R: Read>(input: R) -> Result<Vec<PulseEnergyRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["trial", "channel", "value"] {
        return Err(Error::Format("expected header trial,channel,value".into()));
    }
    let records: Vec<PulseEnergyRecord> = reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(e.to_string())))
        .collect::<Result<_>>()?;
    if let Some(r) = records.iter().find(|r| !r.value.is_finite()) {
        return Err(Error::Format(format!("non-finite value in trial {}", r.trial)));
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub channel: Channel,
    /// Ascending; photon label `i` covers values below `boundaries[i]`.
    pub boundaries: Vec<f64>,
    /// Smoothed-histogram peak positions, one per label.
    pub peaks: Vec<f64>,
    pub bin_width: f64,
    /// `(trial, label)` in input order.
    pub labels: Vec<(u64, u32)>,
    /// Trials above the last boundary, whose label is a lower bound.
    pub overflow: Vec<u64>,
    pub warnings: Vec<String>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Indices of local maxima whose prominence stands out of the counting
/// noise, in increasing position.
fn find_peaks(h: &[f64]) -> Vec<usize> {
    let n = h.len();
    let h_max = h.iter().cloned().fold(0.0, f64::max);
    let mut candidates = Vec::new();
    let mut i = 0;
    while i < n {
        // treat a run of equal values as one candidate at its centre
        let mut end = i;
        while end + 1 < n && h[end + 1] == h[i] {
            end += 1;
        }
        let left_lower = i == 0 || h[i - 1] < h[i];
        let right_lower = end + 1 == n || h[end + 1] < h[i];
        if left_lower && right_lower && h[i] > 0.0 {
            candidates.push((i + end) / 2);
        }
        i = end + 1;
    }
    let prominence = |p: usize| {
        let mut left = h[p];
        let mut k = p;
        while k > 0 && h[k - 1] <= h[p] {
            k -= 1;
            left = left.min(h[k]);
        }
        if k == 0 && h[0] <= h[p] {
            left = left.min(0.0);
        }
        let mut right = h[p];
        let mut k = p;
        while k + 1 < n && h[k + 1] <= h[p] {
            k += 1;
            right = right.min(h[k]);
        }
        if k + 1 == n {
            right = right.min(0.0);
        }
        h[p] - left.max(right)
    };
    candidates
        .into_iter()
        .filter(|&p| prominence(p) >= (3.0 * h[p].sqrt()).max(0.01 * h_max))
        .collect()
}

/// Histograms one channel (Freedman-Diaconis bin width, 3-bin moving
/// average), finds the photon-number peaks and labels every record.
pub fn bin_pulse_energies(records: &[PulseEnergyRecord], channel: Channel) -> Result<Binning> {
    let mut values: Vec<f64> = records.iter().filter(|r| r.channel == channel).map(|r| r.value).collect();
    if values.is_empty() {
        return Err(Error::InsufficientData(format!("no records for channel {channel:?}")));
    }
    if values.len() < MIN_RECORDS {
        return Err(Error::InsufficientData(format!(
            "{} records for channel {channel:?}, need at least {MIN_RECORDS}",
            values.len()
        )));
    }
    values.sort_by(f64::total_cmp);
    let (lo, hi) = (values[0], values[values.len() - 1]);
    let mut warnings = Vec::new();

    let (boundaries, peaks, width) = if hi == lo {
        (Vec::new(), vec![lo], 0.0)
    } else {
        let iqr = quantile(&values, 0.75) - quantile(&values, 0.25);
        let mut width = 2.0 * iqr / (values.len() as f64).cbrt();
        if !(width > 0.0) {
            width = (hi - lo) / ((values.len() as f64).log2().ceil() + 1.0);
        }
        let n_bins = (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS);
        let width = (hi - lo) / n_bins as f64;
        let mut hist = vec![0.0; n_bins];
        for v in &values {
            let b = (((v - lo) / width) as usize).min(n_bins - 1);
            hist[b] += 1.0;
        }
        let smooth: Vec<f64> = (0..n_bins)
            .map(|i| {
                let a = i.saturating_sub(1);
                let b = (i + 1).min(n_bins - 1);
                hist[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
            })
            .collect();
        let peak_bins = find_peaks(&smooth);
        let centre = |b: usize| lo + (b as f64 + 0.5) * width;
        let boundaries = peak_bins
            .windows(2)
            .map(|w| {
                let valley = (w[0]..=w[1]).min_by(|a, b| smooth[*a].total_cmp(&smooth[*b])).unwrap();
                centre(valley)
            })
            .collect();
        (boundaries, peak_bins.into_iter().map(centre).collect::<Vec<_>>(), width)
    };
    if peaks.len() < 2 {
        warnings.push(format!(
            "channel {channel:?}: only {} photon-number peak(s) found; check binning if light was present",
            peaks.len()
        ));
    }

    let last = boundaries.len() as u32;
    let mut labels = Vec::new();
    let mut overflow = Vec::new();
    for r in records.iter().filter(|r| r.channel == channel) {
        let label = boundaries.partition_point(|b| *b <= r.value) as u32;
        if label == last && !boundaries.is_empty() {
            overflow.push(r.trial);
        }
        labels.push((r.trial, label));
    }
    Ok(Binning { channel, boundaries, peaks, bin_width: width, labels, overflow, warnings })
}

fn index_labels(labels: &[(u64, u32)], which: &str) -> Result<BTreeMap<u64, u32>> {
    let mut map = BTreeMap::new();
    for (trial, label) in labels {
        if map.insert(*trial, *label).is_some() {
            return Err(Error::Alignment(format!("duplicate trial {trial} on channel {which}")));
        }
    }
    Ok(map)
}

/// Counts `(j, k, l)` triples from per-trial labels of the three channels.
pub fn build_tally(
    herald: &[(u64, u32)],
    c: &[(u64, u32)],
    d: &[(u64, u32)],
    max_outcome: u32,
) -> Result<EventTally> {
    let h = index_labels(herald, "herald")?;
    let c = index_labels(c, "c")?;
    let d = index_labels(d, "d")?;
    let mut tally = EventTally::new(max_outcome);
    for (trial, j) in &h {
        let (Some(k), Some(l)) = (c.get(trial), d.get(trial)) else {
            return Err(Error::Alignment(format!("trial {trial} is missing on a signal channel")));
        };
        tally.add(*j, *k, *l, 1.0)?;
    }
    if c.len() != h.len() || d.len() != h.len() {
        return Err(Error::Alignment("signal channels contain trials without a herald record".into()));
    }
    Ok(tally)
}
