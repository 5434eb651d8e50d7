//! Sender/receiver indicator correlations of partially grouped fits.

use alloc::vec::Vec;

use super::{PgState, pairs};
use crate::numerics::sqrt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCorrelation {
    pub i: usize,
    pub j: usize,
    /// `None` when either indicator is degenerate.
    pub corr: Option<f64>,
}

/// Correlation of `1{Z_{i→j} = ℓ₀}` and `1{Z_{i←j} = ℓ₀}` under a joint
/// `K × K` table.
pub fn indicator_correlation(joint: &[f64], k: usize, group: usize) -> Option<f64> {
    let p: f64 = joint[group * k..(group + 1) * k].iter().sum();
    let q: f64 = (0..k).map(|l| joint[l * k + group]).sum();
    let m = joint[group * k + group];
    let var = p * (1.0 - p) * q * (1.0 - q);
    if !(var > 0.0) {
        return None;
    }
    Some((m - p * q) / sqrt(var))
}

pub fn pair_correlations(state: &PgState, n: usize, group: usize) -> Vec<PairCorrelation> {
    pairs(n)
        .enumerate()
        .map(|(p, (i, j))| PairCorrelation {
            i,
            j,
            corr: indicator_correlation(state.pair(p), state.k, group),
        })
        .collect()
}

/// One-dimensional two-means clustering, centers ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeans {
    pub centers: [f64; 2],
    pub sizes: [usize; 2],
    /// Cluster index per input value.
    pub labels: Vec<usize>,
}

impl TwoMeans {
    pub fn proportions(&self) -> [f64; 2] {
        let total = (self.sizes[0] + self.sizes[1]) as f64;
        [self.sizes[0] as f64 / total, self.sizes[1] as f64 / total]
    }
}

/// Lloyd iterations started from the minimum and maximum. Returns `None` for
/// empty input or input without spread.
pub fn two_means(values: &[f64]) -> Option<TwoMeans> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !(hi > lo) {
        return None;
    }
    let mut centers = [lo, hi];
    let mut labels: Vec<usize> = alloc::vec![usize::MAX; values.len()];
    loop {
        let mut changed = false;
        for (label, &v) in labels.iter_mut().zip(values) {
            let c = usize::from((v - centers[1]).abs() < (v - centers[0]).abs());
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = [0.0; 2];
        let mut sizes = [0usize; 2];
        for (&label, &v) in labels.iter().zip(values) {
            sums[label] += v;
            sizes[label] += 1;
        }
        for c in 0..2 {
            if sizes[c] > 0 {
                centers[c] = sums[c] / sizes[c] as f64;
            }
        }
    }
    let mut sizes = [0usize; 2];
    for &label in &labels {
        sizes[label] += 1;
    }
    Some(TwoMeans { centers, sizes, labels })
}
