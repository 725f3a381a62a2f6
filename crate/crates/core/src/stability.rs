//! Decimation: re-estimating on nested random subsets to find where the
//! estimate stabilizes.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::estimator::{estimate_id, EstimatorOptions};
use crate::rng::{decimation_stream, substream};

/// Smallest subset a scale may draw.
pub const MIN_SUBSET_SIZE: usize = 10;

/// Relative spread below which a scale, or a step between scales, counts as
/// stable.
pub const PLATEAU_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub n_scales: usize,
    pub repeats_per_scale: usize,
    pub seed: u64,
    pub estimator: EstimatorOptions,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            n_scales: 4,
            repeats_per_scale: 5,
            seed: 0,
            estimator: EstimatorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub mean: f64,
    /// Sample standard deviation over repeats; 0 for a single repeat.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub subset_sizes: Vec<usize>,
    pub estimates_per_size: Vec<ScaleEstimate>,
    pub selected_d: f64,
    pub plateau_found: bool,
    pub seed: u64,
    pub repeats_per_scale: usize,
    pub estimator: EstimatorOptions,
}

/// Subset sizes `N, N/2, N/4, ...`, rejecting any scale below the minimum.
pub fn subset_sizes(n: usize, n_scales: usize) -> Result<Vec<usize>> {
    if n_scales == 0 {
        return Err(Error::InvalidArgument("n_scales must be >= 1".into()));
    }
    (0..n_scales)
        .map(|k| {
            let size = n.checked_shr(k as u32).unwrap_or(0);
            if size < MIN_SUBSET_SIZE {
                Err(Error::TooFewPoints {
                    needed: MIN_SUBSET_SIZE,
                    got: size,
                })
            } else {
                Ok(size)
            }
        })
        .collect()
}

/// Indices of the subset drawn for `(seed, scale, repeat)`, ascending.
pub fn subset_indices(n: usize, size: usize, seed: u64, scale: usize, repeat: usize) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    let mut rng = substream(seed, decimation_stream(scale, repeat));
    let mut idx = index::sample(&mut rng, n, size).into_vec();
    idx.sort_unstable();
    idx
}

pub fn decimation_stability(cloud: &PointCloud, options: &StabilityOptions) -> Result<StabilityReport> {
    if options.repeats_per_scale == 0 {
        return Err(Error::InvalidArgument("repeats_per_scale must be >= 1".into()));
    }
    let n = cloud.n_points();
    let sizes = subset_sizes(n, options.n_scales)?;

    let mut per_scale = Vec::with_capacity(sizes.len());
    for (scale, &size) in sizes.iter().enumerate() {
        let mut values = Vec::with_capacity(options.repeats_per_scale);
        for repeat in 0..options.repeats_per_scale {
            let idx = subset_indices(n, size, options.seed, scale, repeat);
            let sub = if idx.len() == n { cloud.clone() } else { cloud.select(&idx) };
            values.push(estimate_id(&sub, &options.estimator)?.d_hat);
        }
        per_scale.push(mean_std(&values));
    }

    let (plateau_found, selected_d) = match plateau_start(&per_scale) {
        Some(start) => (true, per_scale[start].mean),
        None => (false, per_scale[0].mean),
    };

    Ok(StabilityReport {
        subset_sizes: sizes,
        estimates_per_size: per_scale,
        selected_d,
        plateau_found,
        seed: options.seed,
        repeats_per_scale: options.repeats_per_scale,
        estimator: options.estimator,
    })
}

fn mean_std(values: &[f64]) -> ScaleEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    ScaleEstimate { mean, std }
}

/// Start of the longest run of stable scales that reaches the smallest
/// scale, if it spans at least two scales.
///
/// A scale is stable when its relative standard deviation is below
/// [`PLATEAU_TOLERANCE`]; consecutive scales in the run must also have means
/// within that relative tolerance of each other.
pub fn plateau_start(scales: &[ScaleEstimate]) -> Option<usize> {
    let stable = |s: &ScaleEstimate| s.mean > 0.0 && s.std / s.mean < PLATEAU_TOLERANCE;
    let last = scales.len().checked_sub(1)?;
    if !stable(&scales[last]) {
        return None;
    }
    let mut start = last;
    while start > 0 {
        let (prev, cur) = (&scales[start - 1], &scales[start]);
        let step = (cur.mean - prev.mean).abs() / prev.mean;
        if stable(prev) && step < PLATEAU_TOLERANCE {
            start -= 1;
        } else {
            break;
        }
    }
    (last - start >= 1).then_some(start)
}
