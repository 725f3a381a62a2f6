//! TwoNN intrinsic-dimension fits.
//!
//! For points sampled with locally constant density on a `d`-dimensional
//! manifold, the ratio `mu = r2 / r1` of second- to first-neighbor distance
//! is Pareto distributed with scale 1 and shape `d`:
//!
//! ```text
//! p(mu | d) = d * mu^(-d - 1)        F(mu | d) = 1 - mu^(-d)
//! ```
//!
//! `d` is recovered either by maximum likelihood (`d = n / sum(ln mu)`) or by
//! regressing `-ln(1 - F_emp)` on `ln mu` through the origin.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::neighbors::{two_nearest, NeighborStats};

/// Smallest number of ratios entering any fit.
pub const MIN_FIT_POINTS: usize = 3;

/// Default share of the largest ratios dropped by the regression fit.
pub const DEFAULT_DISCARD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mle,
    #[default]
    Regression,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mle => "mle",
            Method::Regression => "regression",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Method::Mle),
            "regression" => Ok(Method::Regression),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// One intrinsic-dimension estimate with fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdEstimate {
    pub d_hat: f64,
    pub method: Method,
    pub n_used: usize,
    pub discard_fraction: f64,
    /// RMS residual in log-log space; regression only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual: Option<f64>,
    /// Exact duplicates collapsed before the neighbor search.
    #[serde(default)]
    pub duplicates_removed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub method: Method,
    pub discard_fraction: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            method: Method::default(),
            discard_fraction: DEFAULT_DISCARD_FRACTION,
        }
    }
}

impl EstimatorOptions {
    pub fn mle() -> Self {
        Self {
            method: Method::Mle,
            ..Self::default()
        }
    }

    pub fn regression(discard_fraction: f64) -> Self {
        Self {
            method: Method::Regression,
            discard_fraction,
        }
    }
}

/// A point `(ln mu, -ln(1 - F_emp))` of the log-log regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub log_mu: f64,
    pub neg_log_survival: f64,
}

fn validate_ratios(mu: &[f64]) -> Result<()> {
    if mu.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FIT_POINTS,
            got: mu.len(),
        });
    }
    match mu.iter().position(|m| !(m.is_finite() && *m >= 1.0)) {
        Some(index) => Err(Error::InvalidRatio {
            index,
            value: mu[index],
        }),
        None => Ok(()),
    }
}

/// Closed-form maximizer of the Pareto log-likelihood with unit scale.
pub fn fit_mle(mu: &[f64]) -> Result<IdEstimate> {
    validate_ratios(mu)?;
    let sum_log: f64 = mu.iter().map(|m| m.ln()).sum();
    if sum_log <= 0.0 {
        return Err(Error::DegenerateInput(
            "all ratios equal 1; the Pareto shape is unbounded".into(),
        ));
    }
    Ok(IdEstimate {
        d_hat: mu.len() as f64 / sum_log,
        method: Method::Mle,
        n_used: mu.len(),
        discard_fraction: 0.0,
        residual: None,
        duplicates_removed: 0,
    })
}

/// Number of the largest ratios excluded for a given fraction. At least one
/// is always dropped, since `F_emp = 1` has an infinite log survival.
pub fn discard_count(n: usize, discard_fraction: f64) -> usize {
    // Guard against products such as 0.1 * 30 = 3.0000000000000004.
    let raw = (discard_fraction * n as f64 - 1e-9).ceil();
    (raw.max(0.0) as usize).max(1).min(n)
}

/// The points entering the regression, in ascending order of `mu`.
pub fn regression_curve(mu: &[f64], discard_fraction: f64) -> Result<Vec<CurvePoint>> {
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(Error::InvalidArgument(format!(
            "discard_fraction must lie in [0, 1), got {discard_fraction}"
        )));
    }
    validate_ratios(mu)?;
    let n = mu.len();
    let keep = n - discard_count(n, discard_fraction);
    if keep < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FIT_POINTS,
            got: keep,
        });
    }
    let mut sorted = mu.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[..keep]
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let survival = (n - (i + 1)) as f64 / n as f64;
            CurvePoint {
                log_mu: m.ln(),
                neg_log_survival: -survival.ln(),
            }
        })
        .collect())
}

/// Least-squares slope through the origin and its RMS residual.
pub fn slope_through_origin(points: &[CurvePoint]) -> Result<(f64, f64)> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        sxy += p.log_mu * p.neg_log_survival;
        sxx += p.log_mu * p.log_mu;
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateInput(
            "every retained ratio equals 1; the slope is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    let sq: f64 = points
        .iter()
        .map(|p| {
            let r = p.neg_log_survival - slope * p.log_mu;
            r * r
        })
        .sum();
    Ok((slope, (sq / points.len() as f64).sqrt()))
}

/// Slope of `-ln(1 - F_emp)` against `ln mu` after dropping the largest ratios.
pub fn fit_regression(mu: &[f64], discard_fraction: f64) -> Result<IdEstimate> {
    let curve = regression_curve(mu, discard_fraction)?;
    let (slope, residual) = slope_through_origin(&curve)?;
    Ok(IdEstimate {
        d_hat: slope,
        method: Method::Regression,
        n_used: curve.len(),
        discard_fraction,
        residual: Some(residual),
        duplicates_removed: 0,
    })
}

pub fn fit(mu: &[f64], options: &EstimatorOptions) -> Result<IdEstimate> {
    match options.method {
        Method::Mle => fit_mle(mu),
        Method::Regression => fit_regression(mu, options.discard_fraction),
    }
}

pub fn estimate_from_neighbors(stats: &NeighborStats, options: &EstimatorOptions) -> Result<IdEstimate> {
    let mut est = fit(&stats.mu, options)?;
    est.duplicates_removed = stats.duplicates_removed();
    Ok(est)
}

/// Neighbor search followed by the chosen fit.
pub fn estimate_id(cloud: &PointCloud, options: &EstimatorOptions) -> Result<IdEstimate> {
    let stats = two_nearest(cloud)?;
    estimate_from_neighbors(&stats, options)
}
