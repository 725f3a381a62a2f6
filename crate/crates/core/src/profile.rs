//! Intrinsic-dimension profiles across a model's hidden states.

use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_id, EstimatorOptions, IdEstimate};
use crate::ghs::{HiddenStateSet, Metadata};
use crate::rng::substream;
use crate::stability::{decimation_stability, StabilityOptions, StabilityReport};

pub const DEFAULT_SAMPLE_CAP: usize = 20_000;

const SAMPLE_CAP_STREAM: u64 = u64::MAX - 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub estimator: EstimatorOptions,
    /// Layers with more points are subsampled to this many, with one shared
    /// index set so rows still correspond across layers.
    pub sample_cap: Option<usize>,
    pub seed: u64,
    /// Decimation settings; when present each `d_i` is the plateau estimate.
    pub stability: Option<StabilityOptions>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            estimator: EstimatorOptions::default(),
            sample_cap: Some(DEFAULT_SAMPLE_CAP),
            seed: 0,
            stability: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub d: Vec<f64>,
    #[serde(default)]
    pub estimates: Vec<IdEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<Vec<StabilityReport>>,
    pub mean_id: f64,
    #[serde(default)]
    pub metadata: Metadata,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

impl LayerProfile {
    /// A bare profile from known per-layer dimensions.
    pub fn from_values(d: Vec<f64>, metadata: Metadata) -> Result<Self> {
        let profile = Self {
            mean_id: mean(&d),
            d,
            estimates: Vec::new(),
            stability: None,
            metadata,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn num_layers(&self) -> usize {
        self.d.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.is_empty() {
            return Err(Error::InvalidArgument("profile has no layers".into()));
        }
        if let Some((i, v)) = self
            .d
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "layer {i} has intrinsic dimension {v}; must be finite and > 0"
            )));
        }
        let m = mean(&self.d);
        if (self.mean_id - m).abs() > 1e-12 * m.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "mean_id {} disagrees with the mean of d ({m})",
                self.mean_id
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let profile: Self = serde_json::from_str(&text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Estimates every hidden state; errors carry the failing layer index.
pub fn compute_profile(states: &HiddenStateSet, options: &ProfileOptions) -> Result<LayerProfile> {
    let n = states.n_points();
    let subset = match options.sample_cap {
        Some(cap) if n > cap => {
            let mut rng = substream(options.seed, SAMPLE_CAP_STREAM);
            let mut idx = index::sample(&mut rng, n, cap).into_vec();
            idx.sort_unstable();
            Some(idx)
        }
        _ => None,
    };

    let mut d = Vec::with_capacity(states.num_layers());
    let mut estimates = Vec::with_capacity(states.num_layers());
    let mut reports = options.stability.map(|_| Vec::with_capacity(states.num_layers()));
    for layer in 0..states.num_layers() {
        let tag = |e: Error| Error::Layer {
            layer,
            source: Box::new(e),
        };
        let mut cloud = states.layer_cloud(layer);
        if let Some(idx) = &subset {
            cloud = cloud.select(idx);
        }
        let est = estimate_id(&cloud, &options.estimator).map_err(tag)?;
        match (&options.stability, reports.as_mut()) {
            (Some(stab), Some(reports)) => {
                let stab = StabilityOptions {
                    estimator: options.estimator,
                    ..*stab
                };
                let report = decimation_stability(&cloud, &stab).map_err(tag)?;
                d.push(report.selected_d);
                reports.push(report);
            }
            _ => d.push(est.d_hat),
        }
        estimates.push(est);
    }

    Ok(LayerProfile {
        mean_id: mean(&d),
        d,
        estimates,
        stability: reports,
        metadata: states.metadata.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDiff {
    /// `d_after - d_before` per layer.
    pub delta: Vec<f64>,
    pub mean_before: f64,
    pub mean_after: f64,
    pub mean_delta: f64,
    /// Layers whose dimension decreased.
    pub layers_compressed: Vec<usize>,
}

pub fn profile_diff(before: &LayerProfile, after: &LayerProfile) -> Result<ProfileDiff> {
    if before.d.len() != after.d.len() {
        return Err(Error::LengthMismatch {
            expected: before.d.len(),
            got: after.d.len(),
        });
    }
    let delta: Vec<f64> = after.d.iter().zip(&before.d).map(|(a, b)| a - b).collect();
    let layers_compressed = delta
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .map(|(i, _)| i)
        .collect();
    let (mean_before, mean_after) = (mean(&before.d), mean(&after.d));
    Ok(ProfileDiff {
        delta,
        mean_before,
        mean_after,
        mean_delta: mean_after - mean_before,
        layers_compressed,
    })
}
