//! Geometry-aware LoRA rank plans.
//!
//! Block `i` maps hidden state `i` to hidden state `i + 1`. Its adapters get
//! rank `round(max(d_{i+1} - d_i, 0)) + offset`, shared by the K, Q, V and O
//! projections, and scaling `alpha_i = c * r_i` so `alpha_i / r_i` is the
//! same for every block.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::profile::LayerProfile;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OFFSET: u32 = 1;
pub const DEFAULT_ALPHA_RATIO: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Never allocates below the dimension increase.
    #[default]
    Ceil,
    /// Round half to even.
    Nearest,
}

impl Rounding {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Rounding::Ceil => x.ceil(),
            Rounding::Nearest => x.round_ties_even(),
        }
    }
}

impl fmt::Display for Rounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rounding::Ceil => "ceil",
            Rounding::Nearest => "nearest",
        })
    }
}

impl FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ceil" => Ok(Rounding::Ceil),
            "nearest" => Ok(Rounding::Nearest),
            other => Err(Error::InvalidArgument(format!("unknown rounding {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRule {
    pub offset: u32,
    pub rounding: Rounding,
}

impl Default for RankRule {
    fn default() -> Self {
        Self {
            offset: DEFAULT_OFFSET,
            rounding: Rounding::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixRole {
    K,
    Q,
    V,
    O,
}

impl MatrixRole {
    pub const ALL: [MatrixRole; 4] = [MatrixRole::K, MatrixRole::Q, MatrixRole::V, MatrixRole::O];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptedMatrix {
    pub role: MatrixRole,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl AdaptedMatrix {
    /// Entries of the `in_dim x r` and `r x out_dim` adapter factors.
    pub fn adapter_params(&self, rank: u32) -> u64 {
        u64::from(rank) * (self.in_dim + self.out_dim) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub num_blocks: usize,
    pub d_model: usize,
    pub matrices: Vec<AdaptedMatrix>,
}

impl ModelShape {
    /// All four projections `d_model x d_model`.
    pub fn square(num_blocks: usize, d_model: usize) -> Self {
        Self {
            num_blocks,
            d_model,
            matrices: MatrixRole::ALL
                .iter()
                .map(|&role| AdaptedMatrix {
                    role,
                    in_dim: d_model,
                    out_dim: d_model,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 || self.d_model == 0 {
            return Err(Error::InvalidArgument("num_blocks and d_model must be >= 1".into()));
        }
        if self.matrices.iter().any(|m| m.in_dim == 0 || m.out_dim == 0) {
            return Err(Error::InvalidArgument("matrix dimensions must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-block ranks from consecutive intrinsic dimensions `d_0..d_L`.
pub fn compute_ranks(d: &[f64], rule: &RankRule) -> Result<Vec<u32>> {
    if d.len() < 2 {
        return Err(Error::LengthMismatch {
            expected: 2,
            got: d.len(),
        });
    }
    if let Some(v) = d.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite intrinsic dimension {v}")));
    }
    d.windows(2)
        .enumerate()
        .map(|(block, w)| {
            let growth = rule.rounding.apply((w[1] - w[0]).max(0.0));
            let rank = growth as u32 + rule.offset;
            if rank == 0 {
                Err(Error::ZeroRank { block })
            } else {
                Ok(rank)
            }
        })
        .collect()
}

/// [`compute_ranks`] after checking the profile covers `num_blocks + 1` states.
pub fn compute_ranks_for(profile: &LayerProfile, num_blocks: usize, rule: &RankRule) -> Result<Vec<u32>> {
    if profile.d.len() != num_blocks + 1 {
        return Err(Error::LengthMismatch {
            expected: num_blocks + 1,
            got: profile.d.len(),
        });
    }
    compute_ranks(&profile.d, rule)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPlan {
    pub schema_version: u32,
    pub ranks: Vec<u32>,
    pub alpha: Vec<f64>,
    pub alpha_ratio: f64,
    pub offset: u32,
    pub rounding_mode: Rounding,
    pub num_blocks: usize,
    pub d_model: usize,
    pub matrices: Vec<AdaptedMatrix>,
    pub total_trainable_params: u64,
    pub mean_rank: f64,
    pub rounded_mean_rank: u64,
    #[serde(default)]
    pub source_profile_digest: Option<String>,
}

pub fn total_params(ranks: &[u32], matrices: &[AdaptedMatrix]) -> u64 {
    ranks
        .iter()
        .map(|&r| matrices.iter().map(|m| m.adapter_params(r)).sum::<u64>())
        .sum()
}

pub fn make_plan(ranks: &[u32], alpha_ratio: f64, shape: &ModelShape, rule: &RankRule) -> Result<RankPlan> {
    shape.validate()?;
    if !(alpha_ratio.is_finite() && alpha_ratio > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_ratio must be finite and > 0, got {alpha_ratio}"
        )));
    }
    if ranks.len() != shape.num_blocks {
        return Err(Error::ShapeMismatch {
            ranks: ranks.len(),
            blocks: shape.num_blocks,
        });
    }
    if let Some(block) = ranks.iter().position(|&r| r == 0) {
        return Err(Error::ZeroRank { block });
    }
    let sum: u64 = ranks.iter().map(|&r| u64::from(r)).sum();
    let mean_rank = sum as f64 / ranks.len() as f64;
    Ok(RankPlan {
        schema_version: SCHEMA_VERSION,
        ranks: ranks.to_vec(),
        alpha: ranks.iter().map(|&r| alpha_ratio * f64::from(r)).collect(),
        alpha_ratio,
        offset: rule.offset,
        rounding_mode: rule.rounding,
        num_blocks: shape.num_blocks,
        d_model: shape.d_model,
        matrices: shape.matrices.clone(),
        total_trainable_params: total_params(ranks, &shape.matrices),
        mean_rank,
        rounded_mean_rank: mean_rank.round_ties_even() as u64,
        source_profile_digest: None,
    })
}

/// SHA-256 over the little-endian bytes of `d`, hex encoded.
pub fn profile_digest(profile: &LayerProfile) -> String {
    let mut hasher = Sha256::new();
    for v in &profile.d {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Ranks, scaling factors and budget for a profile in one step.
pub fn plan_from_profile(
    profile: &LayerProfile,
    shape: &ModelShape,
    rule: &RankRule,
    alpha_ratio: f64,
) -> Result<RankPlan> {
    let ranks = compute_ranks_for(profile, shape.num_blocks, rule)?;
    let mut plan = make_plan(&ranks, alpha_ratio, shape, rule)?;
    plan.source_profile_digest = Some(profile_digest(profile));
    Ok(plan)
}

impl RankPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        if plan.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported plan schema_version {}",
                plan.schema_version
            )));
        }
        if plan.ranks.len() != plan.num_blocks || plan.alpha.len() != plan.num_blocks {
            return Err(Error::ShapeMismatch {
                ranks: plan.ranks.len(),
                blocks: plan.num_blocks,
            });
        }
        Ok(plan)
    }
}

pub fn emit_plan(plan: &RankPlan, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = plan.to_json()?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_plan(path: impl AsRef<Path>) -> Result<RankPlan> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RankPlan::from_json(&text)
}
