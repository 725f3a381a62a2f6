//! Browser bindings for the demo page in `www/`.
//!
//! Each operation has a plain Rust version returning a JSON string, used by
//! native tests, and a `#[wasm_bindgen]` wrapper that turns errors into
//! JavaScript exceptions.

use idrank_core::estimator::{estimate_from_neighbors, fit_mle, regression_curve, slope_through_origin};
use idrank_core::{
    generate, plan_from_profile, two_nearest, CurvePoint, EstimatorOptions, IdEstimate,
    LayerProfile, ManifoldSpec, Metadata, ModelShape, RankPlan, RankRule, Rounding,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Points are truncated to this many for plotting.
const MAX_PLOTTED: usize = 3000;

#[derive(Debug, Serialize)]
pub struct HelixResult {
    pub points: Vec<[f64; 3]>,
    pub mle: IdEstimate,
    pub regression: IdEstimate,
}

#[derive(Debug, Serialize)]
pub struct CurveResult {
    pub curve: Vec<CurvePoint>,
    pub slope: f64,
    pub residual: f64,
    pub mle: f64,
    pub n_points: usize,
}

#[derive(Debug, Serialize)]
pub struct PlanResult {
    pub d: Vec<f64>,
    pub plan: RankPlan,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// A helix cloud with both estimates of its dimension.
pub fn helix(n: usize, seed: u64, noise: f64) -> Result<HelixResult, String> {
    let cloud = generate(&ManifoldSpec::helix(n, seed).with_noise(noise)).map_err(|e| e.to_string())?;
    let stats = two_nearest(&cloud).map_err(|e| e.to_string())?;
    let fit = |o: EstimatorOptions| estimate_from_neighbors(&stats, &o).map_err(|e| e.to_string());
    Ok(HelixResult {
        points: cloud.rows().take(MAX_PLOTTED).map(|p| [p[0], p[1], p[2]]).collect(),
        mle: fit(EstimatorOptions::mle())?,
        regression: fit(EstimatorOptions::default())?,
    })
}

/// The log-log regression curve for a random `d`-plane in `ambient` dimensions.
pub fn plane_curve(
    d: usize,
    ambient: usize,
    n: usize,
    seed: u64,
    discard_fraction: f64,
) -> Result<CurveResult, String> {
    let cloud = generate(&ManifoldSpec::hyperplane(d, ambient, n, seed)).map_err(|e| e.to_string())?;
    let stats = two_nearest(&cloud).map_err(|e| e.to_string())?;
    let curve = regression_curve(&stats.mu, discard_fraction).map_err(|e| e.to_string())?;
    let (slope, residual) = slope_through_origin(&curve).map_err(|e| e.to_string())?;
    let mle = fit_mle(&stats.mu).map_err(|e| e.to_string())?.d_hat;
    Ok(CurveResult {
        curve,
        slope,
        residual,
        mle,
        n_points: cloud.n_points(),
    })
}

/// A rank plan from per-layer dimensions written as comma- or
/// whitespace-separated numbers.
pub fn plan(
    profile: &str,
    offset: u32,
    alpha_ratio: f64,
    nearest: bool,
    d_model: usize,
) -> Result<PlanResult, String> {
    let d = profile
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("{s:?} is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    if d.len() < 2 {
        return Err("enter at least two layer dimensions".into());
    }
    let profile = LayerProfile::from_values(d.clone(), Metadata::default()).map_err(|e| e.to_string())?;
    let rule = RankRule {
        offset,
        rounding: if nearest { Rounding::Nearest } else { Rounding::Ceil },
    };
    let shape = ModelShape::square(d.len() - 1, d_model);
    let plan = plan_from_profile(&profile, &shape, &rule, alpha_ratio).map_err(|e| e.to_string())?;
    Ok(PlanResult { d, plan })
}

#[wasm_bindgen(js_name = helixDemo)]
pub fn helix_demo(n: usize, seed: u32, noise: f64) -> Result<String, JsError> {
    helix(n, seed.into(), noise).and_then(|r| to_json(&r)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = planeCurve)]
pub fn plane_curve_demo(
    d: usize,
    ambient: usize,
    n: usize,
    seed: u32,
    discard_fraction: f64,
) -> Result<String, JsError> {
    plane_curve(d, ambient, n, seed.into(), discard_fraction)
        .and_then(|r| to_json(&r))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rankPlan)]
pub fn rank_plan_demo(
    profile: &str,
    offset: u32,
    alpha_ratio: f64,
    nearest: bool,
    d_model: usize,
) -> Result<String, JsError> {
    plan(profile, offset, alpha_ratio, nearest, d_model)
        .and_then(|r| to_json(&r))
        .map_err(|e| JsError::new(&e))
}
