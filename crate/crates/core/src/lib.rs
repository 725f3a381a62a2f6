//! Intrinsic-dimension estimation with the TwoNN method, per-layer
//! profiling of hidden states, and rank planning for low-rank adapters.
//!
//! ```
//! use idrank_core::{estimate_id, generate, EstimatorOptions, ManifoldSpec};
//!
//! let cloud = generate(&ManifoldSpec::helix(2000, 1)).unwrap();
//! let est = estimate_id(&cloud, &EstimatorOptions::mle()).unwrap();
//! assert!((0.9..1.2).contains(&est.d_hat));
//! ```

pub mod cloud;
pub mod error;
pub mod estimator;
pub mod ghs;
pub mod neighbors;
pub mod planner;
pub mod profile;
pub mod rng;
pub mod stability;
pub mod synth;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use estimator::{
    estimate_id, fit, fit_mle, fit_regression, regression_curve, CurvePoint, EstimatorOptions,
    IdEstimate, Method,
};
pub use ghs::{read_ghs, write_ghs, HiddenStateSet, Layer, Metadata, Pooling};
pub use neighbors::{two_nearest, two_nearest_with, NeighborStats, SearchStrategy};
pub use planner::{
    compute_ranks, emit_plan, make_plan, plan_from_profile, read_plan, ModelShape, RankPlan,
    RankRule, Rounding,
};
pub use profile::{compute_profile, profile_diff, LayerProfile, ProfileDiff, ProfileOptions};
pub use stability::{decimation_stability, StabilityOptions, StabilityReport};
pub use synth::{generate, ManifoldKind, ManifoldSpec};
