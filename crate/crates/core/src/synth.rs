//! Synthetic clouds of known intrinsic dimension.
//!
//! Every generator is a pure function of its [`ManifoldSpec`]. Point `i`
//! draws from its own ChaCha8 stream, the embedding and offset from two
//! reserved streams, so output is reproducible across runs and platforms.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::rng::substream;

const EMBEDDING_STREAM: u64 = u64::MAX;
const OFFSET_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    /// `[r cos t, r sin t, c t]` with `t` uniform on a range.
    Helix,
    /// Uniform on a unit `d`-ball lying in a random affine `d`-plane.
    Hyperplane,
    /// Uniform on `[0, 1]^d`, rotated and shifted into the ambient space.
    Hypercube,
    /// The fixed five-point planar toy set.
    Toy5,
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManifoldKind::Helix => "helix",
            ManifoldKind::Hyperplane => "hyperplane",
            ManifoldKind::Hypercube => "hypercube",
            ManifoldKind::Toy5 => "toy5",
        })
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "helix" => Ok(ManifoldKind::Helix),
            "hyperplane" => Ok(ManifoldKind::Hyperplane),
            "hypercube" => Ok(ManifoldKind::Hypercube),
            "toy5" => Ok(ManifoldKind::Toy5),
            other => Err(Error::InvalidSpec(format!("unknown manifold kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelixParams {
    pub radius: f64,
    /// Vertical scale `c`.
    pub pitch: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for HelixParams {
    fn default() -> Self {
        Self {
            radius: 1.0,
            pitch: 0.2,
            t_min: 0.0,
            t_max: 12.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub helix: HelixParams,
}

impl ManifoldSpec {
    pub fn helix(n_points: usize, seed: u64) -> Self {
        Self {
            kind: ManifoldKind::Helix,
            intrinsic_dim: 1,
            ambient_dim: 3,
            n_points,
            noise_sigma: 0.0,
            seed,
            helix: HelixParams::default(),
        }
    }

    pub fn hyperplane(intrinsic_dim: usize, ambient_dim: usize, n_points: usize, seed: u64) -> Self {
        Self {
            kind: ManifoldKind::Hyperplane,
            intrinsic_dim,
            ambient_dim,
            n_points,
            noise_sigma: 0.0,
            seed,
            helix: HelixParams::default(),
        }
    }

    pub fn hypercube(intrinsic_dim: usize, ambient_dim: usize, n_points: usize, seed: u64) -> Self {
        Self {
            kind: ManifoldKind::Hypercube,
            ..Self::hyperplane(intrinsic_dim, ambient_dim, n_points, seed)
        }
    }

    pub fn toy5() -> Self {
        Self {
            kind: ManifoldKind::Toy5,
            intrinsic_dim: 1,
            ambient_dim: 2,
            n_points: 5,
            noise_sigma: 0.0,
            seed: 0,
            helix: HelixParams::default(),
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.kind == ManifoldKind::Toy5 {
            return Ok(());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if self.intrinsic_dim == 0 || self.ambient_dim == 0 {
            return bad("dimensions must be >= 1".into());
        }
        if self.intrinsic_dim > self.ambient_dim {
            return bad(format!(
                "intrinsic_dim {} exceeds ambient_dim {}",
                self.intrinsic_dim, self.ambient_dim
            ));
        }
        if self.kind == ManifoldKind::Helix {
            let h = &self.helix;
            if self.ambient_dim != 3 || self.intrinsic_dim != 1 {
                return bad("helix requires intrinsic_dim 1 and ambient_dim 3".into());
            }
            if !(h.radius > 0.0 && h.pitch > 0.0) {
                return bad("helix radius and pitch must be > 0".into());
            }
            if !(h.t_min.is_finite() && h.t_max.is_finite() && h.t_max > h.t_min) {
                return bad("helix parameter range must satisfy t_min < t_max".into());
            }
        }
        Ok(())
    }
}

pub const TOY5: [[f64; 2]; 5] = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [2.0, 2.0]];

pub fn generate(spec: &ManifoldSpec) -> Result<PointCloud> {
    spec.validate()?;
    match spec.kind {
        ManifoldKind::Toy5 => PointCloud::from_rows(&TOY5),
        ManifoldKind::Helix => Ok(helix(spec)),
        ManifoldKind::Hyperplane | ManifoldKind::Hypercube => Ok(flat(spec)),
    }
}

fn add_noise<R: Rng>(rng: &mut R, sigma: f64, point: &mut [f64]) {
    if sigma > 0.0 {
        for v in point {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
}

fn helix(spec: &ManifoldSpec) -> PointCloud {
    let h = spec.helix;
    let mut data = Vec::with_capacity(spec.n_points * 3);
    for i in 0..spec.n_points {
        let mut rng = substream(spec.seed, i as u64);
        let t = h.t_min + (h.t_max - h.t_min) * rng.random::<f64>();
        let mut p = [h.radius * t.cos(), h.radius * t.sin(), h.pitch * t];
        add_noise(&mut rng, spec.noise_sigma, &mut p);
        data.extend_from_slice(&p);
    }
    PointCloud::new(3, data).expect("helix coordinates are finite")
}

fn flat(spec: &ManifoldSpec) -> PointCloud {
    let (d, dim) = (spec.intrinsic_dim, spec.ambient_dim);
    let basis = random_orthonormal(dim, d, &mut substream(spec.seed, EMBEDDING_STREAM));
    let mut offset_rng = substream(spec.seed, OFFSET_STREAM);
    let offset: Vec<f64> = (0..dim).map(|_| offset_rng.sample(StandardNormal)).collect();

    let mut data = Vec::with_capacity(spec.n_points * dim);
    let mut latent = vec![0.0; d];
    let mut p = vec![0.0; dim];
    for i in 0..spec.n_points {
        let mut rng = substream(spec.seed, i as u64);
        match spec.kind {
            ManifoldKind::Hypercube => latent.iter_mut().for_each(|v| *v = rng.random()),
            _ => unit_ball(&mut rng, &mut latent),
        }
        p.copy_from_slice(&offset);
        for (u, col) in latent.iter().zip(&basis) {
            for (x, b) in p.iter_mut().zip(col) {
                *x += u * b;
            }
        }
        add_noise(&mut rng, spec.noise_sigma, &mut p);
        data.extend_from_slice(&p);
    }
    PointCloud::new(dim, data).expect("embedded coordinates are finite")
}

/// Uniform sample from the unit ball: Gaussian direction, radius `u^(1/d)`.
fn unit_ball<R: Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let radius = rng.random::<f64>().powf(1.0 / out.len() as f64);
            out.iter_mut().for_each(|v| *v *= radius / norm);
            return;
        }
    }
}

/// `cols` orthonormal vectors in R^`rows`, from a Gram-Schmidt QR of a
/// Gaussian matrix.
pub fn random_orthonormal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<Vec<f64>> {
    assert!(cols <= rows, "cannot fit {cols} orthonormal vectors in R^{rows}");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        // Two passes keep the columns orthogonal to machine precision.
        for _ in 0..2 {
            for q in &basis {
                let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= proj * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    basis
}
