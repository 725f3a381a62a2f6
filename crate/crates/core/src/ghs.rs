//! GHS1: a little-endian container for per-layer hidden-state point clouds.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GHS1"
//! 4       1     version = 1
//! 5       1     flags = 0
//! 6       2     reserved = 0
//! 8       4     num_layers (u32)
//! 12      4     n_points (u32)
//! then per layer:
//!         4     ambient_dim (u32)
//!         4*n*D float32 values, row-major
//! then:
//!         4     metadata_length (u32)
//!         ...   UTF-8 JSON {"model", "dataset", "pooling", "tags"}
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GHS1";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 16;

/// How token vectors were reduced to one point per example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Pooling {
    #[default]
    Mean,
    FirstToken,
    LastToken,
    /// `k` tokens sampled per example.
    TokenSample(u32),
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pooling::Mean => f.write_str("mean"),
            Pooling::FirstToken => f.write_str("first-token"),
            Pooling::LastToken => f.write_str("last-token"),
            Pooling::TokenSample(k) => write!(f, "token-sample-{k}"),
        }
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "first-token" => Ok(Pooling::FirstToken),
            "last-token" => Ok(Pooling::LastToken),
            _ => s
                .strip_prefix("token-sample-")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|&k| k > 0)
                .map(Pooling::TokenSample)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "unknown pooling {s:?}; expected mean, first-token, last-token or token-sample-<k>"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub dataset: String,
    #[serde(default)]
    pub pooling: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// One hidden state: `n_points` vectors of width `ambient_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub ambient_dim: usize,
    pub values: Vec<f32>,
}

impl Layer {
    pub fn to_cloud(&self) -> PointCloud {
        let data = self.values.iter().map(|&v| f64::from(v)).collect();
        PointCloud::new(self.ambient_dim, data).expect("layer values validated on construction")
    }
}

/// Hidden states of layers `0..=L`, one point per example in every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateSet {
    n_points: usize,
    layers: Vec<Layer>,
    pub metadata: Metadata,
}

impl HiddenStateSet {
    pub fn new(n_points: usize, layers: Vec<Layer>, metadata: Metadata) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a hidden-state set needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.ambient_dim == 0 {
                return Err(Error::DimensionMismatch(format!("layer {i} has ambient_dim 0")));
            }
            if layer.values.len() != n_points * layer.ambient_dim {
                return Err(Error::DimensionMismatch(format!(
                    "layer {i} holds {} values, expected {n_points} x {}",
                    layer.values.len(),
                    layer.ambient_dim
                )));
            }
            if let Some(pos) = layer.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Layer {
                    layer: i,
                    source: Box::new(Error::NonFiniteInput {
                        point: pos / layer.ambient_dim,
                        dim: pos % layer.ambient_dim,
                    }),
                });
            }
        }
        Ok(Self {
            n_points,
            layers,
            metadata,
        })
    }

    /// Builds a set from clouds, narrowing coordinates to `f32`.
    pub fn from_clouds(clouds: &[PointCloud], metadata: Metadata) -> Result<Self> {
        let n = clouds.first().map_or(0, PointCloud::n_points);
        if let Some((i, c)) = clouds.iter().enumerate().find(|(_, c)| c.n_points() != n) {
            return Err(Error::DimensionMismatch(format!(
                "layer {i} has {} points, layer 0 has {n}",
                c.n_points()
            )));
        }
        let layers = clouds
            .iter()
            .map(|c| Layer {
                ambient_dim: c.ambient_dim(),
                values: c.data().iter().map(|&v| v as f32).collect(),
            })
            .collect();
        Self::new(n, layers, metadata)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_cloud(&self, i: usize) -> PointCloud {
        self.layers[i].to_cloud()
    }

    pub fn pooling(&self) -> Result<Option<Pooling>> {
        if self.metadata.pooling.is_empty() {
            Ok(None)
        } else {
            self.metadata.pooling.parse().map(Some)
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let to_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
        };
        let meta = serde_json::to_vec(&self.metadata)?;
        let payload: usize = self.layers.iter().map(|l| 4 + 4 * l.values.len()).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + payload + 4 + meta.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[VERSION, 0, 0, 0]);
        out.extend_from_slice(&to_u32(self.layers.len(), "num_layers")?.to_le_bytes());
        out.extend_from_slice(&to_u32(self.n_points, "n_points")?.to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&to_u32(layer.ambient_dim, "ambient_dim")?.to_le_bytes());
            for v in &layer.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&to_u32(meta.len(), "metadata_length")?.to_le_bytes());
        out.extend_from_slice(&meta);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        let magic = r.take(4, "header")?;
        if magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected \"GHS1\"",
                String::from_utf8_lossy(magic)
            )));
        }
        let fixed = r.take(4, "header")?;
        if fixed[0] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", fixed[0])));
        }
        if fixed[1..] != [0, 0, 0] {
            return Err(Error::Format("flags and reserved bytes must be zero".into()));
        }
        let num_layers = r.u32("header")? as usize;
        let n_points = r.u32("header")? as usize;
        if num_layers == 0 {
            return Err(Error::Format("num_layers is 0".into()));
        }

        let mut layers = Vec::with_capacity(num_layers.min(4096));
        for i in 0..num_layers {
            let what = format!("layer {i}");
            let ambient_dim = r.u32(&what)? as usize;
            if ambient_dim == 0 {
                return Err(Error::DimensionMismatch(format!("{what} declares ambient_dim 0")));
            }
            let count = n_points
                .checked_mul(ambient_dim)
                .and_then(|c| c.checked_mul(4))
                .ok_or_else(|| Error::Format(format!("{what}: payload size overflows")))?;
            let raw = r.take(count, &what)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            layers.push(Layer { ambient_dim, values });
        }

        let meta_len = r.u32("metadata")? as usize;
        let meta = r.take(meta_len, "metadata")?;
        let metadata = if meta.is_empty() {
            Metadata::default()
        } else {
            serde_json::from_slice(meta)
                .map_err(|e| Error::Format(format!("metadata is not valid JSON: {e}")))?
        };
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after metadata",
                bytes.len() - r.pos
            )));
        }
        Self::new(n_points, layers, metadata)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "truncated in {what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn read_ghs(path: impl AsRef<Path>) -> Result<HiddenStateSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    HiddenStateSet::from_bytes(&bytes)
}

pub fn write_ghs(set: &HiddenStateSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = set.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
