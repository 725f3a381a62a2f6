//! Exact first and second nearest-neighbor search.
//!
//! Exact duplicates are collapsed before the search so that every retained
//! point has a strictly positive first-neighbor distance. Both search paths
//! evaluate squared distances with the same left-to-right accumulation, so
//! the kd-tree and the brute-force scan return bitwise-identical distances.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Fewest distinct points for which a second neighbor exists for everyone
/// and the fit has at least three ratios.
pub const MIN_DISTINCT_POINTS: usize = 3;

const LEAF_SIZE: usize = 12;
const BRUTE_FORCE_BELOW: usize = 256;

/// Per-point neighbor distances, aligned with `kept_indices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborStats {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub mu: Vec<f64>,
    /// Indices into the input cloud, ascending.
    pub kept_indices: Vec<usize>,
    pub n_input: usize,
}

impl NeighborStats {
    pub fn duplicates_removed(&self) -> usize {
        self.n_input - self.kept_indices.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// kd-tree above a small size, brute force below.
    #[default]
    Auto,
    KdTree,
    BruteForce,
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Ascending indices of the first occurrence of every distinct point.
pub fn distinct_indices(cloud: &PointCloud) -> Vec<usize> {
    let n = cloud.n_points();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| cmp_rows(cloud.point(i), cloud.point(j)).then(i.cmp(&j)));
    let mut kept = Vec::with_capacity(n);
    let mut prev: Option<usize> = None;
    for &i in &order {
        match prev {
            Some(p) if cmp_rows(cloud.point(p), cloud.point(i)) == Ordering::Equal => {}
            _ => {
                kept.push(i);
                prev = Some(i);
            }
        }
    }
    kept.sort_unstable();
    kept
}

pub fn two_nearest(cloud: &PointCloud) -> Result<NeighborStats> {
    two_nearest_with(cloud, SearchStrategy::Auto)
}

pub fn two_nearest_with(cloud: &PointCloud, strategy: SearchStrategy) -> Result<NeighborStats> {
    let kept_indices = distinct_indices(cloud);
    if kept_indices.len() < MIN_DISTINCT_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_DISTINCT_POINTS,
            got: kept_indices.len(),
        });
    }
    let distinct = if kept_indices.len() == cloud.n_points() {
        cloud.clone()
    } else {
        cloud.select(&kept_indices)
    };

    let use_tree = match strategy {
        SearchStrategy::Auto => distinct.n_points() >= BRUTE_FORCE_BELOW,
        SearchStrategy::KdTree => true,
        SearchStrategy::BruteForce => false,
    };
    let pairs = if use_tree {
        KdTree::build(&distinct).all_two_nearest()
    } else {
        map_points(distinct.n_points(), |i| brute_two_nearest(&distinct, i))
    };

    let mut r1 = Vec::with_capacity(pairs.len());
    let mut r2 = Vec::with_capacity(pairs.len());
    let mut mu = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let (a, b) = (a.sqrt(), b.sqrt());
        r1.push(a);
        r2.push(b);
        mu.push(b / a);
    }
    Ok(NeighborStats {
        r1,
        r2,
        mu,
        kept_indices,
        n_input: cloud.n_points(),
    })
}

#[cfg(feature = "parallel")]
fn map_points<F>(n: usize, f: F) -> Vec<(f64, f64)>
where
    F: Fn(usize) -> (f64, f64) + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_points<F>(n: usize, f: F) -> Vec<(f64, f64)>
where
    F: Fn(usize) -> (f64, f64),
{
    (0..n).map(f).collect()
}

/// Tracks the two smallest squared distances seen.
#[derive(Clone, Copy)]
struct BestTwo {
    first: f64,
    second: f64,
}

impl BestTwo {
    fn new() -> Self {
        Self {
            first: f64::INFINITY,
            second: f64::INFINITY,
        }
    }

    #[inline]
    fn offer(&mut self, d: f64) {
        if d < self.first {
            self.second = self.first;
            self.first = d;
        } else if d < self.second {
            self.second = d;
        }
    }
}

fn brute_two_nearest(cloud: &PointCloud, i: usize) -> (f64, f64) {
    let q = cloud.point(i);
    let mut best = BestTwo::new();
    for (j, p) in cloud.rows().enumerate() {
        if j != i {
            best.offer(dist2(q, p));
        }
    }
    (best.first, best.second)
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over a cloud, splitting at the median of the widest
/// dimension. After construction the points are copied into tree order so
/// each leaf is a contiguous block.
struct KdTree<'a> {
    cloud: &'a PointCloud,
    /// Tree position -> index in `cloud`.
    order: Vec<usize>,
    nodes: Vec<Node>,
    packed: Vec<f64>,
}

impl<'a> KdTree<'a> {
    fn build(cloud: &'a PointCloud) -> Self {
        let mut tree = KdTree {
            cloud,
            order: (0..cloud.n_points()).collect(),
            nodes: Vec::new(),
            packed: Vec::new(),
        };
        tree.build_node(0, cloud.n_points());
        tree.packed = cloud.select(&tree.order).into_data();
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let dim = self.widest_dim(start, end);
        let Some(dim) = dim else { return id };

        let mid = (end - start) / 2;
        let cloud = self.cloud;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            cloud.point(a)[dim].total_cmp(&cloud.point(b)[dim])
        });
        let value = cloud.point(self.order[start + mid])[dim];
        let left = self.build_node(start, start + mid);
        let right = self.build_node(start + mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn widest_dim(&self, start: usize, end: usize) -> Option<usize> {
        let dim = self.cloud.ambient_dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &self.order[start..end] {
            for (k, &v) in self.cloud.point(i).iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let (best, spread) = (0..dim)
            .map(|k| (k, hi[k] - lo[k]))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        (spread > 0.0).then_some(best)
    }

    #[inline]
    fn packed_point(&self, pos: usize) -> &[f64] {
        let dim = self.cloud.ambient_dim();
        &self.packed[pos * dim..(pos + 1) * dim]
    }

    /// Squared distances for every point, indexed like the input cloud.
    fn all_two_nearest(&self) -> Vec<(f64, f64)> {
        let by_pos = map_points(self.order.len(), |pos| {
            let mut best = BestTwo::new();
            self.search(0, pos, self.packed_point(pos), &mut best);
            (best.first, best.second)
        });
        let mut out = vec![(0.0, 0.0); by_pos.len()];
        for (pos, pair) in by_pos.into_iter().enumerate() {
            out[self.order[pos]] = pair;
        }
        out
    }

    fn search(&self, node: usize, self_pos: usize, q: &[f64], best: &mut BestTwo) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for pos in start..end {
                    if pos != self_pos {
                        best.offer(dist2(q, self.packed_point(pos)));
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, self_pos, q, best);
                // Every point across the plane is at least |diff| away.
                if diff * diff < best.second {
                    self.search(far, self_pos, q, best);
                }
            }
        }
    }
}
