#![allow(dead_code)]

use idrank_core::rng::substream;
use idrank_core::synth::random_orthonormal;
use idrank_core::PointCloud;
use rand::Rng;
use rand_distr::StandardNormal;

/// Inverse-CDF draws from the unit-scale Pareto law with shape `d`.
pub fn pareto_sample(d: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 0);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (1.0 - u).powf(-1.0 / d)
        })
        .collect()
}

/// All-pairs oracle: drops later copies of repeated points, then sorts every
/// row of the distance matrix and reads off the two smallest entries.
pub fn brute_force_neighbors(cloud: &PointCloud) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cloud.n_points();
    let kept: Vec<usize> = (0..n)
        .filter(|&i| !(0..i).any(|j| cloud.point(j) == cloud.point(i)))
        .collect();
    let mut r1 = Vec::with_capacity(kept.len());
    let mut r2 = Vec::with_capacity(kept.len());
    for &i in &kept {
        let mut row: Vec<f64> = kept
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| {
                let mut s = 0.0;
                for (a, b) in cloud.point(i).iter().zip(cloud.point(j)) {
                    s += (a - b) * (a - b);
                }
                s.sqrt()
            })
            .collect();
        row.sort_by(f64::total_cmp);
        r1.push(row[0]);
        r2.push(row[1]);
    }
    (kept, r1, r2)
}

/// Maximizes `n ln d - (d + 1) sum(ln mu)` by golden-section search.
pub fn golden_section_mle(mu: &[f64]) -> f64 {
    let n = mu.len() as f64;
    let s: f64 = mu.iter().map(|m| m.ln()).sum();
    let loglik = |d: f64| n * d.ln() - (d + 1.0) * s;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-3, 1e3);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    while (b - a) > 1e-12 * (a + b) {
        if loglik(c) > loglik(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    0.5 * (a + b)
}

/// Random orthogonal matrix as rows.
pub fn random_rotation(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    random_orthonormal(dim, dim, &mut substream(seed, 1))
}

pub fn rotate(cloud: &PointCloud, rot: &[Vec<f64>]) -> PointCloud {
    let data: Vec<f64> = cloud
        .rows()
        .flat_map(|p| rot.iter().map(move |r| r.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()))
        .collect();
    PointCloud::new(cloud.ambient_dim(), data).unwrap()
}

pub fn translate(cloud: &PointCloud, shift: &[f64]) -> PointCloud {
    let data: Vec<f64> = cloud
        .rows()
        .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b))
        .collect();
    PointCloud::new(cloud.ambient_dim(), data).unwrap()
}

pub fn scale(cloud: &PointCloud, s: f64) -> PointCloud {
    PointCloud::new(cloud.ambient_dim(), cloud.data().iter().map(|v| v * s).collect()).unwrap()
}

pub fn gaussian_vec(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 2);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform cloud in a box, optionally snapped to a coarse grid so ties and
/// duplicates occur.
pub fn random_cloud(n: usize, dim: usize, seed: u64, snap: bool) -> PointCloud {
    let mut rng = substream(seed, 3);
    let data = (0..n * dim)
        .map(|_| {
            let v: f64 = rng.random::<f64>() * 10.0;
            if snap {
                v.round()
            } else {
                v
            }
        })
        .collect();
    PointCloud::new(dim, data).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
