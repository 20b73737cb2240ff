//! PCA surface-normal estimation over k nearest neighbors.
//!
//! Neighbor lookups use a uniform spatial hash with a configurable cell size
//! rather than a tree; clouds here are bounded to tens of meters. Normals are
//! the smallest-eigenvalue eigenvector of the neighborhood covariance,
//! sign-flipped to face the viewpoint (`n · (c − p) ≥ 0`).

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use std::collections::HashMap;

/// Default hash cell edge, meters.
pub const DEFAULT_HASH_CELL_M: f64 = 0.2;

pub(crate) struct SpatialHash<'a> {
    points: &'a [Vector3<f64>],
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl<'a> SpatialHash<'a> {
    pub fn new(points: &'a [Vector3<f64>], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry(Self::key(p, cell))
                .or_default()
                .push(i as u32);
        }
        Self {
            points,
            cell,
            buckets,
        }
    }

    fn key(p: &Vector3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Indices of the `k` nearest neighbors of point `query`, excluding it.
    ///
    /// Exact: rings of cells are scanned outward until the k-th best distance
    /// cannot be beaten by any unscanned cell. Ties order by point index.
    pub fn k_nearest(&self, query: u32, k: usize) -> Vec<u32> {
        let q = &self.points[query as usize];
        let center = Self::key(q, self.cell);
        let mut candidates: Vec<(f64, u32)> = Vec::new();
        let mut ring = 0i64;
        loop {
            self.collect_ring(center, ring, |idx| {
                if idx != query {
                    let d2 = (self.points[idx as usize] - q).norm_squared();
                    candidates.push((d2, idx));
                }
            });
            if candidates.len() >= k {
                candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let kth = candidates[k - 1].0.sqrt();
                if kth <= ring as f64 * self.cell {
                    break;
                }
            }
            ring += 1;
            // Past any plausible cloud extent there is nothing left to find.
            if ring as f64 * self.cell > 1e4 {
                candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                break;
            }
        }
        candidates.truncate(k);
        candidates.into_iter().map(|(_, i)| i).collect()
    }

    fn collect_ring(&self, center: (i64, i64, i64), ring: i64, mut visit: impl FnMut(u32)) {
        for dx in -ring..=ring {
            for dy in -ring..=ring {
                for dz in -ring..=ring {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                        continue;
                    }
                    if let Some(bucket) =
                        self.buckets
                            .get(&(center.0 + dx, center.1 + dy, center.2 + dz))
                    {
                        for &idx in bucket {
                            visit(idx);
                        }
                    }
                }
            }
        }
    }
}

/// Estimate one unit normal per point from its k-neighborhood plane fit.
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    viewpoint: &Vector3<f64>,
    cell_m: f64,
) -> Result<PointCloud> {
    if k < 3 {
        return Err(Error::domain(format!("need k >= 3 neighbors, got {k}")));
    }
    if cloud.len() < k + 1 {
        return Err(Error::domain(format!(
            "need at least k+1 = {} points, cloud has {}",
            k + 1,
            cloud.len()
        )));
    }
    if !(cell_m > 0.0) {
        return Err(Error::invalid("hash cell size must be positive"));
    }
    let hash = SpatialHash::new(&cloud.points, cell_m);
    let normals: Vec<Vector3<f64>> = (0..cloud.len() as u32)
        .into_par_iter()
        .map(|i| {
            let neighbors = hash.k_nearest(i, k);
            point_normal(&cloud.points, i, &neighbors, viewpoint)
        })
        .collect();
    PointCloud::with_normals(cloud.points.clone(), normals)
}

/// Mean angular deviation (radians) between each point's normal and the
/// normals of its k nearest neighbors. High values flag the "inconsistent
/// orientation" neighborhoods that segmentation treats as obstacles.
pub fn normal_inconsistency(cloud: &PointCloud, k: usize, cell_m: f64) -> Result<Vec<f64>> {
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::domain("cloud has no normals"))?;
    if cloud.len() < k + 1 {
        return Err(Error::domain("too few points for neighborhood statistics"));
    }
    let hash = SpatialHash::new(&cloud.points, cell_m);
    Ok((0..cloud.len() as u32)
        .into_par_iter()
        .map(|i| {
            let neighbors = hash.k_nearest(i, k);
            let n_i = &normals[i as usize];
            let sum: f64 = neighbors
                .iter()
                .map(|&j| {
                    let cos = n_i.dot(&normals[j as usize]).abs().clamp(-1.0, 1.0);
                    cos.acos()
                })
                .sum();
            sum / neighbors.len().max(1) as f64
        })
        .collect())
}

fn point_normal(
    points: &[Vector3<f64>],
    index: u32,
    neighbors: &[u32],
    viewpoint: &Vector3<f64>,
) -> Vector3<f64> {
    let p = points[index as usize];
    // Covariance over the neighborhood including the point itself.
    let mut mean = p;
    for &j in neighbors {
        mean += points[j as usize];
    }
    mean /= (neighbors.len() + 1) as f64;
    let mut cov = Matrix3::zeros();
    for q in std::iter::once(&p).chain(neighbors.iter().map(|&j| &points[j as usize])) {
        let d = q - mean;
        cov += d * d.transpose();
    }
    cov /= (neighbors.len() + 1) as f64;

    let eigen = cov.symmetric_eigen();
    let max_ev = eigen.eigenvalues.amax();
    let tol = 1e-12 * max_ev.max(1.0);
    let min_ev = eigen.eigenvalues.min();
    // Collect eigenvectors tied at the smallest eigenvalue and break the tie
    // by the lexicographically largest absolute-component pattern.
    let mut normal: Option<Vector3<f64>> = None;
    for c in 0..3 {
        if eigen.eigenvalues[c] - min_ev > tol {
            continue;
        }
        let v: Vector3<f64> = eigen.eigenvectors.column(c).into();
        let v = v.normalize();
        normal = Some(match normal {
            None => v,
            Some(best) => {
                if abs_pattern_greater(&v, &best) {
                    v
                } else {
                    best
                }
            }
        });
    }
    let mut n = normal.expect("3x3 symmetric eigen always yields vectors");
    let facing = n.dot(&(viewpoint - p));
    if facing < 0.0 {
        n = -n;
    } else if facing == 0.0 {
        n = canonical_sign(n);
    }
    n
}

fn abs_pattern_greater(a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
    for i in 0..3 {
        let (x, y) = (a[i].abs(), b[i].abs());
        if x != y {
            return x > y;
        }
    }
    false
}

fn canonical_sign(n: Vector3<f64>) -> Vector3<f64> {
    for i in 0..3 {
        if n[i] != 0.0 {
            return if n[i] > 0.0 { n } else { -n };
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_cloud(axis: usize, level: f64, n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| {
                let a = rng.gen_range(-2.0..2.0);
                let b = rng.gen_range(-2.0..2.0);
                match axis {
                    0 => Vector3::new(level, a, b),
                    1 => Vector3::new(a, level, b),
                    _ => Vector3::new(a, b, level),
                }
            })
            .collect();
        PointCloud::new(points).unwrap()
    }

    #[test]
    fn floor_plane_normals_face_camera() {
        // Floor below a camera at the origin (y-down world): y = +1.4.
        let cloud = plane_cloud(1, 1.4, 400, 1);
        let viewpoint = Vector3::zeros();
        let out = estimate_normals(&cloud, 16, &viewpoint, 0.2).unwrap();
        for (n, p) in out.normals.as_ref().unwrap().iter().zip(&out.points) {
            let angle = n.dot(&Vector3::new(0.0, -1.0, 0.0)).abs().acos();
            assert!(angle < 1e-6, "angular error {angle}");
            assert!(n.dot(&(viewpoint - p)) >= 0.0);
            assert!((n - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn wall_plane_normals() {
        let cloud = plane_cloud(0, 2.0, 400, 2);
        let viewpoint = Vector3::zeros();
        let out = estimate_normals(&cloud, 16, &viewpoint, 0.2).unwrap();
        for n in out.normals.as_ref().unwrap() {
            assert!((n.x.abs() - 1.0).abs() < 1e-6);
            // Sign rule points back toward the camera at x=0 < 2.
            assert!(n.x < 0.0);
        }
    }

    #[test]
    fn colinear_neighborhood_still_unit() {
        let points: Vec<Vector3<f64>> = (0..12)
            .map(|i| Vector3::new(i as f64 * 0.05, 0.0, 0.0))
            .collect();
        let cloud = PointCloud::new(points).unwrap();
        let out = estimate_normals(&cloud, 4, &Vector3::new(0.0, -1.0, 0.0), 0.2).unwrap();
        for n in out.normals.as_ref().unwrap() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
        // Determinism under re-run.
        let again = estimate_normals(&cloud, 4, &Vector3::new(0.0, -1.0, 0.0), 0.2).unwrap();
        assert_eq!(out.normals, again.normals);
    }

    #[test]
    fn knn_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<Vector3<f64>> = (0..300)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let hash = SpatialHash::new(&points, 0.2);
        for query in [0u32, 17, 123, 299] {
            let got = hash.k_nearest(query, 8);
            let mut brute: Vec<(f64, u32)> = points
                .iter()
                .enumerate()
                .filter(|(i, _)| *i as u32 != query)
                .map(|(i, p)| ((p - points[query as usize]).norm_squared(), i as u32))
                .collect();
            brute.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expected: Vec<u32> = brute[..8].iter().map(|(_, i)| *i).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn too_few_points_errors() {
        let cloud = plane_cloud(1, 0.0, 10, 3);
        assert!(estimate_normals(&cloud, 16, &Vector3::zeros(), 0.2).is_err());
        assert!(estimate_normals(&cloud, 2, &Vector3::zeros(), 0.2).is_err());
    }

    #[test]
    fn inconsistency_low_on_plane_high_on_noise() {
        let cloud = plane_cloud(1, 1.0, 300, 4);
        let with_normals = estimate_normals(&cloud, 12, &Vector3::zeros(), 0.2).unwrap();
        let scores = normal_inconsistency(&with_normals, 12, 0.2).unwrap();
        assert!(scores.iter().all(|s| *s < 0.01));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scatter: Vec<Vector3<f64>> = (0..300)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-0.3..0.3),
                    rng.gen_range(-0.3..0.3),
                    rng.gen_range(-0.3..0.3),
                )
            })
            .collect();
        let noisy = estimate_normals(
            &PointCloud::new(scatter).unwrap(),
            12,
            &Vector3::zeros(),
            0.2,
        )
        .unwrap();
        let noisy_scores = normal_inconsistency(&noisy, 12, 0.2).unwrap();
        let mean = noisy_scores.iter().sum::<f64>() / noisy_scores.len() as f64;
        assert!(mean > 30f64.to_radians(), "mean deviation {mean}");
    }

    #[test]
    fn results_independent_of_pool_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let points: Vec<Vector3<f64>> = (0..500)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-0.1..0.1),
                    rng.gen_range(-2.0..2.0),
                )
            })
            .collect();
        let cloud = PointCloud::new(points).unwrap();
        let viewpoint = Vector3::new(0.0, -1.0, 0.0);
        let parallel = estimate_normals(&cloud, 10, &viewpoint, 0.2).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_normals(&cloud, 10, &viewpoint, 0.2).unwrap());
        for (a, b) in parallel
            .normals
            .as_ref()
            .unwrap()
            .iter()
            .zip(single.normals.as_ref().unwrap())
        {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.z.to_bits(), b.z.to_bits());
        }
    }
}
