//! Geometric kernels on plain coordinate arrays: neighbor queries, farthest
//! point sampling, patch extraction and normalization.
//!
//! Nothing here participates in differentiation.

mod kdtree;
mod mesh;
mod patch;
mod sampling;

pub use kdtree::KdTree;
pub(crate) use mesh::closest_point_on_triangle;
pub use mesh::{primitives, TriangleMesh};
pub use patch::{denormalize, geodesic_patches, normalize, Patch};
pub use sampling::{downsample_coarse, fps};

use crate::error::{invalid, Result};

pub type Point3 = [f64; 3];

#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: &Point3, b: &Point3) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub(crate) fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        c[0] += p[0];
        c[1] += p[1];
        c[2] += p[2];
    }
    [c[0] / n, c[1] / n, c[2] / n]
}

/// A non-empty set of finite 3-D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("point cloud must contain at least one point"));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Exact k-nearest-neighbor lists, one per point.
///
/// `indices[i]` never contains `i`; lists are ordered by ascending distance
/// with ties going to the lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub k: usize,
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

impl NeighborGraph {
    /// Row-major `n * k` neighbor indices.
    pub fn flat_indices(&self) -> Vec<usize> {
        self.indices.iter().flatten().copied().collect()
    }
}

/// Exact k-NN over 3-D points, self excluded.
pub fn knn(points: &[Point3], k: usize) -> Result<NeighborGraph> {
    check_k(points.len(), k)?;
    let tree = KdTree::new(points);
    let (indices, distances) = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let hits = tree.nearest(p, k, Some(i));
            let idx = hits.iter().map(|h| h.1).collect();
            let d = hits.iter().map(|h| h.0.sqrt()).collect();
            (idx, d)
        })
        .unzip();
    Ok(NeighborGraph {
        k,
        indices,
        distances,
    })
}

/// Exact k-NN over rows of an `n x width` feature matrix, self excluded.
///
/// Used by the network to rebuild neighborhoods in feature space; a linear
/// scan is faster than a tree at the widths involved.
pub fn knn_features(features: &[f64], width: usize, k: usize) -> Result<NeighborGraph> {
    if width == 0 || !features.len().is_multiple_of(width) {
        return Err(invalid("feature buffer is not a whole number of rows"));
    }
    let n = features.len() / width;
    check_k(n, k)?;
    let row = |i: usize| &features[i * width..(i + 1) * width];
    let mut indices = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        scratch.clear();
        let a = row(i);
        for j in (0..n).filter(|&j| j != i) {
            let d2: f64 = a.iter().zip(row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
            scratch.push((d2, j));
        }
        scratch.select_nth_unstable_by(k - 1, cmp_hit);
        scratch[..k].sort_unstable_by(cmp_hit);
        indices.push(scratch[..k].iter().map(|h| h.1).collect());
        distances.push(scratch[..k].iter().map(|h| h.0.sqrt()).collect());
    }
    Ok(NeighborGraph {
        k,
        indices,
        distances,
    })
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(invalid(format!(
            "k-NN needs 0 < k < point count, got k={k} for {n} points"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn cmp_hit(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Point3], k: usize) -> Vec<Vec<usize>> {
        (0..points.len())
            .map(|i| {
                let mut all: Vec<(f64, usize)> = (0..points.len())
                    .filter(|&j| j != i)
                    .map(|j| (dist2(&points[i], &points[j]), j))
                    .collect();
                all.sort_by(cmp_hit);
                all.truncate(k);
                all.into_iter().map(|h| h.1).collect()
            })
            .collect()
    }

    #[test]
    fn line_neighbors() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let g = knn(&pts, 1).unwrap();
        assert_eq!(g.indices, vec![vec![1], vec![0], vec![1]]);
        assert_eq!(g.distances, vec![vec![1.0], vec![1.0], vec![2.0]]);
    }

    #[test]
    fn k_equal_n_minus_one_lists_everything() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 5.0, 0.0]];
        let g = knn(&pts, 3).unwrap();
        assert_eq!(g.indices, brute_knn(&pts, 3));
        for (i, list) in g.indices.iter().enumerate() {
            let mut sorted = list.clone();
            sorted.sort();
            let expected: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            assert_eq!(sorted, expected);
        }
    }

    #[test]
    fn random_cube_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point3> = (0..200).map(|_| rng.random()).collect();
        let g = knn(&pts, 10).unwrap();
        assert_eq!(g.indices, brute_knn(&pts, 10));
        for d in &g.distances {
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn ties_resolve_to_lower_index() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let g = knn(&pts, 2).unwrap();
        assert_eq!(g.indices[0], vec![1, 2]);
    }

    #[test]
    fn k_too_large_is_rejected() {
        let pts = [[0.0; 3], [1.0, 0.0, 0.0]];
        assert!(knn(&pts, 2).is_err());
        assert!(knn(&pts, 0).is_err());
        assert!(knn_features(&[0.0, 1.0], 1, 2).is_err());
    }

    #[test]
    fn feature_knn_agrees_with_coordinate_knn() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3> = (0..40).map(|_| rng.random()).collect();
        let flat: Vec<f64> = pts.iter().flatten().copied().collect();
        let a = knn(&pts, 5).unwrap();
        let b = knn_features(&flat, 3, 5).unwrap();
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn cloud_rejects_nan_and_empty() {
        assert!(PointCloud::new(vec![]).is_err());
        assert!(PointCloud::new(vec![[0.0, f64::NAN, 0.0]]).is_err());
        assert_eq!(PointCloud::new(vec![[0.0; 3]]).unwrap().len(), 1);
    }
}
