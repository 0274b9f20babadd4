use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{centroid, cmp_hit, dist, dist2, fps, knn, Point3, PointCloud};
use crate::error::{invalid, Error, Result};

/// A local point set in its own normalized frame.
///
/// `center` and `scale` map the stored points back to the parent cloud:
/// `world = center + scale * local`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub points: Vec<Point3>,
    pub center: Point3,
    pub scale: f64,
    /// Indices into the parent cloud; empty for generated patches.
    pub source_indices: Vec<usize>,
    /// Set when the geodesic graph could not reach enough points and the
    /// patch was completed with Euclidean neighbors.
    pub used_fallback: bool,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn denormalized(&self) -> Vec<Point3> {
        denormalize(&self.points, self.center, self.scale)
    }
}

/// Center on the centroid and scale into the unit ball.
pub fn normalize(points: &[Point3]) -> Result<Patch> {
    if points.is_empty() {
        return Err(invalid("cannot normalize an empty patch"));
    }
    let center = centroid(points);
    let scale = points
        .iter()
        .map(|p| dist(p, &center))
        .fold(0.0_f64, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::DegeneratePatch);
    }
    let points = points
        .iter()
        .map(|p| {
            [
                (p[0] - center[0]) / scale,
                (p[1] - center[1]) / scale,
                (p[2] - center[2]) / scale,
            ]
        })
        .collect();
    Ok(Patch {
        points,
        center,
        scale,
        source_indices: Vec::new(),
        used_fallback: false,
    })
}

pub fn denormalize(points: &[Point3], center: Point3, scale: f64) -> Vec<Point3> {
    points
        .iter()
        .map(|p| {
            [
                p[0] * scale + center[0],
                p[1] * scale + center[1],
                p[2] * scale + center[2],
            ]
        })
        .collect()
}

/// Seed `n_patches` patches by FPS and grow each to `patch_size` points by
/// shortest-path distance over the symmetrized `graph_k`-NN graph.
///
/// When a seed's graph component holds fewer than `patch_size` points the
/// remainder is filled with the Euclidean-nearest unreached points and the
/// patch is flagged (and a warning logged).
pub fn geodesic_patches(
    cloud: &PointCloud,
    n_patches: usize,
    patch_size: usize,
    graph_k: usize,
) -> Result<Vec<Patch>> {
    let pts = cloud.points();
    let n = pts.len();
    if patch_size == 0 || patch_size > n {
        return Err(invalid(format!(
            "patch size {patch_size} must be in 1..={n} (cloud size)"
        )));
    }
    if graph_k == 0 {
        return Err(invalid("geodesic graph needs graph_k >= 1"));
    }
    if n_patches == 0 || n_patches > n {
        return Err(invalid(format!("cannot seed {n_patches} patches in {n} points")));
    }
    let adjacency = geodesic_graph(pts, graph_k.min(n.saturating_sub(1)))?;
    let seeds = fps(pts, n_patches, 0)?;
    seeds
        .into_iter()
        .map(|seed| {
            let (members, fallback) = grow_patch(pts, &adjacency, seed, patch_size);
            if fallback {
                log::warn!(
                    "geodesic patch at seed {seed} reached fewer than {patch_size} points; \
                     filled with Euclidean neighbors"
                );
            }
            let local: Vec<Point3> = members.iter().map(|&i| pts[i]).collect();
            let mut patch = normalize(&local)?;
            patch.source_indices = members;
            patch.used_fallback = fallback;
            Ok(patch)
        })
        .collect()
}

fn geodesic_graph(pts: &[Point3], k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pts.len()];
    if k == 0 {
        return Ok(adjacency);
    }
    let g = knn(pts, k)?;
    for (i, (idx, d)) in g.indices.iter().zip(&g.distances).enumerate() {
        for (&j, &w) in idx.iter().zip(d) {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|a| a.0);
        list.dedup_by_key(|e| e.0);
    }
    Ok(adjacency)
}

#[derive(PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn grow_patch(
    pts: &[Point3],
    adjacency: &[Vec<(usize, f64)>],
    seed: usize,
    size: usize,
) -> (Vec<usize>, bool) {
    let n = pts.len();
    let mut best = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut members = Vec::with_capacity(size);
    best[seed] = 0.0;
    heap.push(Reverse((Dist(0.0), seed)));
    // Settled order is (distance, index) ascending, so the first `size`
    // settled nodes are exactly the nearest by geodesic distance.
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        members.push(u);
        if members.len() == size {
            return (members, false);
        }
        for &(v, w) in &adjacency[u] {
            let nd = d + w;
            if nd < best[v] {
                best[v] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    let mut rest: Vec<(f64, usize)> = (0..n)
        .filter(|&i| !done[i])
        .map(|i| (dist2(&pts[seed], &pts[i]), i))
        .collect();
    rest.sort_by(cmp_hit);
    members.extend(rest.iter().take(size - members.len()).map(|h| h.1));
    (members, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn two_point_normalization() {
        let p = normalize(&[[2.0, 0.0, 0.0], [4.0, 0.0, 0.0]]).unwrap();
        assert_eq!(p.center, [3.0, 0.0, 0.0]);
        assert_eq!(p.scale, 1.0);
        assert_eq!(p.points, vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn identical_points_are_degenerate() {
        assert!(matches!(
            normalize(&[[1.0, 1.0, 1.0]; 3]),
            Err(Error::DegeneratePatch)
        ));
        assert!(normalize(&[]).is_err());
    }

    #[test]
    fn whole_cloud_patch() {
        let pts: Vec<Point3> = (0..10).map(|i| [i as f64, (i * i) as f64, 0.0]).collect();
        let cloud = PointCloud::new(pts).unwrap();
        let patches = geodesic_patches(&cloud, 1, 10, 3).unwrap();
        let mut idx = patches[0].source_indices.clone();
        idx.sort();
        assert_eq!(idx, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn disconnected_lines_stay_separate_until_fallback() {
        // Two parallel lines one unit apart with spacing 0.1: a 2-NN graph
        // never bridges them.
        let mut pts = Vec::new();
        for i in 0..20 {
            pts.push([i as f64 * 0.1, 0.0, 0.0]);
        }
        for i in 0..20 {
            pts.push([i as f64 * 0.1, 1.0, 0.0]);
        }
        let cloud = PointCloud::new(pts).unwrap();
        let adjacency = geodesic_graph(cloud.points(), 2).unwrap();
        let (members, fallback) = grow_patch(cloud.points(), &adjacency, 0, 15);
        assert!(!fallback);
        assert!(members.iter().all(|&i| i < 20));
        let (members, fallback) = grow_patch(cloud.points(), &adjacency, 0, 25);
        assert!(fallback);
        assert_eq!(members.len(), 25);
        assert!(members[..20].iter().all(|&i| i < 20));
        assert!(members[20..].iter().all(|&i| i >= 20));

        let patches = geodesic_patches(&cloud, 2, 25, 2).unwrap();
        assert!(patches.iter().all(|p| p.used_fallback && p.len() == 25));
    }

    #[test]
    fn sphere_patches_cover_the_cloud() {
        let mesh = primitives::icosphere(1.0, 3);
        let cloud = crate::io::sample_mesh(&mesh, 2048, crate::io::SampleMode::PoissonDisk, 1)
            .unwrap();
        let patches = geodesic_patches(&cloud, 24, 256, 5).unwrap();
        let mut covered = vec![false; cloud.len()];
        for p in &patches {
            assert_eq!(p.len(), 256);
            assert!(p.points.iter().all(|q| q.iter().map(|c| c * c).sum::<f64>().sqrt() <= 1.0 + 1e-9));
            for &i in &p.source_indices {
                covered[i] = true;
            }
        }
        let frac = covered.iter().filter(|&&c| c).count() as f64 / cloud.len() as f64;
        assert!(frac >= 0.95, "coverage {frac}");
    }
}
