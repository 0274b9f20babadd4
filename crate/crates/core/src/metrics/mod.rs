//! Evaluation metrics: Chamfer and Hausdorff distance, point-to-surface
//! distance and multi-scale uniformity. Plain `f64` arithmetic, no graph.

mod bvh;

pub use bvh::{face_dist2, MeshBvh};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{centroid, dist2, KdTree, Point3, TriangleMesh};
use crate::loss::uniform_regions;

/// Seeds per disk for the uniformity metric.
pub const UNIFORMITY_SEEDS: usize = 50;

fn nearest_distances(from: &[Point3], to: &[Point3]) -> Vec<f64> {
    let tree = KdTree::new(to);
    from.par_iter()
        .map(|p| tree.nearest_one(p).0.sqrt())
        .collect()
}

fn check_nonempty(a: &[Point3], b: &[Point3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("metric of an empty point set"));
    }
    Ok(())
}

/// Symmetric mean nearest-neighbor distance.
pub fn cd_metric(a: &[Point3], b: &[Point3]) -> Result<f64> {
    check_nonempty(a, b)?;
    let mean = |d: Vec<f64>| d.iter().sum::<f64>() / d.len() as f64;
    Ok(mean(nearest_distances(a, b)) + mean(nearest_distances(b, a)))
}

/// Symmetric Hausdorff distance.
pub fn hd_metric(a: &[Point3], b: &[Point3]) -> Result<f64> {
    check_nonempty(a, b)?;
    let max = |d: Vec<f64>| d.into_iter().fold(0.0, f64::max);
    Ok(max(nearest_distances(a, b)).max(max(nearest_distances(b, a))))
}

/// Distance from every point to the mesh surface, and their mean.
pub fn p2f(points: &[Point3], mesh: &TriangleMesh) -> Result<(f64, Vec<f64>)> {
    if mesh.faces.is_empty() {
        return Err(invalid("point-to-surface distance against an empty mesh"));
    }
    if points.is_empty() {
        return Err(invalid("point-to-surface distance of an empty point set"));
    }
    let bvh = MeshBvh::new(mesh);
    let d: Vec<f64> = points
        .par_iter()
        .map(|p| bvh.closest_dist2(p).sqrt())
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok((mean, d))
}

/// Chi-square uniformity score per area fraction `p` (lower is more
/// uniform). Points are expected in the unit ball.
///
/// Seeding starts from the point farthest from the centroid, so the score
/// depends only on the geometry, not on point order.
pub fn uniformity_metric(points: &[Point3], p_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if points.len() < 2 {
        return Err(invalid("uniformity needs at least two points"));
    }
    let start = canonical_start(points);
    p_values
        .iter()
        .map(|&p| {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid(format!("area fraction {p} outside (0, 1)")));
            }
            let score = uniform_regions(points, UNIFORMITY_SEEDS, p, start)?
                .iter()
                .filter(|r| r.members.len() >= 2)
                .map(|r| {
                    let spread: f64 = r
                        .members
                        .iter()
                        .zip(&r.nearest)
                        .map(|(&i, &j)| (dist2(&points[i], &points[j]).sqrt() - r.d_hat).powi(2) / r.d_hat)
                        .sum();
                    r.count_term * spread
                })
                .sum();
            Ok((p, score))
        })
        .collect()
}

fn canonical_start(points: &[Point3]) -> usize {
    let c = centroid(points);
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if dist2(p, &c) > dist2(&points[best], &c) {
            best = i;
        }
    }
    best
}

/// Reference upsampler: every point repeated `copies` times, each copy
/// displaced uniformly inside a ball of `radius`.
pub fn duplicate_jitter(points: &[Point3], copies: usize, radius: f64, seed: u64) -> Vec<Point3> {
    let mut stream = crate::rng::stream(seed, &[crate::rng::tag::JITTER]);
    let mut out = Vec::with_capacity(points.len() * copies);
    for p in points {
        for _ in 0..copies {
            let offset = loop {
                let d: Point3 = std::array::from_fn(|_| stream.random_range(-1.0..1.0));
                if d.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    break d;
                }
            };
            out.push(std::array::from_fn(|k| p[k] + radius * offset[k]));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCounts {
    pub input: Option<usize>,
    pub output: usize,
    pub gt: usize,
}

/// All metrics of one prediction, in model units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cd: f64,
    pub hd: f64,
    pub p2f_mean: Option<f64>,
    /// `(p, score)` pairs.
    pub uniformity: Vec<(f64, f64)>,
    pub point_counts: PointCounts,
}

impl MetricReport {
    pub fn evaluate(
        pred: &[Point3],
        gt: &[Point3],
        mesh: Option<&TriangleMesh>,
        p_values: &[f64],
        input_count: Option<usize>,
    ) -> Result<Self> {
        let uniformity = uniformity_metric(&crate::geometry::normalize(pred)?.points, p_values)?;
        Ok(Self {
            cd: cd_metric(pred, gt)?,
            hd: hd_metric(pred, gt)?,
            p2f_mean: mesh.map(|m| p2f(pred, m).map(|r| r.0)).transpose()?,
            uniformity,
            point_counts: PointCounts {
                input: input_count,
                output: pred.len(),
                gt: gt.len(),
            },
        })
    }

    /// Flat `(name, value)` list; the schema of both report files.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![("cd".to_string(), self.cd), ("hd".to_string(), self.hd)];
        if let Some(p) = self.p2f_mean {
            out.push(("p2f".to_string(), p));
        }
        for (p, s) in &self.uniformity {
            out.push((format!("uni_{p}"), *s));
        }
        if let Some(n) = self.point_counts.input {
            out.push(("n_input".to_string(), n as f64));
        }
        out.push(("n_output".to_string(), self.point_counts.output as f64));
        out.push(("n_gt".to_string(), self.point_counts.gt as f64));
        out
    }

    /// `name value` lines, values at full precision.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} {v}\n"))
            .collect()
    }

    /// JSON object mapping metric name to value.
    pub fn to_json(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> = self
            .entries()
            .into_iter()
            .map(|(k, v)| (k, serde_json::json!(v)))
            .collect();
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("finite metrics serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(seed: u64, n: usize) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn identical_sets_score_zero() {
        let a = cloud(0, 100);
        assert_eq!(cd_metric(&a, &a).unwrap(), 0.0);
        assert_eq!(hd_metric(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn jitter_stays_in_the_ball() {
        let pts = cloud(3, 20);
        let j = duplicate_jitter(&pts, 4, 0.02, 1);
        assert_eq!(j.len(), 80);
        for (i, q) in j.iter().enumerate() {
            assert!(dist2(q, &pts[i / 4]).sqrt() <= 0.02 + 1e-15);
        }
        assert_eq!(j, duplicate_jitter(&pts, 4, 0.02, 1));
    }

    #[test]
    fn hausdorff_on_a_line() {
        let a = [[0.0; 3]];
        let b = [[0.0; 3], [3.0, 0.0, 0.0]];
        assert_eq!(hd_metric(&a, &b).unwrap(), 3.0);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(cd_metric(&[], &[[0.0; 3]]).is_err());
        assert!(hd_metric(&[[0.0; 3]], &[]).is_err());
        let empty = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(p2f(&[[0.0; 3]], &empty).is_err());
    }

    #[test]
    fn p2f_simple_cases() {
        let mesh = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let (_, d) = p2f(&[[0.2, 0.2, 0.0], [0.2, 0.2, 0.7], [0.5, -2.0, 0.0]], &mesh).unwrap();
        assert!(d[0] < 1e-15);
        assert_eq!(&d[1..], &[0.7, 2.0]);
        let sphere = primitives::icosphere(1.0, 2);
        let (mean, d) = p2f(&sphere.vertices, &sphere).unwrap();
        assert_eq!(mean, 0.0);
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn report_formats() {
        let a = cloud(1, 50);
        let b = cloud(2, 60);
        let r = MetricReport::evaluate(&a, &b, None, &[0.01], Some(10)).unwrap();
        let text = r.to_text();
        assert!(text.starts_with(&format!("cd {}\nhd {}\n", r.cd, r.hd)));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["cd"].as_f64().unwrap(), r.cd);
        assert_eq!(json["n_output"].as_f64().unwrap(), 50.0);
        assert!(json.get("p2f").is_none());
    }

    #[test]
    fn uniformity_ignores_order_and_rotation() {
        let mesh = primitives::icosphere(1.0, 3);
        let pts = crate::io::sample_mesh(&mesh, 1000, crate::io::SampleMode::PoissonDisk, 3)
            .unwrap()
            .into_points();
        let p = [0.004, 0.012];
        let base = uniformity_metric(&pts, &p).unwrap();
        let mut rev = pts.clone();
        rev.reverse();
        assert_eq!(uniformity_metric(&rev, &p).unwrap(), base);
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let rot: Vec<Point3> = pts.iter().map(|q| [c * q[0] - s * q[1], s * q[0] + c * q[1], q[2]]).collect();
        for ((_, a), (_, b)) in uniformity_metric(&rot, &p).unwrap().iter().zip(&base) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
