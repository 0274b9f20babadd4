use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{dist2, fps, Point3, PointCloud, TriangleMesh};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    AreaWeighted,
    PoissonDisk,
}

impl std::str::FromStr for SampleMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "area-weighted" | "area" => Ok(SampleMode::AreaWeighted),
            "poisson-disk" | "poisson" => Ok(SampleMode::PoissonDisk),
            other => Err(invalid(format!("unknown sampling mode '{other}'"))),
        }
    }
}

/// Candidate proposals per requested point in Poisson-disk mode.
const POOL_FACTOR: usize = 30;
/// Accepted count must land within this fraction of the target before repair.
const COUNT_TOLERANCE: f64 = 0.02;

/// Sample `n` points on the surface of `mesh`.
pub fn sample_mesh(mesh: &TriangleMesh, n: usize, mode: SampleMode, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(invalid("cannot sample zero points"));
    }
    let area = mesh.area();
    if area.is_nan() || area <= 0.0 {
        return Err(invalid("mesh has zero surface area"));
    }
    let mut stream = rng::stream(seed, &[rng::tag::SAMPLING]);
    let points = match mode {
        SampleMode::AreaWeighted => area_weighted(mesh, n, &mut stream),
        SampleMode::PoissonDisk => {
            let pool = area_weighted(mesh, (n * POOL_FACTOR).max(1000), &mut stream);
            poisson_disk(&pool, n, (area / n as f64).sqrt())?
        }
    };
    PointCloud::new(points)
}

fn area_weighted(mesh: &TriangleMesh, n: usize, stream: &mut ChaCha8Rng) -> Vec<Point3> {
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    (0..n)
        .map(|_| {
            let t = stream.random::<f64>() * total;
            let f = cumulative.partition_point(|&c| c <= t).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(f);
            let su = stream.random::<f64>().sqrt();
            let v = stream.random::<f64>();
            let (wa, wb, wc) = (1.0 - su, su * (1.0 - v), su * v);
            std::array::from_fn(|k| wa * a[k] + wb * b[k] + wc * c[k])
        })
        .collect()
}

/// Dart throwing over `pool` in order, with the rejection radius tuned by
/// bisection, then exact-count repair.
fn poisson_disk(pool: &[Point3], n: usize, spacing_hint: f64) -> Result<Vec<Point3>> {
    if n >= pool.len() {
        return Ok(pool[..n.min(pool.len())].to_vec());
    }
    let target = n as f64;
    let mut lo = 0.0;
    let mut hi = 4.0 * spacing_hint;
    let mut best = darts(pool, hi);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let accepted = darts(pool, mid);
        let closer = (accepted.len() as f64 - target).abs() < (best.len() as f64 - target).abs();
        if closer {
            best = accepted.clone();
        }
        if (accepted.len() as f64 - target).abs() <= COUNT_TOLERANCE * target {
            best = accepted;
            break;
        }
        if accepted.len() > n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let chosen: Vec<Point3> = best.iter().map(|&i| pool[i]).collect();
    if chosen.len() > n {
        let keep = fps(&chosen, n, 0)?;
        return Ok(keep.into_iter().map(|i| chosen[i]).collect());
    }
    Ok(top_up(pool, &best, n))
}

type Cell = (i64, i64, i64);

fn cell_of(p: &Point3, size: f64) -> Cell {
    (
        (p[0] / size).floor() as i64,
        (p[1] / size).floor() as i64,
        (p[2] / size).floor() as i64,
    )
}

/// Greedily accept pool points farther than `radius` from all accepted ones.
fn darts(pool: &[Point3], radius: f64) -> Vec<usize> {
    if radius <= 0.0 {
        return (0..pool.len()).collect();
    }
    let r2 = radius * radius;
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    let mut accepted = Vec::new();
    for (i, p) in pool.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p, radius);
        let mut clear = true;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(members) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        if members.iter().any(|&j| dist2(p, &pool[j]) < r2) {
                            clear = false;
                            break 'search;
                        }
                    }
                }
            }
        }
        if clear {
            grid.entry((cx, cy, cz)).or_default().push(i);
            accepted.push(i);
        }
    }
    accepted
}

/// Extend `accepted` to `n` points by farthest-point insertion from the pool.
fn top_up(pool: &[Point3], accepted: &[usize], n: usize) -> Vec<Point3> {
    let mut out: Vec<Point3> = accepted.iter().map(|&i| pool[i]).collect();
    let mut min_d2: Vec<f64> = pool
        .iter()
        .map(|p| out.iter().map(|q| dist2(p, q)).fold(f64::INFINITY, f64::min))
        .collect();
    while out.len() < n {
        let (best, _) = min_d2
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        let p = pool[best];
        out.push(p);
        for (d, q) in min_d2.iter_mut().zip(pool) {
            *d = d.min(dist2(&p, q));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    fn triangle() -> TriangleMesh {
        TriangleMesh::new(vec![[0.0; 3], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn samples_lie_inside_the_triangle() {
        let pts = sample_mesh(&triangle(), 1000, SampleMode::AreaWeighted, 1).unwrap();
        assert_eq!(pts.len(), 1000);
        for p in pts.points() {
            // x/2 + y <= 1, x >= 0, y >= 0, z = 0
            assert!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] / 2.0 + p[1] <= 1.0 + 1e-12);
            assert_eq!(p[2], 0.0);
        }
    }

    #[test]
    fn faces_are_chosen_by_area() {
        // Areas 4.5 and 0.5, on separate planes.
        let mesh = TriangleMesh::new(
            vec![[0.0; 3], [9.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 5.0], [1.0, 0.0, 5.0], [0.0, 1.0, 5.0]],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let a0 = mesh.face_area(0);
        let a1 = mesh.face_area(1);
        let n = 10_000;
        let pts = sample_mesh(&mesh, n, SampleMode::AreaWeighted, 7).unwrap();
        let first = pts.points().iter().filter(|p| p[2] == 0.0).count() as f64;
        let e0 = n as f64 * a0 / (a0 + a1);
        let e1 = n as f64 - e0;
        let chi2 = (first - e0).powi(2) / e0 + ((n as f64 - first) - e1).powi(2) / e1;
        // 99.9th percentile of chi-square with one degree of freedom.
        assert!(chi2 < 10.83, "chi2 = {chi2}");
    }

    #[test]
    fn poisson_hits_exact_count() {
        let mesh = primitives::icosphere(1.0, 3);
        for n in [100, 257, 2048] {
            let pts = sample_mesh(&mesh, n, SampleMode::PoissonDisk, 2).unwrap();
            assert_eq!(pts.len(), n);
        }
    }

    #[test]
    fn zero_area_is_rejected() {
        let flat = TriangleMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(sample_mesh(&flat, 10, SampleMode::AreaWeighted, 0).is_err());
        assert!(sample_mesh(&triangle(), 0, SampleMode::AreaWeighted, 0).is_err());
    }

    #[test]
    fn same_seed_same_points() {
        let mesh = primitives::torus(1.0, 0.3, 16, 8);
        let a = sample_mesh(&mesh, 300, SampleMode::PoissonDisk, 9).unwrap();
        let b = sample_mesh(&mesh, 300, SampleMode::PoissonDisk, 9).unwrap();
        assert_eq!(a, b);
    }
}
