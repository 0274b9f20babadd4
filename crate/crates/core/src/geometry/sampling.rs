use rand::seq::index;

use super::{dist2, Point3};
use crate::error::{invalid, Result};
use crate::rng;

/// Farthest point sampling.
///
/// Starts at `start`, then repeatedly takes the point whose distance to the
/// selected set is largest, lowest index on ties.
pub fn fps(points: &[Point3], m: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(invalid(format!("fps needs 1 <= m <= {n}, got m={m}")));
    }
    if start >= n {
        return Err(invalid(format!("fps start index {start} out of range for {n} points")));
    }
    let mut selected = Vec::with_capacity(m);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = start;
    selected.push(current);
    min_d2[current] = f64::NEG_INFINITY;
    while selected.len() < m {
        let c = points[current];
        let mut best = usize::MAX;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, d) in min_d2.iter_mut().enumerate() {
            if *d == f64::NEG_INFINITY {
                continue;
            }
            let nd = dist2(&c, &points[i]);
            if nd < *d {
                *d = nd;
            }
            if *d > best_d2 {
                best_d2 = *d;
                best = i;
            }
        }
        current = best;
        min_d2[current] = f64::NEG_INFINITY;
        selected.push(current);
    }
    Ok(selected)
}

/// Split a patch into `r` coarse subsets of `n / r` points each.
///
/// Each subset is an independent FPS run from its own start index; starts are
/// distinct and drawn from the stream keyed by `seed`. Subsets may overlap.
/// Returns point indices into `points`.
pub fn downsample_coarse(points: &[Point3], r: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    if r == 0 || !n.is_multiple_of(r) || r > n {
        return Err(invalid(format!(
            "downsampling rate {r} must divide the patch size {n}"
        )));
    }
    let mut stream = rng::stream(seed, &[rng::tag::DOWNSAMPLE]);
    let starts = index::sample(&mut stream, n, r);
    starts.iter().map(|s| fps(points, n / r, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQUARE: [Point3; 4] = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
    ];

    #[test]
    fn square_corners() {
        assert_eq!(fps(&SQUARE, 2, 0).unwrap(), vec![0, 3]);
        // (1,0) and (0,1) tie at distance 1 from both picks; lower index wins.
        let third = fps(&SQUARE, 3, 0).unwrap()[2];
        assert_eq!(SQUARE[third], [1.0, 0.0, 0.0]);
        let mut all = fps(&SQUARE, 4, 2).unwrap();
        assert_eq!(all[0], 2);
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn fps_argument_checks() {
        assert!(fps(&SQUARE, 5, 0).is_err());
        assert!(fps(&SQUARE, 0, 0).is_err());
        assert!(fps(&SQUARE, 2, 4).is_err());
    }

    #[test]
    fn coarse_patch_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point3> = (0..256).map(|_| rng.random()).collect();
        let coarse = downsample_coarse(&pts, 4, 9).unwrap();
        assert_eq!(coarse.len(), 4);
        assert!(coarse.iter().all(|c| c.len() == 64));
        assert_eq!(coarse, downsample_coarse(&pts, 4, 9).unwrap());
        let starts: std::collections::HashSet<_> = coarse.iter().map(|c| c[0]).collect();
        assert_eq!(starts.len(), 4);
        assert!(downsample_coarse(&pts, 3, 9).is_err());
    }

    #[test]
    fn rate_one_is_a_full_reordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point3> = (0..32).map(|_| rng.random()).collect();
        let coarse = downsample_coarse(&pts, 1, 0).unwrap();
        let mut idx = coarse[0].clone();
        idx.sort();
        assert_eq!(idx, (0..32).collect::<Vec<_>>());
    }

    fn min_spacing(pts: &[Point3], idx: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                best = best.min(dist2(&pts[i], &pts[j]).sqrt());
            }
        }
        best
    }

    #[test]
    fn collinear_coarse_subsets_beat_random_subsets() {
        let pts: Vec<Point3> = (0..8).map(|i| [i as f64, 0.0, 0.0]).collect();
        let coarse = downsample_coarse(&pts, 2, 42).unwrap();
        assert_eq!(coarse, downsample_coarse(&pts, 2, 42).unwrap());
        assert!(coarse.iter().all(|s| s.len() == 4));
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let random_mean = (0..100)
            .map(|_| min_spacing(&pts, &index::sample(&mut rng, 8, 4).into_vec()))
            .sum::<f64>()
            / 100.0;
        // Starts 1 and 6 end with an adjacent pair (spacing 1, below the
        // random mean of about 1.07); every other start keeps spacing 2.
        let per_start: Vec<f64> = (0..8).map(|s| min_spacing(&pts, &fps(&pts, 4, s).unwrap())).collect();
        assert_eq!(per_start, vec![2.0, 1.0, 2.0, 2.0, 2.0, 2.0, 1.0, 2.0]);
        let fps_mean = per_start.iter().sum::<f64>() / 8.0;
        assert!(fps_mean > random_mean, "{fps_mean} vs {random_mean}");
    }
}
