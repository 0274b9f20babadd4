//! Exact neighbors and farthest point sampling on a random cloud.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spunet::geometry::{downsample_coarse, fps, knn, Point3};

pub fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points: Vec<Point3> = (0..256).map(|_| rng.random()).collect();

    let graph = knn(&points, 6).expect("k < n");
    println!("neighbors of point 0: {:?}", graph.indices[0]);
    println!("their distances:      {:.4?}", graph.distances[0]);

    let picked = fps(&points, 16, 0).expect("valid fps request");
    println!("fps picks from start 0: {picked:?}");

    // Four coarse subsets of 64 points, each its own FPS run.
    for (i, subset) in downsample_coarse(&points, 4, 1).expect("4 divides 256").iter().enumerate() {
        println!("coarse subset {i}: starts at {}, {} points", subset[0], subset.len());
    }
}
