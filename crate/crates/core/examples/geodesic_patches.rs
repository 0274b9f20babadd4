//! Crop geodesic patches from a sphere sample and map one back to model space.

use spunet::geometry::{dist, geodesic_patches, primitives};
use spunet::io::{sample_mesh, SampleMode};

pub fn main() {
    let cloud = sample_mesh(&primitives::icosphere(1.0, 3), 2048, SampleMode::PoissonDisk, 0).expect("sphere has area");
    let patches = geodesic_patches(&cloud, 24, 256, 5).expect("valid patch request");

    let mut covered = vec![false; cloud.len()];
    for p in &patches {
        p.source_indices.iter().for_each(|&i| covered[i] = true);
    }
    let coverage = covered.iter().filter(|&&c| c).count() as f64 / cloud.len() as f64;
    println!("{} patches of {} points cover {:.1}% of the cloud", patches.len(), patches[0].len(), 100.0 * coverage);

    let first = &patches[0];
    let max_norm = first.points.iter().map(|p| dist(p, &[0.0; 3])).fold(0.0, f64::max);
    println!("patch 0: center {:.3?}, scale {:.4}, max norm after normalization {max_norm}", first.center, first.scale);
    let back = first.denormalized();
    let err = back
        .iter()
        .zip(&first.source_indices)
        .map(|(p, &i)| dist(p, &cloud.points()[i]))
        .fold(0.0, f64::max);
    println!("denormalization error: {err:e}");
}
