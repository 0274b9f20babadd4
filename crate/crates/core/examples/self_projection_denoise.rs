//! Gradient descent on the self-projection term alone pulls noisy points
//! back toward the sphere they were sampled from.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spunet::autodiff::{Graph, Tensor};
use spunet::geometry::{primitives, Point3};
use spunet::io::{sample_mesh, SampleMode};
use spunet::loss::{self_projection_term, SelfProjectionConfig};

fn off_sphere(points: &[Point3]) -> f64 {
    points.iter().map(|p| (p.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs()).sum::<f64>() / points.len() as f64
}

pub fn main() {
    let clean: Vec<Point3> = sample_mesh(&primitives::icosphere(1.0, 4), 512, SampleMode::PoissonDisk, 3)
        .expect("sphere")
        .into_points()
        .into_iter()
        .map(|p| {
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            p.map(|x| x / n)
        })
        .collect();
    let noise = Normal::new(0.0, 0.05).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut q: Vec<Point3> = clean.iter().map(|p| p.map(|x| x + noise.sample(&mut rng))).collect();
    let before = off_sphere(&q);
    let step = 0.2 * q.len() as f64;
    for i in 0..50 {
        let mut g = Graph::new();
        let v = g.input(Tensor::from_rows(&q));
        let loss = self_projection_term(&mut g, v, &SelfProjectionConfig::default()).expect("k < n");
        g.backward(loss).expect("scalar loss");
        let grad = g.grad(v).expect("input gradient").to_vec();
        for (p, d) in q.iter_mut().zip(grad.chunks_exact(3)) {
            for c in 0..3 {
                p[c] -= step * d[c];
            }
        }
        if i % 10 == 0 {
            println!("step {i:2}: loss {:.6}, mean distance to sphere {:.5}", g.item(loss), off_sphere(&q));
        }
    }
    let after = off_sphere(&q);
    println!("mean distance to sphere {before:.5} -> {after:.5} ({:.1}% lower)", 100.0 * (1.0 - after / before));
}
