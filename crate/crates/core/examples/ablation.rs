//! Each architectural toggle and loss weight changes the training trace.

use spunet::geometry::{primitives, Point3};
use spunet::io::{sample_mesh, SampleMode};
use spunet::training::{TrainConfig, Trainer};

fn trace(cfg: TrainConfig, patches: &[Vec<Point3>], steps: u64) -> Vec<f64> {
    let mut t = Trainer::new(cfg).expect("valid config");
    let mut out = Vec::new();
    t.fit(patches, steps, |_, s| {
        out.push(s.reconstruction);
        Ok(())
    })
    .expect("training");
    out
}

pub fn main() {
    let steps = 10;
    let base = TrainConfig::desk();
    let cloud = sample_mesh(&primitives::torus(1.0, 0.4, 32, 16), 512, SampleMode::PoissonDisk, 0).expect("torus");
    let patches = Trainer::new(base.clone()).unwrap().make_patches(&[cloud]).unwrap();
    let reference = trace(base.clone(), &patches, steps);

    let mut variants: Vec<(&str, TrainConfig)> = Vec::new();
    let mut v = base.clone();
    v.net.use_self_attention = false;
    variants.push(("no self-attention", v));
    let mut v = base.clone();
    v.net.use_learnable_grid = false;
    variants.push(("no learnable grid", v));
    let mut v = base.clone();
    v.net.use_hierarchical_folding = false;
    variants.push(("single folding block", v));
    let mut v = base.clone();
    v.weights.beta = 0.0;
    variants.push(("no uniform term", v));
    let mut v = base.clone();
    v.weights.gamma = 0.0;
    variants.push(("no self-projection", v));
    let mut v = base;
    v.weights.alpha = 0.0;
    variants.push(("no reconstruction", v));

    println!("reference final reconstruction {:.5}", reference.last().unwrap());
    for (name, cfg) in variants {
        let t = trace(cfg, &patches, steps);
        let diff = t.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{name:22} final {:.5}  max trace difference {diff:.3e}", t.last().unwrap());
    }
}
