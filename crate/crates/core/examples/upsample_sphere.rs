//! Train briefly on primitives, upsample a held-out sphere 4x and compare
//! against duplicating each point with small random jitter.

use spunet::geometry::{primitives, PointCloud};
use spunet::io::{sample_mesh, SampleMode};
use spunet::metrics::{duplicate_jitter, MetricReport};
use spunet::training::{TrainConfig, Trainer};

pub fn main() {
    let steps: u64 = std::env::var("SPUNET_STEPS").ok().and_then(|s| s.parse().ok()).unwrap_or(200);
    let sphere = primitives::icosphere(1.0, 3);
    let meshes = [sphere.clone(), primitives::torus(1.0, 0.4, 32, 16), primitives::cube(1.0)];
    let clouds: Vec<PointCloud> = meshes
        .iter()
        .enumerate()
        .map(|(i, m)| sample_mesh(m, 512, SampleMode::PoissonDisk, 10 + i as u64).expect("mesh has area"))
        .collect();
    let mut trainer = Trainer::new(TrainConfig::desk()).expect("valid config");
    let patches = trainer.make_patches(&clouds).expect("patches");
    trainer
        .fit(&patches, steps, |t, s| {
            if t.step % 50 == 0 {
                println!("{s}");
            }
            Ok(())
        })
        .expect("training");

    let held_out = sample_mesh(&sphere, 512, SampleMode::PoissonDisk, 99).expect("sphere");
    let gt = sample_mesh(&sphere, 2048, SampleMode::PoissonDisk, 100).expect("sphere");
    let dense = trainer.upsample(&held_out).expect("upsample");
    let jitter = duplicate_jitter(held_out.points(), 4, 0.02, 0);
    for (name, pts) in [("network", dense.points()), ("jitter", &jitter[..])] {
        let r = MetricReport::evaluate(pts, gt.points(), Some(&sphere), &[0.012], Some(held_out.len())).expect("metrics");
        println!(
            "{name:8} n={} cd={:.4} hd={:.4} p2f={:.4} uni@1.2%={:.3}",
            pts.len(),
            r.cd,
            r.hd,
            r.p2f_mean.unwrap_or(f64::NAN),
            r.uniformity[0].1
        );
    }
}
