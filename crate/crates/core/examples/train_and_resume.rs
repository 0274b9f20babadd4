//! Train on three primitive shapes, checkpoint halfway, and show that the
//! resumed run reproduces the uninterrupted one exactly.

use spunet::geometry::{primitives, PointCloud};
use spunet::io::{sample_mesh, SampleMode};
use spunet::training::{load_checkpoint, save_checkpoint, TrainConfig, Trainer};

pub fn main() {
    let clouds: Vec<PointCloud> = [primitives::icosphere(1.0, 3), primitives::torus(1.0, 0.4, 32, 16), primitives::cube(1.0)]
        .iter()
        .enumerate()
        .map(|(i, m)| sample_mesh(m, 512, SampleMode::PoissonDisk, i as u64).expect("mesh has area"))
        .collect();
    let cfg = TrainConfig {
        seed: 3,
        ..TrainConfig::desk()
    };
    let mut full = Trainer::new(cfg.clone()).expect("valid config");
    let patches = full.make_patches(&clouds).expect("patches");
    println!("{} training patches, {} steps per epoch", patches.len(), full.total_steps(patches.len()) / cfg.epochs as u64);

    let mut straight = Vec::new();
    full.fit(&patches, 20, |_, s| {
        println!("{s}");
        straight.push(s.total);
        Ok(())
    })
    .expect("training");

    let path = std::env::temp_dir().join(format!("spunet-example-{}.ckpt", std::process::id()));
    let mut first = Trainer::new(cfg).expect("valid config");
    let mut resumed = Vec::new();
    first.fit(&patches, 10, |_, s| {
        resumed.push(s.total);
        Ok(())
    })
    .expect("training");
    save_checkpoint(&first, &path).expect("save");
    let mut second = load_checkpoint(&path).expect("load");
    second
        .fit(&patches, 20, |_, s| {
            resumed.push(s.total);
            Ok(())
        })
        .expect("training");
    std::fs::remove_file(&path).ok();
    assert_eq!(straight, resumed);
    println!("resumed run matches the uninterrupted run over {} steps", resumed.len());
}
