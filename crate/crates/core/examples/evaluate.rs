//! The evaluation suite on a jittered copy of a sphere sample.

use spunet::geometry::primitives;
use spunet::io::{sample_mesh, SampleMode};
use spunet::metrics::{duplicate_jitter, MetricReport};

pub fn main() {
    let sphere = primitives::icosphere(1.0, 3);
    let gt = sample_mesh(&sphere, 2048, SampleMode::PoissonDisk, 1).expect("sphere");
    let sparse = sample_mesh(&sphere, 512, SampleMode::PoissonDisk, 2).expect("sphere");
    let pred = duplicate_jitter(sparse.points(), 4, 0.02, 3);
    let report = MetricReport::evaluate(&pred, gt.points(), Some(&sphere), &[0.004, 0.008, 0.012], Some(sparse.len()))
        .expect("metrics");
    println!("values x1e3:");
    for (name, value) in report.entries() {
        let shown = if name.starts_with("n_") { value } else { value * 1e3 };
        println!("  {name:10} {shown:.4}");
    }
    println!("{}", report.to_json());
    let perfect = MetricReport::evaluate(gt.points(), gt.points(), Some(&sphere), &[0.012], None).expect("metrics");
    assert_eq!((perfect.cd, perfect.hd), (0.0, 0.0));
}
