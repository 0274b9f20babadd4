//! Sample primitive meshes and round-trip the results through XYZ and PLY.

use spunet::geometry::primitives;
use spunet::io::{parse_ply, read_xyz, sample_mesh, write_ply, write_xyz, PlyFormat, SampleMode};
use spunet::metrics::uniformity_metric;

pub fn main() {
    let meshes = [
        ("sphere", primitives::icosphere(1.0, 3)),
        ("torus", primitives::torus(1.0, 0.4, 32, 16)),
        ("cube", primitives::cube(1.0)),
    ];
    let dir = std::env::temp_dir().join(format!("spunet-sampling-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    for (name, mesh) in &meshes {
        let poisson = sample_mesh(mesh, 512, SampleMode::PoissonDisk, 1).expect("mesh has area");
        let area = sample_mesh(mesh, 512, SampleMode::AreaWeighted, 1).expect("mesh has area");
        let uni = |pts: &[[f64; 3]]| {
            let unit = spunet::geometry::normalize(pts).expect("non-degenerate").points;
            uniformity_metric(&unit, &[0.012]).expect("valid p")[0].1
        };
        println!(
            "{name:6}: uniformity poisson {:.3} vs area-weighted {:.3}",
            uni(poisson.points()),
            uni(area.points())
        );
        let path = dir.join(format!("{name}.xyz"));
        write_xyz(&path, poisson.points()).expect("write xyz");
        assert_eq!(read_xyz(&path).expect("read xyz"), poisson);
    }
    let mesh = &meshes[0].1;
    let binary = write_ply(&mesh.vertices, &mesh.faces, PlyFormat::BinaryLittleEndian);
    let ascii = write_ply(&mesh.vertices, &mesh.faces, PlyFormat::Ascii);
    let path = std::path::Path::new("sphere.ply");
    assert_eq!(parse_ply(&binary, path).unwrap(), parse_ply(&ascii, path).unwrap());
    println!("binary PLY {} bytes, ASCII PLY {} bytes, same content", binary.len(), ascii.len());
    std::fs::remove_dir_all(&dir).ok();
}
