//! File formats, mesh sampling and run configuration.

mod config;
mod obj;
mod ply;
mod sample;
mod xyz;

pub use config::RunConfig;
pub use obj::{parse_obj, read_obj};
pub use ply::{parse_ply, read_ply, write_ply, PlyData, PlyFormat};
pub use sample::{sample_mesh, SampleMode};
pub use xyz::{parse_xyz, read_xyz, write_xyz, xyz_string};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, TriangleMesh};

/// Write via a sibling temp file and rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Read a point cloud from `.xyz`, `.ply` or `.obj` (vertices only).
pub fn read_points(path: &Path) -> Result<PointCloud> {
    match extension(path).as_str() {
        "ply" => read_ply(path)?.into_cloud(),
        "obj" => PointCloud::new(read_obj(path)?.vertices),
        _ => read_xyz(path),
    }
}

/// Read a triangle mesh from `.obj` or `.ply`.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    match extension(path).as_str() {
        "obj" => read_obj(path),
        "ply" => read_ply(path)?.into_mesh(),
        other => Err(Error::Unsupported(format!("mesh format '{other}'"))),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default()
}

/// Load every `.xyz`, `.ply` and `.obj` file in `dir`, in file-name order.
///
/// Files with faces are treated as meshes and Poisson-disk sampled to
/// `mesh_points` points; the sampling seed is keyed by `seed` and the file's
/// position in the listing.
pub fn load_dataset(dir: &Path, mesh_points: usize, seed: u64) -> Result<Vec<(std::path::PathBuf, PointCloud)>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(extension(p).as_str(), "xyz" | "ply" | "obj"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .xyz, .ply or .obj files in {}",
            dir.display()
        )));
    }
    files
        .into_iter()
        .enumerate()
        .map(|(i, path)| {
            let sample_seed = crate::rng::derive(seed, &[crate::rng::tag::SAMPLING, i as u64]);
            let cloud = match extension(&path).as_str() {
                "xyz" => read_xyz(&path)?,
                "obj" => sample_mesh(&read_obj(&path)?, mesh_points, SampleMode::PoissonDisk, sample_seed)?,
                _ => {
                    let data = read_ply(&path)?;
                    if data.faces.is_empty() {
                        data.into_cloud()?
                    } else {
                        sample_mesh(&data.into_mesh()?, mesh_points, SampleMode::PoissonDisk, sample_seed)?
                    }
                }
            };
            Ok((path, cloud))
        })
        .collect()
}
