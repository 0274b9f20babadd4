use std::path::Path;

use super::ply::fan_triangulate;
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

/// Parse `v` and `f` records. Face corners may carry `/vt/vn` suffixes, which
/// are ignored; negative indices count back from the latest vertex. Other
/// record types are skipped.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut vertices = Vec::new();
    let mut polygons = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("");
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let coords: Vec<f64> = words
                    .take(3)
                    .map(|w| w.parse().map_err(|_| err(line_no, format!("bad coordinate '{w}'"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(err(line_no, "vertex needs three coordinates".into()));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let poly = words
                    .map(|w| {
                        let head = w.split('/').next().unwrap_or("");
                        let idx: i64 = head
                            .parse()
                            .map_err(|_| err(line_no, format!("bad face index '{w}'")))?;
                        let resolved = if idx > 0 {
                            idx - 1
                        } else {
                            vertices.len() as i64 + idx
                        };
                        if idx == 0 || resolved < 0 {
                            return Err(err(line_no, format!("face index {idx} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if poly.len() < 3 {
                    return Err(err(line_no, "face needs at least three corners".into()));
                }
                polygons.push(poly);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, fan_triangulate(&polygons))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
vn 0 0 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn unit_cube() {
        let m = parse_obj(CUBE, Path::new("cube.obj")).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.faces.len(), 12);
        assert!((m.area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn quad_with_suffixes_is_fanned() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/1 3//1 -1\n";
        let m = parse_obj(text, Path::new("q.obj")).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn bad_records_cite_the_line() {
        let e = parse_obj("v 0 0 0\nv 1 x 0\n", Path::new("b.obj")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n", Path::new("b.obj")).is_err());
    }
}
