use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Parse `x y z` lines; blank lines and `#` comments are skipped.
pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: no + 1,
            msg,
        };
        if fields.len() != 3 {
            return Err(err(format!("expected 3 coordinates, found {}", fields.len())));
        }
        let mut p = [0.0; 3];
        for (c, f) in p.iter_mut().zip(&fields) {
            *c = f
                .parse::<f64>()
                .map_err(|e| err(format!("bad coordinate '{f}': {e}")))?;
            if !c.is_finite() {
                return Err(err(format!("non-finite coordinate '{f}'")));
            }
        }
        points.push(p);
    }
    PointCloud::new(points).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text, path)
}

/// Shortest round-trip decimal for every coordinate.
pub fn xyz_string(points: &[Point3]) -> String {
    let mut s = String::with_capacity(points.len() * 64);
    for p in points {
        s.push_str(&format!("{:?} {:?} {:?}\n", p[0], p[1], p[2]));
    }
    s
}

pub fn write_xyz(path: &Path, points: &[Point3]) -> Result<()> {
    super::write_atomic(path, xyz_string(points).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_file() {
        let c = parse_xyz("0 0 0\n1 2 3", Path::new("t.xyz")).unwrap();
        assert_eq!(c.points(), &[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_xyz("# header\n\n1 1 1 # trailing\n", Path::new("t.xyz")).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn arity_error_cites_line() {
        let err = parse_xyz("0 0 0\n1 1 1\n1 2\n", Path::new("t.xyz")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_line(parse_xyz("0 0 x", Path::new("t.xyz"))) == Some(1));
    }

    fn err_line(r: Result<PointCloud>) -> Option<usize> {
        match r {
            Err(Error::Parse { line, .. }) => Some(line),
            _ => None,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let pts = vec![[0.1, -1e-300, 1.0 / 3.0], [f64::MAX, 5e-324, -0.0]];
        let back = parse_xyz(&xyz_string(&pts), Path::new("t.xyz")).unwrap();
        for (a, b) in pts.iter().zip(back.points()) {
            for c in 0..3 {
                assert_eq!(a[c].to_bits(), b[c].to_bits());
            }
        }
    }
}
