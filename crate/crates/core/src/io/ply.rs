use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Vertices and (untriangulated) faces of a PLY file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyData {
    pub vertices: Vec<Point3>,
    pub faces: Vec<Vec<usize>>,
}

impl PlyData {
    pub fn into_cloud(self) -> Result<PointCloud> {
        PointCloud::new(self.vertices)
    }

    /// Polygons are fan-triangulated around their first vertex.
    pub fn into_mesh(self) -> Result<TriangleMesh> {
        let faces = fan_triangulate(&self.faces);
        TriangleMesh::new(self.vertices, faces)
    }
}

pub(crate) fn fan_triangulate(polygons: &[Vec<usize>]) -> Vec<[usize; 3]> {
    polygons
        .iter()
        .flat_map(|p| (1..p.len().saturating_sub(1)).map(move |i| [p[0], p[i], p[i + 1]]))
        .collect()
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_ply(path: &Path) -> Result<PlyData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, path)
}

/// Parse ASCII or binary little-endian PLY with `x y z` vertex properties and
/// an optional face element carrying a `vertex_indices` list.
pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<PlyData> {
    let (format, elements, body_start) = parse_header(bytes, path)?;
    let vertex = elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::Unsupported("PLY without a vertex element".into()))?;
    let xyz = ["x", "y", "z"].map(|axis| {
        vertex.props.iter().position(|p| matches!(p, Property::Scalar { name, .. } if name == axis))
    });
    let [Some(xi), Some(yi), Some(zi)] = xyz else {
        return Err(Error::Unsupported("PLY vertex element lacks scalar x/y/z".into()));
    };
    if let Some(face) = elements.iter().find(|e| e.name == "face") {
        let has_indices = face.props.iter().any(|p| {
            matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
        });
        if !has_indices {
            return Err(Error::Unsupported("PLY face element without a vertex_indices list".into()));
        }
    }

    let mut reader: Box<dyn RowReader> = match format {
        PlyFormat::Ascii => Box::new(AsciiRows::new(&bytes[body_start..], path)?),
        PlyFormat::BinaryLittleEndian => Box::new(BinaryRows {
            data: &bytes[body_start..],
            pos: 0,
            path,
        }),
    };
    let mut data = PlyData {
        vertices: Vec::new(),
        faces: Vec::new(),
    };
    for element in &elements {
        for _ in 0..element.count {
            let mut scalars = Vec::with_capacity(element.props.len());
            let mut lists = Vec::new();
            reader.begin_row()?;
            for prop in &element.props {
                match prop {
                    Property::Scalar { ty, .. } => scalars.push(Some(reader.scalar(*ty)?)),
                    Property::List { name, count, item } => {
                        let n = reader.scalar(*count)?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(parse_err(path, reader.line(), "bad list length"));
                        }
                        let items = (0..n as usize)
                            .map(|_| reader.scalar(*item))
                            .collect::<Result<Vec<_>>>()?;
                        scalars.push(None);
                        lists.push((name.as_str(), items));
                    }
                }
            }
            reader.end_row()?;
            if element.name == "vertex" {
                let get = |i: usize| scalars[i].unwrap_or(f64::NAN);
                data.vertices.push([get(xi), get(yi), get(zi)]);
            } else if element.name == "face" {
                if let Some((_, items)) = lists
                    .into_iter()
                    .find(|(n, _)| *n == "vertex_indices" || *n == "vertex_index")
                {
                    let poly = items
                        .into_iter()
                        .map(|v| {
                            if v >= 0.0 && v.fract() == 0.0 {
                                Ok(v as usize)
                            } else {
                                Err(parse_err(path, reader.line(), format!("bad vertex index {v}")))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    data.faces.push(poly);
                }
            }
        }
    }
    Ok(data)
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<(PlyFormat, Vec<Element>, usize)> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_err(path, line_no + 1, "unterminated PLY header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| parse_err(path, line_no + 1, "header is not UTF-8"))?
            .trim_end_matches('\r')
            .trim();
        pos += end + 1;
        line_no += 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["ply"] if line_no == 1 => {}
            _ if line_no == 1 => return Err(parse_err(path, 1, "missing 'ply' magic")),
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, _] => {
                return Err(Error::Unsupported(format!("PLY format {other}")));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(path, line_no, "bad element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(parse_err(path, line_no, "unknown list property type"));
                };
                if matches!(count, Scalar::F32 | Scalar::F64) {
                    return Err(Error::Unsupported("floating-point list lengths".into()));
                }
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, line_no, "property before element"))?
                    .props
                    .push(Property::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| parse_err(path, line_no, format!("unknown property type {ty}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, line_no, "property before element"))?
                    .props
                    .push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
            }
            ["end_header"] => break,
            _ => return Err(parse_err(path, line_no, format!("unrecognized header line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| parse_err(path, line_no, "missing format line"))?;
    Ok((format, elements, pos))
}

trait RowReader {
    fn begin_row(&mut self) -> Result<()>;
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
    fn end_row(&mut self) -> Result<()>;
    fn line(&self) -> usize;
}

struct AsciiRows<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    row: usize,
    col: usize,
    path: &'a Path,
}

impl<'a> AsciiRows<'a> {
    fn new(body: &'a [u8], path: &'a Path) -> Result<Self> {
        let text = std::str::from_utf8(body).map_err(|_| parse_err(path, 0, "ASCII body is not UTF-8"))?;
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, w)| !w.is_empty())
            .collect();
        Ok(Self {
            lines,
            row: 0,
            col: 0,
            path,
        })
    }
}

impl RowReader for AsciiRows<'_> {
    fn begin_row(&mut self) -> Result<()> {
        if self.row >= self.lines.len() {
            return Err(parse_err(self.path, 0, "PLY body ended early"));
        }
        self.col = 0;
        Ok(())
    }

    fn scalar(&mut self, _ty: Scalar) -> Result<f64> {
        let (_, words) = &self.lines[self.row];
        let w = words
            .get(self.col)
            .ok_or_else(|| parse_err(self.path, self.line(), "row has too few values"))?;
        self.col += 1;
        w.parse()
            .map_err(|_| parse_err(self.path, self.line(), format!("bad number '{w}'")))
    }

    fn end_row(&mut self) -> Result<()> {
        if self.col != self.lines[self.row].1.len() {
            return Err(parse_err(self.path, self.line(), "row has extra values"));
        }
        self.row += 1;
        Ok(())
    }

    /// Line number within the body (1-based), for diagnostics.
    fn line(&self) -> usize {
        self.lines.get(self.row).map_or(0, |l| l.0 + 1)
    }
}

struct BinaryRows<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl RowReader for BinaryRows<'_> {
    fn begin_row(&mut self) -> Result<()> {
        Ok(())
    }

    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        if self.pos + n > self.data.len() {
            return Err(parse_err(self.path, 0, "binary PLY body ended early"));
        }
        let v = ty.read_le(&self.data[self.pos..self.pos + n]);
        self.pos += n;
        Ok(v)
    }

    fn end_row(&mut self) -> Result<()> {
        Ok(())
    }

    fn line(&self) -> usize {
        0
    }
}

/// Serialize vertices (as doubles) and triangles (uchar count, int indices).
pub fn write_ply(points: &[Point3], faces: &[[usize; 3]], format: PlyFormat) -> Vec<u8> {
    let mut out = String::from("ply\n");
    out.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    out.push_str(&format!(
        "element vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        points.len()
    ));
    if !faces.is_empty() {
        out.push_str(&format!(
            "element face {}\nproperty list uchar int vertex_indices\n",
            faces.len()
        ));
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut body = String::new();
            for p in points {
                body.push_str(&format!("{:?} {:?} {:?}\n", p[0], p[1], p[2]));
            }
            for f in faces {
                body.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
            }
            bytes.extend_from_slice(body.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            for p in points {
                for c in p {
                    bytes.extend_from_slice(&c.to_le_bytes());
                }
            }
            for f in faces {
                bytes.push(3);
                for &i in f {
                    bytes.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_matches_ascii() {
        let pts = vec![[0.1, 0.2, 0.3], [-1.0, 2.5, 1e-7], [3.0, -4.0, 0.0], [1.0, 1.0, 1.0]];
        let faces = vec![[0, 1, 2], [1, 2, 3]];
        let p = Path::new("t.ply");
        let a = parse_ply(&write_ply(&pts, &faces, PlyFormat::Ascii), p).unwrap();
        let b = parse_ply(&write_ply(&pts, &faces, PlyFormat::BinaryLittleEndian), p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.vertices, pts);
        assert_eq!(a.into_mesh().unwrap().faces, faces);
    }

    #[test]
    fn extra_properties_and_quads() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 4\nproperty float x\n\
                    property float y\nproperty float z\nproperty uchar red\nelement face 1\n\
                    property list uchar int vertex_indices\nend_header\n\
                    0 0 0 255\n1 0 0 0\n1 1 0 0\n0 1 0 0\n4 0 1 2 3\n";
        let d = parse_ply(text.as_bytes(), Path::new("q.ply")).unwrap();
        assert_eq!(d.vertices.len(), 4);
        let m = d.into_mesh().unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn unsupported_layouts_are_explicit() {
        let be = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(parse_ply(be.as_bytes(), Path::new("b.ply")), Err(Error::Unsupported(_))));
        let no_xyz = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float u\nend_header\n0\n";
        assert!(matches!(parse_ply(no_xyz.as_bytes(), Path::new("b.ply")), Err(Error::Unsupported(_))));
        let bad_face = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
                        property float z\nelement face 1\nproperty int a\nend_header\n0 0 0\n1\n";
        assert!(matches!(parse_ply(bad_face.as_bytes(), Path::new("b.ply")), Err(Error::Unsupported(_))));
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let mut bytes = write_ply(&[[1.0, 2.0, 3.0]], &[], PlyFormat::BinaryLittleEndian);
        bytes.truncate(bytes.len() - 4);
        assert!(parse_ply(&bytes, Path::new("t.ply")).is_err());
    }
}
