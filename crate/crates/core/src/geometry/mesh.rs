use super::{cross, dot, sub, Point3};
use crate::error::{invalid, Result};

/// Indexed triangle mesh with every face of nonzero area.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates indices and drops zero-area faces.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(invalid(format!("face {f:?} references a vertex beyond {n}")));
        }
        let mut mesh = Self { vertices, faces };
        mesh.faces.retain(|f| {
            let [a, b, c] = mesh_triangle(&mesh.vertices, f);
            triangle_area(&a, &b, &c) > 0.0
        });
        Ok(mesh)
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        mesh_triangle(&self.vertices, &self.faces[face])
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        triangle_area(&a, &b, &c)
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }
}

fn mesh_triangle(vertices: &[Point3], f: &[usize; 3]) -> [Point3; 3] {
    [vertices[f[0]], vertices[f[1]], vertices[f[2]]]
}

pub(crate) fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let n = cross(&sub(b, a), &sub(c, a));
    0.5 * dot(&n, &n).sqrt()
}

/// Closest point on triangle `abc` to `p` (Voronoi-region case analysis).
pub(crate) fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return lerp(a, &ab, v);
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return lerp(a, &ac, w);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return lerp(b, &sub(c, b), w);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [
        a[0] + ab[0] * v + ac[0] * w,
        a[1] + ab[1] * v + ac[1] * w,
        a[2] + ab[2] * v + ac[2] * w,
    ]
}

fn lerp(origin: &Point3, dir: &Point3, t: f64) -> Point3 {
    [
        origin[0] + dir[0] * t,
        origin[1] + dir[1] * t,
        origin[2] + dir[2] * t,
    ]
}

/// Closed test surfaces used by the examples and the end-to-end checks.
pub mod primitives {
    use std::collections::HashMap;
    use std::f64::consts::PI;

    use super::TriangleMesh;
    use crate::geometry::Point3;

    /// Subdivided icosahedron projected onto a sphere of `radius`.
    pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
        let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point3> = vec![
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        let project = |p: Point3| {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            [p[0] / n * radius, p[1] / n * radius, p[2] / n * radius]
        };
        for v in &mut vertices {
            *v = project(*v);
        }
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            for f in &faces {
                let mut mid = [0usize; 3];
                for e in 0..3 {
                    let (a, b) = (f[e], f[(e + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    mid[e] = *midpoints.entry(key).or_insert_with(|| {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        vertices.push(project([
                            (pa[0] + pb[0]) / 2.0,
                            (pa[1] + pb[1]) / 2.0,
                            (pa[2] + pb[2]) / 2.0,
                        ]));
                        vertices.len() - 1
                    });
                }
                next.push([f[0], mid[0], mid[2]]);
                next.push([f[1], mid[1], mid[0]]);
                next.push([f[2], mid[2], mid[1]]);
                next.push(mid);
            }
            faces = next;
        }
        TriangleMesh { vertices, faces }
    }

    /// Torus around the z axis.
    pub fn torus(major: f64, minor: f64, rings: usize, sides: usize) -> TriangleMesh {
        let mut vertices = Vec::with_capacity(rings * sides);
        for i in 0..rings {
            let u = 2.0 * PI * i as f64 / rings as f64;
            for j in 0..sides {
                let v = 2.0 * PI * j as f64 / sides as f64;
                let w = major + minor * v.cos();
                vertices.push([w * u.cos(), w * u.sin(), minor * v.sin()]);
            }
        }
        let id = |i: usize, j: usize| (i % rings) * sides + (j % sides);
        let mut faces = Vec::with_capacity(2 * rings * sides);
        for i in 0..rings {
            for j in 0..sides {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        TriangleMesh { vertices, faces }
    }

    /// Axis-aligned cube `[-half, half]^3`, two triangles per side.
    pub fn cube(half: f64) -> TriangleMesh {
        let h = half;
        let vertices = vec![
            [-h, -h, -h],
            [h, -h, -h],
            [h, h, -h],
            [-h, h, -h],
            [-h, -h, h],
            [h, -h, h],
            [h, h, h],
            [-h, h, h],
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [0, 4, 7],
            [0, 7, 3],
        ];
        TriangleMesh { vertices, faces }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;

    #[test]
    fn degenerate_faces_are_dropped() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]];
        let m = TriangleMesh::new(v.clone(), vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
        assert!(TriangleMesh::new(v, vec![[0, 1, 9]]).is_err());
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = ([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let q = closest_point_on_triangle(&[0.25, 0.25, 2.0], &a, &b, &c);
        assert_eq!(q, [0.25, 0.25, 0.0]);
        let q = closest_point_on_triangle(&[-1.0, -1.0, 0.0], &a, &b, &c);
        assert_eq!(q, a);
        let q = closest_point_on_triangle(&[0.5, -1.0, 0.0], &a, &b, &c);
        assert_eq!(q, [0.5, 0.0, 0.0]);
        let q = closest_point_on_triangle(&[1.0, 1.0, 0.0], &a, &b, &c);
        assert!(dist(&q, &[0.5, 0.5, 0.0]) < 1e-15);
    }

    #[test]
    fn primitive_areas() {
        let s = primitives::icosphere(1.0, 4);
        let area = s.area();
        assert!((area - 4.0 * std::f64::consts::PI).abs() / area < 0.01);
        assert!((primitives::cube(0.5).area() - 6.0).abs() < 1e-12);
        let t = primitives::torus(1.0, 0.3, 48, 24);
        let exact = 4.0 * std::f64::consts::PI.powi(2) * 0.3;
        assert!((t.area() - exact).abs() / exact < 0.02);
    }
}
