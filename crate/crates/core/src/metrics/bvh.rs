use crate::geometry::{closest_point_on_triangle, dist2, Point3, TriangleMesh};

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn grow(&mut self, p: &Point3) {
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(p[a]);
            self.hi[a] = self.hi[a].max(p[a]);
        }
    }

    fn union(&mut self, o: &Aabb) {
        self.grow(&o.lo);
        self.grow(&o.hi);
    }

    /// Squared distance from `p` to the box; a lower bound for anything inside.
    #[allow(clippy::needless_range_loop)]
    fn dist2(&self, p: &Point3) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let v = if p[a] < self.lo[a] {
                self.lo[a] - p[a]
            } else if p[a] > self.hi[a] {
                p[a] - self.hi[a]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_FACES: usize = 4;

/// Bounding-volume hierarchy over mesh faces for exact closest-point queries.
#[derive(Debug, Clone)]
pub struct MeshBvh<'a> {
    mesh: &'a TriangleMesh,
    faces: Vec<usize>,
    nodes: Vec<Node>,
}

/// Squared distance from `p` to face `f`; the one routine used by both the
/// hierarchy and the linear scan.
pub fn face_dist2(mesh: &TriangleMesh, f: usize, p: &Point3) -> f64 {
    let [a, b, c] = mesh.triangle(f);
    dist2(p, &closest_point_on_triangle(p, &a, &b, &c))
}

impl<'a> MeshBvh<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let mut bvh = Self {
            mesh,
            faces: (0..mesh.faces.len()).collect(),
            nodes: Vec::new(),
        };
        if !bvh.faces.is_empty() {
            let centroids: Vec<Point3> = (0..mesh.faces.len())
                .map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    [
                        (a[0] + b[0] + c[0]) / 3.0,
                        (a[1] + b[1] + c[1]) / 3.0,
                        (a[2] + b[2] + c[2]) / 3.0,
                    ]
                })
                .collect();
            bvh.build(0, mesh.faces.len(), &centroids);
        }
        bvh
    }

    fn face_bounds(&self, start: usize, end: usize) -> Aabb {
        let mut b = Aabb::empty();
        for &f in &self.faces[start..end] {
            for p in self.mesh.triangle(f) {
                b.grow(&p);
            }
        }
        b
    }

    fn build(&mut self, start: usize, end: usize, centroids: &[Point3]) -> usize {
        let id = self.nodes.len();
        let bounds = self.face_bounds(start, end);
        if end - start <= LEAF_FACES {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let mut cb = Aabb::empty();
        for &f in &self.faces[start..end] {
            cb.grow(&centroids[f]);
        }
        let axis = (0..3)
            .max_by(|&a, &b| (cb.hi[a] - cb.lo[a]).total_cmp(&(cb.hi[b] - cb.lo[b])))
            .unwrap();
        let mid = (start + end) / 2;
        self.faces[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis])
        });
        self.nodes.push(Node::Leaf {
            bounds,
            start: 0,
            end: 0,
        });
        let left = self.build(start, mid, centroids);
        let right = self.build(mid, end, centroids);
        let mut merged = *self.nodes[left].bounds();
        merged.union(self.nodes[right].bounds());
        self.nodes[id] = Node::Inner {
            bounds: merged,
            left,
            right,
        };
        id
    }

    /// Squared distance from `p` to the closest point of the mesh.
    pub fn closest_dist2(&self, p: &Point3) -> f64 {
        let mut best = f64::INFINITY;
        if !self.nodes.is_empty() {
            self.search(0, p, &mut best);
        }
        best
    }

    fn search(&self, node: usize, p: &Point3, best: &mut f64) {
        match &self.nodes[node] {
            Node::Leaf { start, end, .. } => {
                for &f in &self.faces[*start..*end] {
                    *best = best.min(face_dist2(self.mesh, f, p));
                }
            }
            Node::Inner { left, right, .. } => {
                let dl = self.nodes[*left].bounds().dist2(p);
                let dr = self.nodes[*right].bounds().dist2(p);
                let (first, fd, second, sd) = if dl <= dr {
                    (*left, dl, *right, dr)
                } else {
                    (*right, dr, *left, dl)
                };
                // Slack covers rounding in the closest-point arithmetic, which
                // can land a hair outside the box.
                if fd <= *best * (1.0 + 1e-9) {
                    self.search(first, p, best);
                }
                if sd <= *best * (1.0 + 1e-9) {
                    self.search(second, p, best);
                }
            }
        }
    }
}
