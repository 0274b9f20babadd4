use std::collections::BinaryHeap;

use super::{dist2, Point3};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static 3-D k-d tree over a borrowed point slice.
///
/// Queries return squared distances and are exact: results coincide with a
/// linear scan, including the lower-index tie-break.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(PartialEq)]
struct Hit(f64, usize);

impl Eq for Hit {}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        super::cmp_hit(&(self.0, self.1), &(other.0, other.1))
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point3]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        let mid = (start + end) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis])
        });
        let value = pts[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query` as `(squared distance, index)`,
    /// ascending, optionally skipping one index.
    pub fn nearest(&self, query: &Point3, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, exclude, &mut heap);
        let mut out: Vec<(f64, usize)> = heap.into_iter().map(|h| (h.0, h.1)).collect();
        out.sort_unstable_by(super::cmp_hit);
        out
    }

    /// Nearest point as `(squared distance, index)`.
    pub fn nearest_one(&self, query: &Point3) -> (f64, usize) {
        self.nearest(query, 1, None)[0]
    }

    fn search(
        &self,
        node: usize,
        q: &Point3,
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Hit>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let hit = Hit(dist2(q, &self.points[i]), i);
                    if heap.len() < k {
                        heap.push(hit);
                    } else if hit < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(hit);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, exclude, heap);
                // `<=` keeps equal-distance candidates with lower indices reachable.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().0 {
                    self.search(far, q, k, exclude, heap);
                }
            }
        }
    }

    /// Indices strictly within `radius` of `query`, ascending by index.
    pub fn within(&self, query: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.collect_within(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn collect_within(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => out.extend(
                self.order[start..end]
                    .iter()
                    .copied()
                    .filter(|&i| dist2(q, &self.points[i]) < r2),
            ),
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.collect_within(near, q, r2, out);
                if diff * diff < r2 {
                    self.collect_within(far, q, r2, out);
                }
            }
        }
    }
}
