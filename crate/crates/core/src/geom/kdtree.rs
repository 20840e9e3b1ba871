use rayon::prelude::*;

use super::{dist2, Point3};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Immutable k-d tree over a point set. Every query is exact: results are
/// identical to exhaustive search, with distance ties resolved toward the
/// lowest point index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn new(points: &[Point3]) -> Self {
        let mut index = SpatialIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
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
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap();
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            pts[i][axis].total_cmp(&pts[j][axis]).then(i.cmp(&j))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// The `k` nearest points to `query`, ascending by distance.
    pub fn knn(&self, query: Point3, k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        if k == 0 || k > self.points.len() {
            return Err(Error::TooFew {
                requested: k,
                available: self.points.len(),
            });
        }
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.knn_visit(0, query, k, &mut best);
        Ok(best.into_iter().map(|(d2, i)| (i, d2.sqrt())).unzip())
    }

    fn knn_visit(&self, node: usize, q: Point3, k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = (dist2(self.points[i], q), i);
                    if best.len() == k {
                        let worst = best[k - 1];
                        if cand.0 > worst.0 || (cand.0 == worst.0 && cand.1 > worst.1) {
                            continue;
                        }
                    }
                    let pos = best.partition_point(|&(d, j)| d < cand.0 || (d == cand.0 && j < cand.1));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_visit(near, q, k, best);
                if best.len() < k || diff * diff <= best[k - 1].0 {
                    self.knn_visit(far, q, k, best);
                }
            }
        }
    }

    /// Nearest point and its distance. Panics on an empty index.
    pub fn nearest(&self, query: Point3) -> (usize, f64) {
        let (i, d) = self.knn(query, 1).expect("nearest on empty index");
        (i[0], d[0])
    }

    /// Indices of all points with distance `<= radius`, ascending by index.
    pub fn within_radius(&self, query: Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_visit(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_visit(&self, node: usize, q: Point3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(self.order[start..end].iter().copied().filter(|&i| dist2(self.points[i], q) <= r2));
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_visit(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_visit(far, q, r2, out);
                }
            }
        }
    }

    /// Parallel batch of k-NN queries; output order follows `queries`.
    pub fn knn_batch(&self, queries: &[Point3], k: usize) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
        queries.par_iter().map(|&q| self.knn(q, k)).collect()
    }

    /// Distance from each query to its nearest indexed point.
    pub fn nearest_distances(&self, queries: &[Point3]) -> Vec<f64> {
        queries.par_iter().map(|&q| self.nearest(q).1).collect()
    }
}
