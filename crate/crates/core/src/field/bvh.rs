use super::sdf::closest_point_on_triangle;
use super::TriangleMesh;
use crate::geom::{self, Point3};

const LEAF_TRIANGLES: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }

    fn grow(&mut self, p: Point3) {
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(p[a]);
            self.hi[a] = self.hi[a].max(p[a]);
        }
    }

    fn dist2(&self, p: Point3) -> f64 {
        (0..3)
            .map(|a| {
                let d = (self.lo[a] - p[a]).max(0.0).max(p[a] - self.hi[a]);
                d * d
            })
            .sum()
    }

    fn hit_by_ray(&self, origin: Point3, inv_dir: Point3) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let ta = (self.lo[a] - origin[a]) * inv_dir[a];
            let tb = (self.hi[a] - origin[a]) * inv_dir[a];
            let (near, far) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            // NaN from 0 * inf leaves the slab unconstrained
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
        }
        t0 <= t1 * (1.0 + 1e-12) + 1e-12
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // leaf: triangles[start..end]; inner: children at left/right
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Bounding volume hierarchy over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

/// A ray-triangle intersection. `near_edge` is set when the hit lies within
/// the edge tolerance of a triangle boundary, where parity is unreliable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
    pub near_edge: bool,
}

impl Bvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let centroids: Vec<Point3> = (0..mesh.triangles.len())
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                geom::scale(geom::add(a, geom::add(b, c)), 1.0 / 3.0)
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::new(),
            order: (0..mesh.triangles.len()).collect(),
        };
        if !centroids.is_empty() {
            bvh.build(mesh, &centroids, 0, centroids.len());
        }
        bvh
    }

    fn build(&mut self, mesh: &TriangleMesh, centroids: &[Point3], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in mesh.corners(t) {
                bounds.grow(p);
            }
            cbounds.grow(centroids[t]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            start,
            end,
            children: None,
        });
        if end - start <= LEAF_TRIANGLES {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| {
                (cbounds.hi[a] - cbounds.lo[a])
                    .total_cmp(&(cbounds.hi[b] - cbounds.lo[b]))
                    .then(b.cmp(&a))
            })
            .unwrap();
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
            centroids[x][axis].total_cmp(&centroids[y][axis]).then(x.cmp(&y))
        });
        let left = self.build(mesh, centroids, start, mid);
        let right = self.build(mesh, centroids, mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    /// Squared distance to the closest triangle and that triangle's index;
    /// ties go to the lowest triangle index.
    pub fn closest(&self, mesh: &TriangleMesh, p: Point3) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds.dist2(p) > best.0 {
                continue;
            }
            match node.children {
                None => {
                    for &t in &self.order[node.start..node.end] {
                        let [a, b, c] = mesh.corners(t);
                        let d2 = geom::dist2(p, closest_point_on_triangle(p, a, b, c));
                        if d2 < best.0 || (d2 == best.0 && t < best.1) {
                            best = (d2, t);
                        }
                    }
                }
                Some((l, r)) => {
                    let (dl, dr) = (self.nodes[l].bounds.dist2(p), self.nodes[r].bounds.dist2(p));
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        Some(best)
    }

    /// All forward intersections of the ray `origin + t * dir`, `t > 0`.
    pub fn ray_hits(&self, mesh: &TriangleMesh, origin: Point3, dir: Point3, edge_tol: f64) -> Vec<RayHit> {
        let mut hits = Vec::new();
        if self.nodes.is_empty() {
            return hits;
        }
        let inv = [1.0 / dir[0], 1.0 / dir[1], 1.0 / dir[2]];
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bounds.hit_by_ray(origin, inv) {
                continue;
            }
            match node.children {
                None => {
                    for &t in &self.order[node.start..node.end] {
                        if let Some(h) = ray_triangle(origin, dir, mesh.corners(t), edge_tol) {
                            hits.push(RayHit { triangle: t, ..h });
                        }
                    }
                }
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.triangle.cmp(&b.triangle)));
        hits
    }
}

/// Moller-Trumbore intersection.
fn ray_triangle(origin: Point3, dir: Point3, [a, b, c]: [Point3; 3], edge_tol: f64) -> Option<RayHit> {
    let e1 = geom::sub(b, a);
    let e2 = geom::sub(c, a);
    let pvec = geom::cross(dir, e2);
    let det = geom::dot(e1, pvec);
    let scale = geom::norm(e1) * geom::norm(e2) * geom::norm(dir);
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = geom::sub(origin, a);
    let u = geom::dot(tvec, pvec) * inv_det;
    let qvec = geom::cross(tvec, e1);
    let v = geom::dot(dir, qvec) * inv_det;
    let w = 1.0 - u - v;
    if u < -edge_tol || v < -edge_tol || w < -edge_tol {
        return None;
    }
    let t = geom::dot(e2, qvec) * inv_det;
    if t <= 0.0 {
        return None;
    }
    Some(RayHit {
        t,
        triangle: usize::MAX,
        near_edge: u.min(v).min(w) <= edge_tol,
    })
}
