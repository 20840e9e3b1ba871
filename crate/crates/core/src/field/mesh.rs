use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{self, Point3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for t in &triangles {
            if let Some(&bad) = t.iter().find(|&&i| i >= n) {
                return Err(Error::IndexOutOfRange { index: bad, len: n });
            }
        }
        if let Some(i) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Twice the signed-area vector of triangle `t`.
    pub fn area_normal(&self, t: usize) -> Point3 {
        let [a, b, c] = self.corners(t);
        geom::cross(geom::sub(b, a), geom::sub(c, a))
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * geom::norm(self.area_normal(t))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Enclosed volume; positive when triangles wind counter-clockwise seen
    /// from outside.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                geom::dot(a, geom::cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Undirected edges and the number of triangles using each.
    pub fn edge_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut counts = BTreeMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Edges not shared by exactly two triangles.
    pub fn non_manifold_edges(&self) -> Vec<(usize, usize)> {
        self.edge_counts()
            .into_iter()
            .filter(|&(_, c)| c != 2)
            .map(|(e, _)| e)
            .collect()
    }

    pub fn check_watertight(&self) -> Result<()> {
        let bad = self.non_manifold_edges();
        if self.triangles.is_empty() || !bad.is_empty() {
            return Err(Error::NotWatertight(bad));
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        let used: std::collections::BTreeSet<usize> = self.triangles.iter().flatten().copied().collect();
        used.len() as i64 - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    pub fn transformed(&self, f: impl Fn(Point3) -> Point3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Area-weighted uniform samples on the surface, deterministic per seed.
    pub fn sample_surface(&self, count: usize, seed: u64) -> Result<Vec<Point3>> {
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            total += self.area(t);
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::invalid("mesh has no surface area to sample"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                let r = rng.random::<f64>() * total;
                let t = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
                let [a, b, c] = self.corners(t);
                let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                geom::add(a, geom::add(geom::scale(geom::sub(b, a), u), geom::scale(geom::sub(c, a), v)))
            })
            .collect())
    }
}
