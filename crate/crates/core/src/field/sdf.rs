use rayon::prelude::*;

use super::{Bvh, GridSpec, SdfVolume, TriangleMesh};
use crate::error::{Error, Result};
use crate::geom::{self, Point3};

/// Barycentric tolerance below which a ray crossing counts as touching an
/// edge or vertex.
const EDGE_TOLERANCE: f64 = 1e-9;

/// Ray directions tried, in order, when a parity ray grazes an edge.
const FALLBACK_DIRECTIONS: [Point3; 4] = [
    [0.577_215_664_9, 0.618_033_988_7, 0.533_751_336_1],
    [-0.412_454_033_6, 0.707_106_781_2, 0.574_030_160_3],
    [0.302_775_637_7, -0.543_689_012_7, 0.782_547_174_4],
    [-0.693_147_180_6, -0.301_029_995_7, -0.654_653_670_7],
];

/// Closest point to `p` on triangle `abc` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    use geom::{add, dot, scale, sub};
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return add(a, scale(ab, d1 / (d1 - d3)));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return add(a, scale(ac, d2 / (d2 - d6)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return add(b, scale(sub(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6))));
    }
    let denom = 1.0 / (va + vb + vc);
    add(a, add(scale(ab, vb * denom), scale(ac, vc * denom)))
}

/// A watertight mesh prepared for signed distance queries.
#[derive(Debug, Clone)]
pub struct MeshSdf {
    mesh: TriangleMesh,
    bvh: Bvh,
}

impl MeshSdf {
    pub fn new(mesh: TriangleMesh) -> Result<Self> {
        mesh.check_watertight()?;
        let bvh = Bvh::new(&mesh);
        Ok(Self { mesh, bvh })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn unsigned_distance(&self, p: Point3) -> f64 {
        self.bvh.closest(&self.mesh, p).map_or(f64::INFINITY, |(d2, _)| d2.sqrt())
    }

    /// Ray-parity inside test. Directions whose crossings graze an edge are
    /// skipped; if every direction grazes, the majority vote wins.
    pub fn is_inside(&self, p: Point3) -> bool {
        let mut votes = 0i32;
        for dir in FALLBACK_DIRECTIONS {
            let hits = self.bvh.ray_hits(&self.mesh, p, dir, EDGE_TOLERANCE);
            let odd = hits.len() % 2 == 1;
            if hits.iter().all(|h| !h.near_edge) {
                return odd;
            }
            votes += if odd { 1 } else { -1 };
        }
        votes > 0
    }

    /// Signed distance, positive inside.
    pub fn signed_distance(&self, p: Point3) -> f64 {
        let d = self.unsigned_distance(p);
        if d > 0.0 && self.is_inside(p) {
            d
        } else if d > 0.0 {
            -d
        } else {
            0.0
        }
    }

    /// Signed distance at every node of `grid`.
    pub fn volume(&self, grid: GridSpec) -> Result<SdfVolume> {
        let [nx, ny, nz] = grid.dims;
        let unsigned: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| self.unsigned_distance(grid.position(i)))
            .collect();
        let rows = self.row_candidates(&grid);
        let inside: Vec<Vec<bool>> = (0..ny * nz)
            .into_par_iter()
            .map(|row| {
                let (j, k) = (row % ny, row / ny);
                self.row_parity(&grid, j, k, &rows[row])
            })
            .collect();
        let mut values = unsigned;
        for k in 0..nz {
            for j in 0..ny {
                let row = &inside[j + ny * k];
                for (i, &inside) in row.iter().enumerate().take(nx) {
                    let v = &mut values[grid.index(i, j, k)];
                    if !inside {
                        *v = -*v;
                    }
                }
            }
        }
        SdfVolume::new(grid, values)
    }

    /// Triangles whose y/z extent covers each grid row.
    fn row_candidates(&self, grid: &GridSpec) -> Vec<Vec<usize>> {
        let [_, ny, nz] = grid.dims;
        let mut rows = vec![Vec::new(); ny * nz];
        let span = |lo: f64, hi: f64, axis: usize, n: usize| -> Option<(usize, usize)> {
            let a = ((lo - grid.origin[axis]) / grid.spacing - 1e-9).ceil().max(0.0);
            let b = ((hi - grid.origin[axis]) / grid.spacing + 1e-9).floor();
            if b < 0.0 || a > b || a >= n as f64 {
                return None;
            }
            Some((a as usize, (b as usize).min(n - 1)))
        };
        for t in 0..self.mesh.triangles.len() {
            let c = self.mesh.corners(t);
            let (ylo, yhi) = (c[0][1].min(c[1][1]).min(c[2][1]), c[0][1].max(c[1][1]).max(c[2][1]));
            let (zlo, zhi) = (c[0][2].min(c[1][2]).min(c[2][2]), c[0][2].max(c[1][2]).max(c[2][2]));
            let (Some((j0, j1)), Some((k0, k1))) = (span(ylo, yhi, 1, ny), span(zlo, zhi, 2, nz)) else {
                continue;
            };
            for k in k0..=k1 {
                for j in j0..=j1 {
                    rows[j + ny * k].push(t);
                }
            }
        }
        rows
    }

    /// Inside flags along the +x row at `(j, k)`, falling back to generic
    /// rays per voxel when a crossing grazes an edge.
    fn row_parity(&self, grid: &GridSpec, j: usize, k: usize, candidates: &[usize]) -> Vec<bool> {
        let nx = grid.dims[0];
        let y = grid.origin[1] + grid.spacing * j as f64;
        let z = grid.origin[2] + grid.spacing * k as f64;
        let mut crossings = Vec::new();
        let mut ambiguous = false;
        for &t in candidates {
            let [a, b, c] = self.mesh.corners(t);
            let cross2 = |p: Point3, q: Point3| (p[1] - y) * (q[2] - z) - (p[2] - z) * (q[1] - y);
            let area = (b[1] - a[1]) * (c[2] - a[2]) - (b[2] - a[2]) * (c[1] - a[1]);
            let scale = (b[1] - a[1]).abs().max((c[1] - a[1]).abs()) * (b[2] - a[2]).abs().max((c[2] - a[2]).abs());
            if area.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                continue;
            }
            let wa = cross2(b, c) / area;
            let wb = cross2(c, a) / area;
            let wc = cross2(a, b) / area;
            if wa < -EDGE_TOLERANCE || wb < -EDGE_TOLERANCE || wc < -EDGE_TOLERANCE {
                continue;
            }
            if wa.min(wb).min(wc) <= EDGE_TOLERANCE {
                ambiguous = true;
                break;
            }
            crossings.push(wa * a[0] + wb * b[0] + wc * c[0]);
        }
        if ambiguous {
            return (0..nx).map(|i| self.is_inside(grid.node(i, j, k))).collect();
        }
        crossings.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(nx);
        let mut passed = 0usize;
        for i in 0..nx {
            let x = grid.origin[0] + grid.spacing * i as f64;
            while passed < crossings.len() && crossings[passed] <= x {
                passed += 1;
            }
            out.push((crossings.len() - passed) % 2 == 1);
        }
        out
    }
}

/// Signed distance volume of a watertight mesh on a cubic grid with
/// `resolution` nodes per axis, covering the mesh bounding box grown by
/// `padding` on every side.
pub fn mesh_to_sdf(mesh: &TriangleMesh, resolution: usize, padding: f64) -> Result<SdfVolume> {
    if resolution < 8 {
        return Err(Error::invalid(format!("resolution must be at least 8, got {resolution}")));
    }
    if !(padding >= 0.0) {
        return Err(Error::invalid("padding must be non-negative"));
    }
    let sdf = MeshSdf::new(mesh.clone())?;
    let (lo, hi) = geom::bounding_box(&mesh.vertices).ok_or(Error::EmptyCloud)?;
    let half = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max) / 2.0 + padding;
    if !(half > 0.0) {
        return Err(Error::DegenerateExtent);
    }
    let center = geom::scale(geom::add(lo, hi), 0.5);
    let grid = GridSpec::new(
        [resolution; 3],
        geom::sub(center, [half; 3]),
        2.0 * half / (resolution - 1) as f64,
    )?;
    sdf.volume(grid)
}
