//! Closed test meshes with outward (counter-clockwise) winding.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::TriangleMesh;
use crate::geom::{self, Point3};

/// Subdivided icosahedron with vertices on the sphere of `radius`.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3> = vec![
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
    let mut tris: Vec<[usize; 3]> = vec![
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
    let unit = |p: Point3| geom::scale(p, 1.0 / geom::norm(p));
    for v in verts.iter_mut() {
        *v = unit(*v);
    }
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        for &[a, b, c] in &tris {
            let mut m = |x: usize, y: usize| -> usize {
                *mid.entry((x.min(y), x.max(y))).or_insert_with(|| {
                    verts.push(unit(geom::scale(geom::add(verts[x], verts[y]), 0.5)));
                    verts.len() - 1
                })
            };
            let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    TriangleMesh {
        vertices: verts.into_iter().map(|v| geom::scale(v, radius)).collect(),
        triangles: tris,
    }
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64, segments: usize, rings: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(segments * rings);
    for i in 0..segments {
        let u = 2.0 * PI * i as f64 / segments as f64;
        for j in 0..rings {
            let v = 2.0 * PI * j as f64 / rings as f64;
            let r = major + minor * v.cos();
            vertices.push([r * u.cos(), r * u.sin(), minor * v.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % segments) * rings + (j % rings);
    let mut triangles = Vec::new();
    for i in 0..segments {
        for j in 0..rings {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh { vertices, triangles }
}

/// Capped cylinder along z, centered at the origin.
pub fn cylinder(radius: f64, length: f64, segments: usize, stacks: usize) -> TriangleMesh {
    let mut vertices = Vec::new();
    for s in 0..=stacks {
        let z = -length / 2.0 + length * s as f64 / stacks as f64;
        for i in 0..segments {
            let a = 2.0 * PI * i as f64 / segments as f64;
            vertices.push([radius * a.cos(), radius * a.sin(), z]);
        }
    }
    let bottom = vertices.len();
    vertices.push([0.0, 0.0, -length / 2.0]);
    let top = vertices.len();
    vertices.push([0.0, 0.0, length / 2.0]);
    let id = |s: usize, i: usize| s * segments + i % segments;
    let mut triangles = Vec::new();
    for s in 0..stacks {
        for i in 0..segments {
            let (a, b, c, d) = (id(s, i), id(s, i + 1), id(s + 1, i + 1), id(s + 1, i));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    for i in 0..segments {
        triangles.push([bottom, id(0, i + 1), id(0, i)]);
        triangles.push([top, id(stacks, i), id(stacks, i + 1)]);
    }
    TriangleMesh { vertices, triangles }
}

/// Axis-aligned box. `inward` flips the winding (for cavities).
pub fn axis_box(lo: Point3, hi: Point3, inward: bool) -> TriangleMesh {
    let vertices: Vec<Point3> = (0..8)
        .map(|c| {
            [
                if c & 1 == 0 { lo[0] } else { hi[0] },
                if c & 2 == 0 { lo[1] } else { hi[1] },
                if c & 4 == 0 { lo[2] } else { hi[2] },
            ]
        })
        .collect();
    let mut triangles = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    if inward {
        for t in triangles.iter_mut() {
            t.swap(1, 2);
        }
    }
    TriangleMesh { vertices, triangles }
}

/// Disjoint union of meshes.
pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
    let mut out = TriangleMesh::default();
    for m in parts {
        let base = out.vertices.len();
        out.vertices.extend_from_slice(&m.vertices);
        out.triangles
            .extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
    out
}
