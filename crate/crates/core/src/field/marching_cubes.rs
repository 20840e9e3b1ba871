use std::collections::HashMap;

use super::tables::{CORNERS, EDGES, TRIANGLES};
use super::{SdfVolume, TriangleMesh};
use crate::geom;

/// Extracts the `iso` level set. Triangles are wound so their normals point
/// toward decreasing values (outward under the positive-inside convention).
/// Vertices on shared cell edges are emitted once, in cell-index order.
pub fn marching_cubes(vol: &SdfVolume, iso: f64) -> TriangleMesh {
    let g = vol.grid;
    let [nx, ny, nz] = g.dims;
    let mut mesh = TriangleMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    let mut edge_vertex: HashMap<usize, usize> = HashMap::new();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let nodes: [usize; 8] = CORNERS.map(|c| g.index(i + c[0], j + c[1], k + c[2]));
                let values = nodes.map(|n| vol.values[n]);
                let case = values
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (b, &v)| if v < iso { acc | (1 << b) } else { acc });
                if case == 0 || case == 255 {
                    continue;
                }
                let mut local = [usize::MAX; 12];
                let row = &TRIANGLES[case];
                for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
                    let mut ids = [0usize; 3];
                    for (slot, &e) in ids.iter_mut().zip(tri) {
                        let e = e as usize;
                        if local[e] == usize::MAX {
                            let [ca, cb] = EDGES[e];
                            let (lo, hi) = if nodes[ca] < nodes[cb] { (ca, cb) } else { (cb, ca) };
                            let axis = (0..3).find(|&a| CORNERS[ca][a] != CORNERS[cb][a]).unwrap();
                            let key = nodes[lo] * 3 + axis;
                            local[e] = *edge_vertex.entry(key).or_insert_with(|| {
                                let (p0, p1) = (g.position(nodes[lo]), g.position(nodes[hi]));
                                let (v0, v1) = (values[lo], values[hi]);
                                let t = (iso - v0) / (v1 - v0);
                                mesh.vertices.push(geom::add(p0, geom::scale(geom::sub(p1, p0), t)));
                                mesh.vertices.len() - 1
                            });
                        }
                        *slot = local[e];
                    }
                    let [a, b, c] = ids;
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let t = [a, b, c];
                    let n = geom::cross(
                        geom::sub(mesh.vertices[t[1]], mesh.vertices[t[0]]),
                        geom::sub(mesh.vertices[t[2]], mesh.vertices[t[0]]),
                    );
                    if geom::dot(n, n) > 0.0 {
                        mesh.triangles.push(t);
                    }
                }
            }
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    #[test]
    fn uniform_sign_gives_empty_mesh() {
        let g = GridSpec::centered_cube(10, 1.0).unwrap();
        let vol = SdfVolume::new(g, vec![-1.0; g.len()]).unwrap();
        assert!(marching_cubes(&vol, 0.0).is_empty());
        let vol = SdfVolume::new(g, vec![2.0; g.len()]).unwrap();
        assert!(marching_cubes(&vol, 0.0).is_empty());
    }

    #[test]
    fn sphere_level_set() {
        let g = GridSpec::centered_cube(64, 1.0).unwrap();
        let vol = SdfVolume::from_fn(g, |p| 0.8 - geom::norm(p)).unwrap();
        let mesh = marching_cubes(&vol, 0.0);
        assert!(!mesh.is_empty());
        for v in &mesh.vertices {
            assert!((geom::norm(*v) - 0.8).abs() < 1.5 * g.spacing);
        }
        assert_eq!(mesh.euler_characteristic(), 2);
        mesh.check_watertight().unwrap();
        // outward winding: positive enclosed volume close to the ball's
        let ball = 4.0 / 3.0 * std::f64::consts::PI * 0.8f64.powi(3);
        assert!((mesh.signed_volume() - ball).abs() / ball < 0.02, "{}", mesh.signed_volume());
    }

    #[test]
    fn half_space_is_planar() {
        let g = GridSpec::new([9, 9, 9], [-1.0, -1.0, -0.93], 0.25).unwrap();
        let vol = SdfVolume::from_fn(g, |p| -p[2]).unwrap();
        let mesh = marching_cubes(&vol, 0.0);
        assert!(!mesh.is_empty());
        for v in &mesh.vertices {
            assert!(v[2].abs() < 1e-9);
        }
        // normals face +z, where values decrease
        for t in 0..mesh.triangles.len() {
            assert!(mesh.area_normal(t)[2] > 0.0);
        }
    }

    #[test]
    fn output_is_deterministic() {
        let g = GridSpec::centered_cube(24, 1.0).unwrap();
        let vol = SdfVolume::from_fn(g, |p| 0.5 - geom::norm(geom::sub(p, [0.1, -0.05, 0.2]))).unwrap();
        assert_eq!(marching_cubes(&vol, 0.0), marching_cubes(&vol, 0.0));
    }
}
