//! File formats: point clouds (XYZ, PLY), meshes (OBJ, PLY), skeletons (PLY
//! with a radius property, CSV), SDF volumes (MSDF) and parameter
//! checkpoints (SKNN).

mod checkpoint;
mod ply;
mod volume;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, NamedArray, CHECKPOINT_MAGIC};
pub use volume::{decode_volume, encode_volume, read_volume, write_volume, VOLUME_MAGIC};

use crate::error::{Error, Result};
use crate::field::TriangleMesh;
use crate::geom::{Point3, PointCloud};
use crate::skeleton::Skeleton;

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default()
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse number {tok:?}")))
}

/// Reads whitespace-separated `x y z` lines; blank lines and `#` comments
/// are skipped, extra columns ignored.
pub fn parse_xyz(text: &str) -> Result<Vec<Point3>> {
    let mut pts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
        if toks.len() < 3 {
            return Err(Error::Format(format!("line {}: expected 3 coordinates", n + 1)));
        }
        pts.push([parse_f64(toks[0], n + 1)?, parse_f64(toks[1], n + 1)?, parse_f64(toks[2], n + 1)?]);
    }
    Ok(pts)
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let pts = match extension(path).as_str() {
        "ply" => ply::read(&fs::read(path)?)?.vertices,
        _ => parse_xyz(&fs::read_to_string(path)?)?,
    };
    PointCloud::new(pts)
}

pub fn write_xyz(path: &Path, points: &[Point3]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for p in points {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a point cloud as `.ply` (binary) or XYZ text by extension.
pub fn write_point_cloud(path: &Path, points: &[Point3]) -> Result<()> {
    match extension(path).as_str() {
        "ply" => Ok(fs::write(path, ply::encode(points, &[], None))?),
        _ => write_xyz(path, points),
    }
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<f64> = toks.take(3).map(|t| parse_f64(t, n + 1)).collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::Format(format!("line {}: vertex needs 3 coordinates", n + 1)));
                }
                vertices.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|_| Error::Format(format!("line {}: bad face index {t:?}", n + 1)))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        usize::try_from(resolved)
                            .map_err(|_| Error::Format(format!("line {}: face index {i} out of range", n + 1)))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Format(format!("line {}: face needs 3 vertices", n + 1)));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    match extension(path).as_str() {
        "ply" => {
            let ply = ply::read(&fs::read(path)?)?;
            TriangleMesh::new(ply.vertices, ply.faces)
        }
        "obj" => parse_obj(&fs::read_to_string(path)?),
        other => Err(Error::Format(format!("unsupported mesh extension {other:?}"))),
    }
}

/// Writes a mesh as `.ply` (binary little-endian) or `.obj` by extension.
pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    match extension(path).as_str() {
        "ply" => Ok(fs::write(path, ply::encode(&mesh.vertices, &mesh.triangles, None))?),
        _ => write_obj(path, mesh),
    }
}

pub fn write_skeleton_ply(path: &Path, skeleton: &Skeleton) -> Result<()> {
    Ok(fs::write(path, ply::encode(&skeleton.points, &[], Some(&skeleton.radii)))?)
}

pub fn write_skeleton_csv(path: &Path, skeleton: &Skeleton) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "x,y,z,r")?;
    for (p, r) in skeleton.points.iter().zip(&skeleton.radii) {
        writeln!(w, "{},{},{},{}", p[0], p[1], p[2], r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_skeleton_csv(text: &str) -> Result<Skeleton> {
    let mut points = Vec::new();
    let mut radii = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let v: Vec<f64> = line.split(',').map(|t| parse_f64(t.trim(), n + 1)).collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(Error::Format(format!("line {}: expected x,y,z,r", n + 1)));
        }
        points.push([v[0], v[1], v[2]]);
        radii.push(v[3]);
    }
    Skeleton::new(points, radii)
}

pub fn read_skeleton(path: &Path) -> Result<Skeleton> {
    match extension(path).as_str() {
        "ply" => {
            let ply = ply::read(&fs::read(path)?)?;
            let radii = ply
                .radius
                .ok_or_else(|| Error::Format("skeleton PLY lacks a radius property".into()))?;
            Skeleton::new(ply.vertices, radii)
        }
        _ => parse_skeleton_csv(&fs::read_to_string(path)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::shapes;

    #[test]
    fn xyz_parsing() {
        let pts = parse_xyz("# header\n1 2 3\n\n4.5\t-1 0 7\n").unwrap();
        assert_eq!(pts, vec![[1.0, 2.0, 3.0], [4.5, -1.0, 0.0]]);
        assert!(parse_xyz("1 2\n").is_err());
        assert!(parse_xyz("1 2 x\n").is_err());
    }

    #[test]
    fn obj_round_trip_and_polygons() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::icosphere(0.5, 1);
        let path = dir.path().join("m.obj");
        write_mesh(&path, &mesh).unwrap();
        assert_eq!(read_mesh(&path).unwrap(), mesh);
        let quad = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n").unwrap();
        assert_eq!(quad.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }

    #[test]
    fn skeleton_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sk = Skeleton::new(vec![[0.5, -0.25, 1.0], [0.0, 0.125, 2.0]], vec![0.25, 0.5]).unwrap();
        let csv = dir.path().join("s.csv");
        let ply = dir.path().join("s.ply");
        write_skeleton_csv(&csv, &sk).unwrap();
        write_skeleton_ply(&ply, &sk).unwrap();
        assert_eq!(read_skeleton(&csv).unwrap(), sk);
        assert_eq!(read_skeleton(&ply).unwrap(), sk);
        assert!(fs::read_to_string(&csv).unwrap().starts_with("x,y,z,r\n"));
    }
}
