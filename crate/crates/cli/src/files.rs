use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use skelgen_core::field::TriangleMesh;
use skelgen_core::geom::fps;
use skelgen_core::io;
use skelgen_core::nnet::{LatentSet, Tensor};
use skelgen_core::PointCloud;

use crate::settings::{at, CliResult, Failure};

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// `x,y,z,r,f0,...` header followed by one row per skeletal point.
pub fn latent_csv(latent: &LatentSet) -> String {
    let (rows, cols) = (latent.data.rows(), latent.data.cols());
    let mut out = String::from("x,y,z,r");
    for f in 0..cols.saturating_sub(4) {
        let _ = write!(out, ",f{f}");
    }
    out.push('\n');
    for i in 0..rows {
        let row: Vec<String> = latent.data.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_latent(path: &Path) -> CliResult<LatentSet> {
    let text = read_text(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::Input(format!("{}: line {}: non-numeric value", path.display(), n + 1)))?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(Failure::Input(format!("{}: line {}: ragged row", path.display(), n + 1)));
        }
        data.extend(row);
    }
    let cols = cols.ok_or_else(|| Failure::Input(format!("{}: no latent rows", path.display())))?;
    let tensor = at(path, Tensor::matrix(data.len() / cols, cols, data))?;
    at(path, LatentSet::new(tensor))
}

/// A shape file as either a triangle mesh or a bare point cloud.
pub enum Shape {
    Mesh(TriangleMesh),
    Cloud(PointCloud),
}

pub fn read_shape(path: &Path) -> CliResult<Shape> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "obj" => at(path, io::read_mesh(path)).map(Shape::Mesh),
        "ply" => {
            let mesh = at(path, io::read_mesh(path))?;
            if mesh.triangles.is_empty() {
                at(path, PointCloud::new(mesh.vertices)).map(Shape::Cloud)
            } else {
                Ok(Shape::Mesh(mesh))
            }
        }
        _ => at(path, io::read_point_cloud(path)).map(Shape::Cloud),
    }
}

/// Evaluation point set: meshes are sampled at 4x density then reduced,
/// clouds are reduced directly; both by farthest point sampling from index 0.
pub fn evaluation_points(path: &Path, target: usize, seed: u64) -> CliResult<PointCloud> {
    let cloud = match read_shape(path)? {
        Shape::Mesh(m) => at(path, m.sample_surface(4 * target, seed).and_then(PointCloud::new))?,
        Shape::Cloud(c) => c,
    };
    if cloud.len() < target {
        return Err(Failure::Input(format!(
            "{}: {} points, evaluation needs {target}",
            path.display(),
            cloud.len()
        )));
    }
    Ok(cloud.select(&at(path, fps(&cloud, target, 0))?))
}

const SHAPE_EXTENSIONS: [&str; 4] = ["obj", "ply", "xyz", "txt"];

/// Shape files directly inside `dir`, sorted by file name.
pub fn list_shapes(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| SHAPE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(Failure::Input(format!("{}: no shape files", dir.display())));
    }
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("shape").to_string()
}
