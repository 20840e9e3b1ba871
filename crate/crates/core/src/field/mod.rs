//! Signed distance volumes: construction from watertight meshes, training
//! and inference coordinate sampling, and isosurface extraction.
//!
//! Sign convention: values are positive inside the shape and negative
//! outside.

mod bvh;
mod marching_cubes;
mod mesh;
mod sampling;
mod sdf;
pub mod shapes;
mod tables;

pub use bvh::Bvh;
pub use marching_cubes::marching_cubes;
pub use mesh::TriangleMesh;
pub use sampling::{assemble_sparse_volume, sample_training_coords, skeleton_guided_mask, SdfSampleBatch};
pub use sdf::{closest_point_on_triangle, mesh_to_sdf, MeshSdf};

use crate::error::{Error, Result};
use crate::geom::Point3;

/// Default truncation half-width of the near-surface band.
pub const DEFAULT_TRUNCATION: f64 = 0.1;
/// Value assigned to voxels skipped by sparse decoding.
pub const DEFAULT_FILL: f64 = -1.0;

/// Isotropic voxel lattice. Voxel `(i, j, k)` is centered at
/// `origin + spacing * (i, j, k)`; linear indices run x-fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub origin: Point3,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(dims: [usize; 3], origin: Point3, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        Ok(Self { dims, origin, spacing })
    }

    /// Cube `[-half, half]^3` sampled at `resolution` nodes per axis.
    pub fn centered_cube(resolution: usize, half: f64) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::invalid("resolution must be at least 2"));
        }
        Self::new(
            [resolution; 3],
            [-half; 3],
            2.0 * half / (resolution - 1) as f64,
        )
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Point3 {
        let [i, j, k] = self.coords(idx);
        self.node(i, j, k)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Point3 {
        [
            self.origin[0] + self.spacing * i as f64,
            self.origin[1] + self.spacing * j as f64,
            self.origin[2] + self.spacing * k as f64,
        ]
    }

    pub fn positions(&self) -> Vec<Point3> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }
}

/// Dense scalar field on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SdfVolume {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl SdfVolume {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(format!(
                "{} values for a grid of {} voxels",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite SDF value".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every voxel center.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Point3) -> f64 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        let values = (0..grid.len()).into_par_iter().map(|i| f(grid.position(i))).collect();
        Self::new(grid, values)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn origin(&self) -> Point3 {
        self.grid.origin
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }
}
