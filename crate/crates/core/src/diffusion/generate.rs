use rayon::prelude::*;

use super::score::ScoreFunction;
use super::{sample_latents, GuidanceConfig, NoiseSchedule};
use crate::error::{Error, Result};
use crate::field::{assemble_sparse_volume, marching_cubes, skeleton_guided_mask, GridSpec, SdfVolume, TriangleMesh};
use crate::geom::Point3;
use crate::nnet::{AutoEncoder, LatentSet};

const DECODE_CHUNK: usize = 2048;

/// Decodes the latent at the `p` fraction of voxels nearest its skeleton
/// channels and fills the rest with `fill`.
pub fn decode_sparse_volume(model: &AutoEncoder, latent: &LatentSet, grid: &GridSpec, p: f64, fill: f64) -> Result<SdfVolume> {
    let skeleton: Vec<Point3> = latent.skeleton_rows().iter().map(|r| [r[0], r[1], r[2]]).collect();
    let mask = skeleton_guided_mask(grid, &skeleton, p)?;
    let coords: Vec<Point3> = mask.iter().map(|&i| grid.position(i)).collect();
    let values = model.decode_chunked(latent, &coords, DECODE_CHUNK)?;
    assemble_sparse_volume(*grid, &mask, &values, fill)
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub schedule: NoiseSchedule,
    pub guidance: GuidanceConfig,
    pub condition: Option<usize>,
    pub n_s: usize,
    /// Fraction of voxels decoded around the skeleton.
    pub p: f64,
    pub resolution: usize,
    pub fill: f64,
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct GeneratedShapes {
    pub latents: Vec<LatentSet>,
    /// `None` where marching cubes found no surface.
    pub meshes: Vec<Option<TriangleMesh>>,
    /// Indices of samples without a surface.
    pub failures: Vec<usize>,
}

/// Samples latents, decodes each on the skeleton-guided mask of a
/// `[-1, 1]^3` grid and extracts the zero level set.
pub fn generate_shapes(score: &dyn ScoreFunction, model: &AutoEncoder, cfg: &GenerateConfig) -> Result<GeneratedShapes> {
    let channels = 4 + model.arch.latent_dim;
    let latents = sample_latents(
        score,
        cfg.n_s,
        channels,
        &cfg.schedule,
        &cfg.guidance,
        cfg.condition,
        cfg.seed,
        cfg.count,
    )?;
    let grid = GridSpec::centered_cube(cfg.resolution, 1.0)?;
    let meshes: Vec<Option<TriangleMesh>> = latents
        .par_iter()
        .map(|z| {
            if z.data.cols() != channels {
                return Err(Error::shape(format!("latent has {} channels, decoder expects {channels}", z.data.cols())));
            }
            let vol = decode_sparse_volume(model, z, &grid, cfg.p, cfg.fill)?;
            let mesh = marching_cubes(&vol, 0.0);
            Ok((!mesh.is_empty()).then_some(mesh))
        })
        .collect::<Result<_>>()?;
    let failures = meshes.iter().enumerate().filter(|(_, m)| m.is_none()).map(|(i, _)| i).collect();
    Ok(GeneratedShapes {
        latents,
        meshes,
        failures,
    })
}
