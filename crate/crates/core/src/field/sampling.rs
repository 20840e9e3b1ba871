use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{GridSpec, SdfVolume};
use crate::error::{Error, Result};
use crate::geom::{Point3, SpatialIndex};

/// Query coordinates with their target SDF values.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfSampleBatch {
    pub coords: Vec<Point3>,
    pub values: Vec<f64>,
}

impl SdfSampleBatch {
    pub fn new(coords: Vec<Point3>, values: Vec<f64>) -> Result<Self> {
        if coords.len() != values.len() {
            return Err(Error::shape(format!("{} coords, {} values", coords.len(), values.len())));
        }
        Ok(Self { coords, values })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

fn fraction_count(fraction: f64, total: usize) -> usize {
    // guard against 0.1 * 10 = 1.0000000000000002 style overshoot
    ((fraction * total as f64 - 1e-9).ceil().max(0.0) as usize).min(total)
}

/// Draws `ceil(inside_frac * m)` voxel centers uniformly (with replacement)
/// from the band `|value| <= trunc` and the rest from outside it.
pub fn sample_training_coords(
    vol: &SdfVolume,
    m: usize,
    trunc: f64,
    inside_frac: f64,
    seed: u64,
) -> Result<SdfSampleBatch> {
    if !(0.0..=1.0).contains(&inside_frac) {
        return Err(Error::invalid(format!("inside fraction {inside_frac} not in [0, 1]")));
    }
    let (band, far): (Vec<usize>, Vec<usize>) = (0..vol.values.len()).partition(|&i| vol.values[i].abs() <= trunc);
    if band.is_empty() {
        return Err(Error::EmptyTruncatedRegion);
    }
    let n_band = fraction_count(inside_frac, m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = Vec::with_capacity(m);
    for _ in 0..n_band {
        picks.push(band[rng.random_range(0..band.len())]);
    }
    let rest = if far.is_empty() { &band } else { &far };
    for _ in n_band..m {
        picks.push(rest[rng.random_range(0..rest.len())]);
    }
    SdfSampleBatch::new(
        picks.iter().map(|&i| vol.grid.position(i)).collect(),
        picks.iter().map(|&i| vol.values[i]).collect(),
    )
}

/// The `ceil(p * N)` voxels nearest to any skeletal point, ties by lowest
/// voxel index. Returned ascending by index.
pub fn skeleton_guided_mask(grid: &GridSpec, skeleton: &[Point3], p: f64) -> Result<Vec<usize>> {
    if skeleton.is_empty() {
        return Err(Error::invalid("empty skeleton"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("fraction {p} not in (0, 1]")));
    }
    let count = fraction_count(p, grid.len()).max(1);
    let index = SpatialIndex::new(skeleton);
    let mut ranked: Vec<(f64, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|i| (index.nearest(grid.position(i)).1, i))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if count < ranked.len() {
        ranked.select_nth_unstable_by(count - 1, by_distance);
    }
    let mut mask: Vec<usize> = ranked[..count].iter().map(|&(_, i)| i).collect();
    mask.sort_unstable();
    Ok(mask)
}

/// Dense volume carrying `values` at `mask` and `fill` everywhere else.
pub fn assemble_sparse_volume(grid: GridSpec, mask: &[usize], values: &[f64], fill: f64) -> Result<SdfVolume> {
    if mask.len() != values.len() {
        return Err(Error::shape(format!("{} mask entries, {} values", mask.len(), values.len())));
    }
    let mut dense = vec![fill; grid.len()];
    for (&i, &v) in mask.iter().zip(values) {
        if i >= dense.len() {
            return Err(Error::IndexOutOfRange { index: i, len: dense.len() });
        }
        dense[i] = v;
    }
    SdfVolume::new(grid, dense)
}
