use rayon::prelude::*;

use super::{chamfer, emd};
use crate::error::{Error, Result};
use crate::geom::PointCloud;

/// Shape-to-shape distance underlying the set metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    Chamfer,
    Emd,
}

impl Base {
    pub fn id(self) -> &'static str {
        match self {
            Base::Chamfer => "cd",
            Base::Emd => "emd",
        }
    }

    pub fn distance(self, a: &PointCloud, b: &PointCloud) -> Result<f64> {
        match self {
            Base::Chamfer => chamfer(a, b),
            Base::Emd => Ok(emd(a, b)?.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MmdDirection {
    /// Mean over reference shapes of the nearest generated shape.
    #[default]
    OverReference,
    /// Mean over generated shapes of the nearest reference shape.
    OverGenerated,
}

/// Row-major `|rows| x |cols|` matrix of base distances, computed in parallel.
pub fn pairwise_distances(rows: &[PointCloud], cols: &[PointCloud], base: Base) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<(usize, usize)> = (0..rows.len()).flat_map(|i| (0..cols.len()).map(move |j| (i, j))).collect();
    let flat: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| base.distance(&rows[i], &cols[j]))
        .collect::<Result<_>>()?;
    Ok(flat.chunks(cols.len().max(1)).map(<[f64]>::to_vec).take(rows.len()).collect())
}

/// Every distance matrix the set metrics need.
#[derive(Debug, Clone)]
pub struct SetDistances {
    pub gen_ref: Vec<Vec<f64>>,
    pub gen_gen: Vec<Vec<f64>>,
    pub ref_ref: Vec<Vec<f64>>,
}

pub fn set_distances(gen: &[PointCloud], reference: &[PointCloud], base: Base) -> Result<SetDistances> {
    Ok(SetDistances {
        gen_ref: pairwise_distances(gen, reference, base)?,
        gen_gen: pairwise_distances(gen, gen, base)?,
        ref_ref: pairwise_distances(reference, reference, base)?,
    })
}

fn argmin(row: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (j, d) in row.enumerate() {
        if d < best.1 || best.0 == usize::MAX {
            best = (j, d);
        }
    }
    best
}

fn nonempty(gen_ref: &[Vec<f64>]) -> Result<(usize, usize)> {
    let g = gen_ref.len();
    let r = gen_ref.first().map_or(0, Vec::len);
    if g == 0 || r == 0 {
        return Err(Error::invalid("shape sets must be non-empty"));
    }
    Ok((g, r))
}

/// Minimum matching distance from a `gen x ref` distance matrix.
pub fn mmd(gen_ref: &[Vec<f64>], direction: MmdDirection) -> Result<f64> {
    let (g, r) = nonempty(gen_ref)?;
    let total: f64 = match direction {
        MmdDirection::OverReference => (0..r).map(|j| argmin((0..g).map(|i| gen_ref[i][j])).1).sum::<f64>() / r as f64,
        MmdDirection::OverGenerated => (0..g).map(|i| argmin(gen_ref[i].iter().copied()).1).sum::<f64>() / g as f64,
    };
    Ok(total)
}

/// Percentage of reference shapes that are the nearest reference of at
/// least one generated shape (ties by lowest reference index).
pub fn coverage(gen_ref: &[Vec<f64>]) -> Result<f64> {
    let (_, r) = nonempty(gen_ref)?;
    let mut hit = vec![false; r];
    for row in gen_ref {
        hit[argmin(row.iter().copied()).0] = true;
    }
    Ok(100.0 * hit.iter().filter(|&&h| h).count() as f64 / r as f64)
}

/// Leave-one-out 1-NN accuracy in percent over the pooled set (generated
/// first, then reference); nearest-neighbor ties go to the lowest pooled index.
pub fn nna_1(d: &SetDistances) -> Result<f64> {
    let (g, r) = nonempty(&d.gen_ref)?;
    if g < 2 || r < 2 {
        return Err(Error::TooFew {
            requested: 2,
            available: g.min(r),
        });
    }
    let n = g + r;
    let pooled = |i: usize, j: usize| -> f64 {
        match (i < g, j < g) {
            (true, true) => d.gen_gen[i][j],
            (true, false) => d.gen_ref[i][j - g],
            (false, true) => d.gen_ref[j][i - g],
            (false, false) => d.ref_ref[i - g][j - g],
        }
    };
    let correct = (0..n)
        .filter(|&i| {
            let mut best = (usize::MAX, f64::INFINITY);
            for j in (0..n).filter(|&j| j != i) {
                let dist = pooled(i, j);
                if dist < best.1 || best.0 == usize::MAX {
                    best = (j, dist);
                }
            }
            (best.0 < g) == (i < g)
        })
        .count();
    Ok(100.0 * correct as f64 / n as f64)
}
