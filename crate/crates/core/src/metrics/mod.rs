//! Reconstruction metrics (CD, EMD, HD, F1), set-level generation metrics
//! (MMD, COV, 1-NNA) and feature-space distribution distances.

mod emd;
mod features;
mod generative;
mod report;

#[cfg(test)]
mod tests;

use rayon::prelude::*;

pub use emd::{emd, emd_auction, emd_exact, hungarian, EmdResult, EXACT_EMD_LIMIT};
pub use features::{frechet_feature_distance, kernel_feature_distance, FeatureSet};
pub use generative::{coverage, nna_1, mmd, pairwise_distances, set_distances, Base, MmdDirection, SetDistances};
pub use report::{MetricEntry, MetricReport};

use crate::error::{Error, Result};
use crate::geom::{dist2, fps, PointCloud, SpatialIndex};

/// Default F1 distance threshold.
pub const F1_THRESHOLD: f64 = 0.06;
/// Reconstruction evaluation subsample size.
pub const RECON_POINTS: usize = 2560;
/// Generation evaluation subsample size.
pub const GEN_POINTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChamferVariant {
    /// Mean squared nearest distance, summed over both directions.
    #[default]
    Squared,
    /// Mean nearest distance, summed over both directions.
    Unsquared,
}

/// Squared distance from each of `from` to its nearest point of `to`.
fn nearest_sq(from: &[crate::Point3], to: &SpatialIndex) -> Vec<f64> {
    from.par_iter()
        .map(|&q| dist2(q, to.points()[to.nearest(q).0]))
        .collect()
}

fn both_nonempty(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    chamfer_with(a, b, ChamferVariant::Squared)
}

pub fn chamfer_with(a: &PointCloud, b: &PointCloud, variant: ChamferVariant) -> Result<f64> {
    both_nonempty(a, b)?;
    let (ia, ib) = (SpatialIndex::new(a.points()), SpatialIndex::new(b.points()));
    let (mut ab, mut ba) = (nearest_sq(a.points(), &ib), nearest_sq(b.points(), &ia));
    if variant == ChamferVariant::Unsquared {
        ab.iter_mut().chain(ba.iter_mut()).for_each(|d| *d = d.sqrt());
    }
    Ok(mean(&ab) + mean(&ba))
}

/// Symmetric Hausdorff distance, unsquared.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    both_nonempty(a, b)?;
    let (ia, ib) = (SpatialIndex::new(a.points()), SpatialIndex::new(b.points()));
    let worst = nearest_sq(a.points(), &ib)
        .into_iter()
        .chain(nearest_sq(b.points(), &ia))
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

/// F1 score in percent: precision over `pred`, recall over `gt`, a point
/// counting when its nearest counterpart lies within `tau`.
pub fn f1_score(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<f64> {
    both_nonempty(pred, gt)?;
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("F1 threshold must be positive, got {tau}")));
    }
    let (ip, ig) = (SpatialIndex::new(pred.points()), SpatialIndex::new(gt.points()));
    let t2 = tau * tau;
    let frac = |d: Vec<f64>| d.iter().filter(|&&x| x <= t2).count() as f64 / d.len() as f64;
    let precision = frac(nearest_sq(pred.points(), &ig));
    let recall = frac(nearest_sq(gt.points(), &ip));
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// Farthest-point subsample of `target` points starting from index 0.
pub fn eval_protocol_subsample(pc: &PointCloud, target: usize) -> Result<PointCloud> {
    Ok(pc.select(&fps(pc, target, 0)?))
}
