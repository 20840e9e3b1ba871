//! Differentiable skeletonization.
//!
//! Skeletal points start at farthest-point samples of the surface and are
//! moved, for a fixed number of rounds, to the centroid of the density
//! cluster found among their K nearest surface points. The hierarchical
//! variant runs the procedure twice: first to `4 n_s` intermediate points,
//! then from those to the final `n_s`.
//!
//! Once the neighborhoods and cluster memberships are fixed, every output
//! point is a fixed convex combination of surface points. [`SkeletonTrace`]
//! records those memberships so the linear map (and hence the Jacobian) can
//! be recovered exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{self, dbscan, fps, Point3, PointCloud, SpatialIndex};

/// Skeletal points with the distance from each to the nearest surface point.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub points: Vec<Point3>,
    pub radii: Vec<f64>,
}

impl Skeleton {
    pub fn new(points: Vec<Point3>, radii: Vec<f64>) -> Result<Self> {
        if points.len() != radii.len() {
            return Err(Error::shape(format!("{} points but {} radii", points.len(), radii.len())));
        }
        if points.iter().flatten().chain(&radii).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite skeleton value".into()));
        }
        Ok(Self { points, radii })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rows of `(x, y, z, r)`.
    pub fn rows(&self) -> Vec<[f64; 4]> {
        self.points
            .iter()
            .zip(&self.radii)
            .map(|(p, &r)| [p[0], p[1], p[2], r])
            .collect()
    }
}

/// How the DBSCAN radius is chosen for each neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsPolicy {
    /// `factor` times the mean nearest-neighbor spacing inside the neighborhood.
    Adaptive { factor: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonizeConfig {
    pub n_s: usize,
    pub iterations: usize,
    pub k: usize,
    pub eps: EpsPolicy,
    pub min_pts: usize,
    pub hierarchical: bool,
}

impl Default for SkeletonizeConfig {
    fn default() -> Self {
        Self {
            n_s: 256,
            iterations: 2,
            k: 32,
            eps: EpsPolicy::Adaptive { factor: 2.0 },
            min_pts: 4,
            hierarchical: false,
        }
    }
}

impl SkeletonizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 {
            return Err(Error::invalid("n_s must be at least 1"));
        }
        if self.min_pts == 0 || self.k < self.min_pts {
            return Err(Error::invalid(format!(
                "neighborhood size k={} must be at least min_pts={} (>= 1)",
                self.k, self.min_pts
            )));
        }
        match self.eps {
            EpsPolicy::Adaptive { factor } if !(factor > 0.0) => Err(Error::invalid("eps factor must be positive")),
            EpsPolicy::Fixed(e) if !(e > 0.0) => Err(Error::invalid("eps must be positive")),
            _ => Ok(()),
        }
    }
}

/// Memberships recorded while skeletonizing; one entry per stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonTrace {
    pub stages: Vec<StageTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageTrace {
    /// Size of this stage's input set.
    pub input_len: usize,
    /// FPS initialization indices into the stage input.
    pub init: Vec<usize>,
    /// `rounds[i][j]`: input indices averaged to produce skeletal point `j`
    /// in round `i`, ascending.
    pub rounds: Vec<Vec<Vec<usize>>>,
}

impl StageTrace {
    /// Sparse row-stochastic map from stage input to stage output.
    fn weights(&self) -> Vec<Vec<(usize, f64)>> {
        match self.rounds.last() {
            None => self.init.iter().map(|&i| vec![(i, 1.0)]).collect(),
            Some(sets) => sets
                .iter()
                .map(|set| {
                    let w = 1.0 / set.len() as f64;
                    set.iter().map(|&i| (i, w)).collect()
                })
                .collect(),
        }
    }
}

impl SkeletonTrace {
    /// Sparse weights expressing each skeletal point as a combination of
    /// surface points, valid while memberships stay fixed.
    pub fn weights(&self) -> Vec<Vec<(usize, f64)>> {
        let mut acc: Option<Vec<Vec<(usize, f64)>>> = None;
        for stage in &self.stages {
            let w = stage.weights();
            acc = Some(match acc {
                None => w,
                Some(prev) => w
                    .iter()
                    .map(|row| {
                        let mut dense = std::collections::BTreeMap::new();
                        for &(mid, a) in row {
                            for &(src, b) in &prev[mid] {
                                *dense.entry(src).or_insert(0.0) += a * b;
                            }
                        }
                        dense.into_iter().collect()
                    })
                    .collect(),
            });
        }
        acc.unwrap_or_default()
    }

    /// Jacobian-vector product of the skeleton positions along a per-surface-
    /// point direction.
    pub fn jvp(&self, direction: &[Point3]) -> Vec<Point3> {
        self.weights()
            .iter()
            .map(|row| {
                row.iter()
                    .fold([0.0; 3], |acc, &(i, w)| geom::add(acc, geom::scale(direction[i], w)))
            })
            .collect()
    }
}

fn resolve_eps(policy: EpsPolicy, neighborhood: &[Point3]) -> f64 {
    match policy {
        EpsPolicy::Fixed(e) => e,
        EpsPolicy::Adaptive { factor } => {
            let n = neighborhood.len();
            if n < 2 {
                return 0.0;
            }
            let total: f64 = (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| geom::dist2(neighborhood[i], neighborhood[j]))
                        .fold(f64::INFINITY, f64::min)
                        .sqrt()
                })
                .sum();
            factor * total / n as f64
        }
    }
}

/// Surface indices whose centroid replaces `seed`: the DBSCAN cluster (among
/// the K nearest neighbors) that contains the seed's nearest neighbor, or all
/// K neighbors when that neighbor is noise.
fn cluster_members(
    seed: Point3,
    index: &SpatialIndex,
    k: usize,
    eps: EpsPolicy,
    min_pts: usize,
) -> Result<Vec<usize>> {
    let (nbrs, _) = index.knn(seed, k)?;
    let pts: Vec<Point3> = nbrs.iter().map(|&i| index.points()[i]).collect();
    let e = resolve_eps(eps, &pts);
    let mut members: Vec<usize> = if e > 0.0 {
        let labels = dbscan(&pts, e, min_pts)?;
        match labels[0] {
            Some(c) => nbrs
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == Some(c))
                .map(|(&i, _)| i)
                .collect(),
            None => nbrs,
        }
    } else {
        // all neighbors coincide
        nbrs
    };
    members.sort_unstable();
    Ok(members)
}

/// One update of a single skeletal point against the surface `pc`.
pub fn cluster_center_update(
    seed: Point3,
    pc: &PointCloud,
    k: usize,
    eps: EpsPolicy,
    min_pts: usize,
) -> Result<Point3> {
    let index = SpatialIndex::new(pc.points());
    let members = cluster_members(seed, &index, k, eps, min_pts)?;
    Ok(geom::centroid(members.iter().map(|&i| &pc.points()[i])).expect("non-empty cluster"))
}

fn run_stage(input: &[Point3], n_s: usize, cfg: &SkeletonizeConfig) -> Result<(Vec<Point3>, StageTrace)> {
    let cloud = PointCloud::new(input.to_vec())?;
    if n_s > input.len() {
        return Err(Error::TooFew {
            requested: n_s,
            available: input.len(),
        });
    }
    let init = fps(&cloud, n_s, 0)?;
    let index = SpatialIndex::new(input);
    let k = cfg.k.min(input.len());
    let mut positions: Vec<Point3> = init.iter().map(|&i| input[i]).collect();
    let mut rounds = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let sets: Vec<Vec<usize>> = positions
            .par_iter()
            .map(|&p| cluster_members(p, &index, k, cfg.eps, cfg.min_pts.min(k)))
            .collect::<Result<_>>()?;
        positions = sets
            .iter()
            .map(|s| geom::centroid(s.iter().map(|&i| &input[i])).expect("non-empty cluster"))
            .collect();
        rounds.push(sets);
    }
    Ok((
        positions,
        StageTrace {
            input_len: input.len(),
            init,
            rounds,
        },
    ))
}

/// Distance from each skeletal point to its nearest surface point.
pub fn compute_radii(points: &[Point3], pc: &PointCloud) -> Result<Vec<f64>> {
    pc.require_non_empty()?;
    Ok(SpatialIndex::new(pc.points()).nearest_distances(points))
}

/// Skeletonizes `pc`, dispatching on `cfg.hierarchical`, and returns the
/// recorded memberships alongside the skeleton.
pub fn skeletonize_traced(pc: &PointCloud, cfg: &SkeletonizeConfig) -> Result<(Skeleton, SkeletonTrace)> {
    cfg.validate()?;
    pc.require_non_empty()?;
    let mut stages = Vec::new();
    let positions = if cfg.hierarchical {
        let wide = 4 * cfg.n_s;
        if wide > pc.len() {
            return Err(Error::TooFew {
                requested: wide,
                available: pc.len(),
            });
        }
        let (mid, t1) = run_stage(pc.points(), wide, cfg)?;
        stages.push(t1);
        let (out, t2) = run_stage(&mid, cfg.n_s, cfg)?;
        stages.push(t2);
        out
    } else {
        let (out, t) = run_stage(pc.points(), cfg.n_s, cfg)?;
        stages.push(t);
        out
    };
    let radii = compute_radii(&positions, pc)?;
    Ok((Skeleton { points: positions, radii }, SkeletonTrace { stages }))
}

pub fn skeletonize(pc: &PointCloud, cfg: &SkeletonizeConfig) -> Result<Skeleton> {
    skeletonize_traced(pc, cfg).map(|(s, _)| s)
}

/// Two-stage skeletonization: `4 n_s` intermediate points from the surface,
/// then `n_s` from the intermediate set. Radii are measured against `pc`.
pub fn hierarchical_skeletonize(pc: &PointCloud, cfg: &SkeletonizeConfig) -> Result<Skeleton> {
    let cfg = SkeletonizeConfig {
        hierarchical: true,
        ..cfg.clone()
    };
    skeletonize(pc, &cfg)
}

/// Compares the exact Jacobian-vector product of the frozen-membership map
/// with central finite differences of the full procedure along `direction`.
/// Returns the relative error `|fd - jvp| / max(|fd|, |jvp|)` over all
/// coordinates, or [`Error::NonSmoothPoint`] if any membership changes
/// within `step`.
pub fn skeletonize_jacobian_check(
    pc: &PointCloud,
    cfg: &SkeletonizeConfig,
    direction: &[Point3],
    step: f64,
) -> Result<f64> {
    if direction.len() != pc.len() {
        return Err(Error::shape(format!(
            "direction has {} rows for {} points",
            direction.len(),
            pc.len()
        )));
    }
    let (_, trace) = skeletonize_traced(pc, cfg)?;
    let shifted = |sign: f64| -> Result<(Skeleton, SkeletonTrace)> {
        let pts = pc
            .points()
            .iter()
            .zip(direction)
            .map(|(&p, &d)| geom::add(p, geom::scale(d, sign * step)))
            .collect();
        skeletonize_traced(&PointCloud::new(pts)?, cfg)
    };
    let (plus, trace_plus) = shifted(1.0)?;
    let (minus, trace_minus) = shifted(-1.0)?;
    if trace_plus != trace || trace_minus != trace {
        return Err(Error::NonSmoothPoint);
    }
    let jvp = trace.jvp(direction);
    let mut diff2 = 0.0;
    let mut fd2 = 0.0;
    let mut an2 = 0.0;
    for ((a, b), j) in plus.points.iter().zip(&minus.points).zip(&jvp) {
        for c in 0..3 {
            let fd = (a[c] - b[c]) / (2.0 * step);
            diff2 += (fd - j[c]).powi(2);
            fd2 += fd * fd;
            an2 += j[c] * j[c];
        }
    }
    let denom = fd2.max(an2).sqrt();
    Ok(if denom == 0.0 { 0.0 } else { diff2.sqrt() / denom })
}
