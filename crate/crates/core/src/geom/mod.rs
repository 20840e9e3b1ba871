//! Point containers and the geometric primitives shared by every stage of
//! the pipeline: normalization, farthest point sampling, nearest-neighbor
//! search and density clustering.

mod dbscan;
mod kdtree;

pub use dbscan::dbscan;
pub use kdtree::SpatialIndex;

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Half-width of the normalized bounding box along its longest axis.
pub const UNIT_CUBE_HALF_EXTENT: f64 = 0.9;

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: Point3, b: Point3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

#[inline]
pub fn dist(a: Point3, b: Point3) -> f64 {
    dist2(a, b).sqrt()
}

/// Arithmetic mean of a non-empty set of points, summed in slice order.
pub fn centroid<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Point3> {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for p in points {
        acc = add(acc, *p);
        n += 1;
    }
    (n > 0).then(|| scale(acc, 1.0 / n as f64))
}

/// Axis-aligned bounding box as `(min, max)` corners.
pub fn bounding_box(points: &[Point3]) -> Option<(Point3, Point3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| {
        (
            [lo[0].min(p[0]), lo[1].min(p[1]), lo[2].min(p[2])],
            [hi[0].max(p[0]), hi[1].max(p[1]), hi[2].max(p[2])],
        )
    }))
}

/// Ordered list of 3D positions with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }
}

impl AsRef<[Point3]> for PointCloud {
    fn as_ref(&self) -> &[Point3] {
        &self.points
    }
}

/// Maps normalized coordinates back to the source frame:
/// `source = normalized / scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub offset: Point3,
}

impl NormalizationTransform {
    pub fn apply(&self, p: Point3) -> Point3 {
        scale(sub(p, self.offset), self.scale)
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        add(scale(p, 1.0 / self.scale), self.offset)
    }
}

/// Centers the bounding box at the origin and scales the longest axis to
/// span `[-0.9, 0.9]`.
pub fn normalize_unit_cube(pc: &PointCloud) -> Result<(PointCloud, NormalizationTransform)> {
    pc.require_non_empty()?;
    let (lo, hi) = bounding_box(pc.points()).expect("non-empty");
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if extent <= 0.0 {
        return Err(Error::DegenerateExtent);
    }
    let transform = NormalizationTransform {
        scale: 2.0 * UNIT_CUBE_HALF_EXTENT / extent,
        offset: scale(add(lo, hi), 0.5),
    };
    let points = pc.points().iter().map(|&p| transform.apply(p)).collect();
    Ok((PointCloud { points }, transform))
}

/// Farthest point sampling starting from `start`. Ties go to the lowest index.
pub fn fps(pc: &PointCloud, n: usize, start: usize) -> Result<Vec<usize>> {
    let pts = pc.points();
    if n == 0 || n > pts.len() {
        return Err(Error::TooFew {
            requested: n,
            available: pts.len(),
        });
    }
    if start >= pts.len() {
        return Err(Error::IndexOutOfRange {
            index: start,
            len: pts.len(),
        });
    }
    let mut selected = Vec::with_capacity(n);
    let mut min_d2 = vec![f64::INFINITY; pts.len()];
    let mut current = start;
    selected.push(current);
    while selected.len() < n {
        let anchor = pts[current];
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, (p, d)) in pts.iter().zip(min_d2.iter_mut()).enumerate() {
            let d2 = dist2(*p, anchor);
            if d2 < *d {
                *d = d2;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        current = best.1;
        selected.push(current);
    }
    Ok(selected)
}
