use super::{dist2, Point3, SpatialIndex};
use crate::error::{Error, Result};

/// Density clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Border points reachable from several
/// clusters join the one holding their lowest-index core neighbor. Returns `None` for noise and
/// `Some(cluster)` otherwise; clusters are numbered by their lowest member
/// index.
pub fn dbscan(points: &[Point3], eps: f64, min_pts: usize) -> Result<Vec<Option<usize>>> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("dbscan eps must be positive, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::invalid("dbscan min_pts must be at least 1"));
    }
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = if n <= 64 {
        let e2 = eps * eps;
        (0..n)
            .map(|i| (0..n).filter(|&j| dist2(points[i], points[j]) <= e2).collect())
            .collect()
    } else {
        let index = SpatialIndex::new(points);
        points.iter().map(|&p| index.within_radius(p, eps)).collect()
    };

    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut clusters = 0usize;
    let mut stack = Vec::new();
    for seed in 0..n {
        if !core[seed] || labels[seed].is_some() {
            continue;
        }
        let id = clusters;
        clusters += 1;
        labels[seed] = Some(id);
        stack.push(seed);
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if core[q] && labels[q].is_none() {
                    labels[q] = Some(id);
                    stack.push(q);
                }
            }
        }
    }
    // border points join the cluster of their lowest-index core neighbor
    for i in 0..n {
        if !core[i] {
            labels[i] = neighbors[i].iter().find(|&&q| core[q]).and_then(|&q| labels[q]);
        }
    }

    // renumber by lowest member index
    let mut first = vec![usize::MAX; clusters];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = *l {
            first[c] = first[c].min(i);
        }
    }
    let mut by_first: Vec<usize> = (0..clusters).collect();
    by_first.sort_by_key(|&c| first[c]);
    let mut remap = vec![0; clusters];
    for (new, &old) in by_first.iter().enumerate() {
        remap[old] = new;
    }
    Ok(labels.into_iter().map(|l| l.map(|c| remap[c])).collect())
}
