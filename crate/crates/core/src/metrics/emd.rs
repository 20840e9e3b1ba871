//! Earth mover's distance between equal-size clouds: an exact assignment
//! solver for small sets and an ε-scaling auction with a duality gap
//! certificate for large ones.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{dist, PointCloud};

/// Largest size solved exactly.
pub const EXACT_EMD_LIMIT: usize = 1024;
const TARGET_GAP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct EmdResult {
    /// Mean matched Euclidean distance.
    pub value: f64,
    /// `assignment[i]` is the point of `b` matched to point `i` of `a`.
    pub assignment: Vec<usize>,
    /// Certified relative gap to the optimum; 0 for the exact solver.
    pub gap: f64,
}

/// Minimum-cost perfect matching on a square cost matrix (row-major),
/// O(n³) shortest augmenting paths with potentials. Returns `col[row]`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    // 1-based arrays with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        col[row_of[j] - 1] = j - 1;
    }
    col
}

fn cost_matrix(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let (pa, pb) = (a.points(), b.points());
    let n = pb.len();
    let mut out = vec![0.0; pa.len() * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, c) in row.iter_mut().enumerate() {
            *c = dist(pa[i], pb[j]);
        }
    });
    out
}

fn check_sizes(a: &PointCloud, b: &PointCloud) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("EMD needs equal sizes, got {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(a.len())
}

fn matched_mean(cost: &[f64], n: usize, assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64
}

pub fn emd_exact(a: &PointCloud, b: &PointCloud) -> Result<EmdResult> {
    let n = check_sizes(a, b)?;
    let cost = cost_matrix(a, b);
    let assignment = hungarian(&cost, n);
    Ok(EmdResult {
        value: matched_mean(&cost, n, &assignment),
        assignment,
        gap: 0.0,
    })
}

/// Dual lower bound `Σ_j v_j + Σ_i min_j (c_ij − v_j)` for any potentials `v`.
fn dual_bound(cost: &[f64], n: usize, v: &[f64]) -> f64 {
    let rows: f64 = cost
        .par_chunks(n)
        .map(|row| row.iter().zip(v).map(|(c, vj)| c - vj).fold(f64::INFINITY, f64::min))
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    rows + v.iter().sum::<f64>()
}

/// ε-scaling auction (Gauss–Seidel bidding). Stops once the certified gap
/// `(primal − dual) / primal` is at most `target_gap`.
pub fn emd_auction(a: &PointCloud, b: &PointCloud, target_gap: f64) -> Result<EmdResult> {
    let n = check_sizes(a, b)?;
    let cost = cost_matrix(a, b);
    let max_c = cost.iter().cloned().fold(0.0, f64::max);
    if max_c == 0.0 {
        return Ok(EmdResult {
            value: 0.0,
            assignment: (0..n).collect(),
            gap: 0.0,
        });
    }
    // Benefit a_ij = −c_ij; prices p_j; objects go to the highest bidder.
    let mut price = vec![0.0; n];
    let mut eps = max_c / 4.0;
    let floor = max_c * 1e-12 / n as f64;
    loop {
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut assigned: Vec<Option<usize>> = vec![None; n];
        let mut queue: Vec<usize> = (0..n).rev().collect();
        while let Some(i) = queue.pop() {
            let row = &cost[i * n..(i + 1) * n];
            let (mut best, mut v1, mut v2) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (j, c) in row.iter().enumerate() {
                let val = -c - price[j];
                if val > v1 {
                    v2 = v1;
                    v1 = val;
                    best = j;
                } else if val > v2 {
                    v2 = val;
                }
            }
            let bump = if v2.is_finite() { v1 - v2 + eps } else { eps };
            price[best] += bump;
            if let Some(prev) = owner[best].replace(i) {
                assigned[prev] = None;
                queue.push(prev);
            }
            assigned[i] = Some(best);
        }
        let assignment: Vec<usize> = assigned.into_iter().map(|j| j.expect("auction assigns every row")).collect();
        let primal: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        let potentials: Vec<f64> = price.iter().map(|p| -p).collect();
        let dual = dual_bound(&cost, n, &potentials);
        let gap = if primal > 0.0 { ((primal - dual) / primal).max(0.0) } else { 0.0 };
        if gap <= target_gap || eps <= floor {
            return Ok(EmdResult {
                value: primal / n as f64,
                assignment,
                gap,
            });
        }
        eps /= 5.0;
    }
}

/// Exact up to [`EXACT_EMD_LIMIT`] points, certified auction above it.
pub fn emd(a: &PointCloud, b: &PointCloud) -> Result<EmdResult> {
    if a.len() <= EXACT_EMD_LIMIT {
        emd_exact(a, b)
    } else {
        emd_auction(a, b, TARGET_GAP)
    }
}
