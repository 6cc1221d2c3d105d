//! Maximal (Pareto) points of planar point sets.
//!
//! `v` dominates `u` when `v != u`, `v.x >= u.x` and `v.y >= u.y`. Identical
//! copies of a point therefore never dominate one another: if one copy is
//! maximal, every copy is.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximaResult {
    /// Maximal points by descending x (ties by descending y).
    pub maxima: Vec<Point>,
    pub count: usize,
}

impl MaximaResult {
    fn from_points(maxima: Vec<Point>) -> Self {
        let count = maxima.len();
        MaximaResult { maxima, count }
    }
}

#[inline]
pub fn dominates(v: Point, u: Point) -> bool {
    v != u && v.x >= u.x && v.y >= u.y
}

fn check(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(p) = points.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::param("points", format!("non-finite point ({}, {})", p.x, p.y)));
    }
    Ok(())
}

#[inline]
fn by_x_then_y_desc(a: &Point, b: &Point) -> std::cmp::Ordering {
    b.x.total_cmp(&a.x).then(b.y.total_cmp(&a.y))
}

/// Indices of the maximal points, in sweep order (descending x, then y).
pub fn maximal_indices(points: &[Point]) -> Result<Vec<usize>> {
    check(points)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_unstable_by(|&i, &j| by_x_then_y_desc(&points[i], &points[j]).then(i.cmp(&j)));
    let mut out = Vec::new();
    sweep(order.iter().map(|&i| (points[i], i)), |i| out.push(i));
    Ok(out)
}

/// Staircase sweep over points already sorted by descending x then y.
/// `emit` receives the payload of each maximal point.
fn sweep<T>(sorted: impl Iterator<Item = (Point, T)>, mut emit: impl FnMut(T)) {
    let mut best_y = f64::NEG_INFINITY;
    let mut group_top: Option<Point> = None;
    let mut group_is_max = false;
    for (p, payload) in sorted {
        match group_top {
            Some(top) if top.x == p.x => {
                // Same column: only copies of the column top survive.
                if group_is_max && p == top {
                    emit(payload);
                }
            }
            _ => {
                if let Some(top) = group_top {
                    best_y = best_y.max(top.y);
                }
                group_top = Some(p);
                group_is_max = p.y > best_y;
                if group_is_max {
                    emit(payload);
                }
            }
        }
    }
}

/// Maximal points by sort-and-sweep in O(n log n).
pub fn maximal_points(points: &[Point]) -> Result<MaximaResult> {
    check(points)?;
    let mut sorted = points.to_vec();
    sorted.sort_unstable_by(by_x_then_y_desc);
    let mut out = Vec::new();
    sweep(sorted.iter().map(|&p| (p, p)), |p| out.push(p));
    Ok(MaximaResult::from_points(out))
}

/// Maximal points by the all-pairs test in O(n²).
pub fn maximal_points_bruteforce(points: &[Point]) -> Result<MaximaResult> {
    check(points)?;
    let mut out: Vec<Point> = points
        .iter()
        .copied()
        .filter(|&u| !points.iter().any(|&v| dominates(v, u)))
        .collect();
    out.sort_by(by_x_then_y_desc);
    Ok(MaximaResult::from_points(out))
}

/// Number of extreme directions used by [`count_maxima`] to prune points.
const PROBES: usize = 8;

/// Number of maximal points, reusing `points` as scratch space (it is
/// reordered and truncated).
///
/// Maximisers of `x cos t + y sin t` for a few directions in the open first
/// quadrant are themselves maximal; every point dominated by one of them is
/// dropped before the sort, which leaves a thin band along the staircase.
pub fn count_maxima(points: &mut Vec<Point>) -> Result<usize> {
    check(points)?;
    let dirs: [(f64, f64); PROBES] = std::array::from_fn(|k| {
        let t = std::f64::consts::FRAC_PI_2 * (k as f64 + 0.5) / PROBES as f64;
        (t.cos(), t.sin())
    });
    let mut probes = [points[0]; PROBES];
    let mut scores = [f64::NEG_INFINITY; PROBES];
    for &p in points.iter() {
        for k in 0..PROBES {
            let s = dirs[k].0 * p.x + dirs[k].1 * p.y;
            if s > scores[k] {
                scores[k] = s;
                probes[k] = p;
            }
        }
    }
    points.retain(|&p| !probes.iter().any(|&v| dominates(v, p)));
    points.sort_unstable_by(by_x_then_y_desc);
    let mut count = 0usize;
    sweep(points.iter().map(|&p| (p, ())), |_| count += 1);
    Ok(count)
}
