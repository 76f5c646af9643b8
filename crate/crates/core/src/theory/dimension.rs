//! Box-counting estimate of the upper Minkowski dimension of a point cloud.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Dyadic side lengths `2^-2, ..., 2^-7`.
pub fn default_scales() -> Vec<f64> {
    (2..=7).map(|k| 2f64.powi(-k)).collect()
}

/// Number of axis-aligned boxes `Π [k_j ε, (k_j + 1) ε)` containing at least
/// one of the `dim`-dimensional rows of `points`.
pub fn box_count(points: &[f64], dim: usize, eps: f64) -> usize {
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    for row in points.chunks_exact(dim) {
        seen.insert(row.iter().map(|v| (v / eps).floor() as i64).collect());
    }
    seen.len()
}

/// Least-squares slope of `ln N(ε)` against `ln(1/ε)`.
///
/// Needs at least 100 points and at least three distinct scales spanning two
/// octaves or more.
pub fn minkowski_dimension(points: &[f64], dim: usize, scales: &[f64]) -> Result<f64> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::dim(format!(
            "{} values do not form rows of width {dim}",
            points.len()
        )));
    }
    let n = points.len() / dim;
    if n < 100 {
        return Err(Error::param(format!("need at least 100 points, got {n}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("points must be finite"));
    }
    let mut s: Vec<f64> = scales.to_vec();
    if s.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::param("scales must be positive and finite"));
    }
    s.sort_by(f64::total_cmp);
    s.dedup();
    if s.len() < 3 || s[s.len() - 1] / s[0] < 4.0 {
        return Err(Error::param(
            "need at least 3 distinct scales spanning at least 2 octaves",
        ));
    }
    let xs: Vec<f64> = s.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = s.iter().map(|&e| (box_count(points, dim, e) as f64).ln()).collect();
    Ok(ols_slope(&xs, &ys))
}

pub(crate) fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
