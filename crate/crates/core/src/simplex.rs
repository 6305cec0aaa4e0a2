//! Simplex volumes from pairwise distances, and the largest normalized
//! simplex spanned by sample points in a ball.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FlatnessError, Result};
use crate::geometry::PointCloud;

/// Vertices of an n-simplex in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simplex {
    vertices: Vec<Vec<f64>>,
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let d = vertices.first().ok_or(FlatnessError::EmptyInput("simplex"))?.len();
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != d {
                return Err(FlatnessError::DimensionMismatch { expected: d, found: v.len() });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(FlatnessError::NonFinite(i));
            }
        }
        if vertices.len() > d + 1 {
            return Err(invalid("vertices", format!("{} vertices exceed d + 1 = {}", vertices.len(), d + 1)));
        }
        Ok(Simplex { vertices })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Intrinsic dimension (number of vertices minus one).
    pub fn n(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn squared_distances(&self) -> DMatrix<f64> {
        let k = self.vertices.len();
        DMatrix::from_fn(k, k, |i, j| sq(&self.vertices[i], &self.vertices[j]))
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// n-volume of the simplex, computed from squared edge lengths only.
pub fn cayley_menger_volume(s: &Simplex) -> Result<f64> {
    volume_from_squared_distances(&s.squared_distances())
}

/// n-volume from the `(n+1) x (n+1)` matrix of squared distances through
/// `Vol^2 = (-1)^(n+1) / (2^n (n!)^2) * det(CM)`.
///
/// Slightly negative values (relative to the largest squared edge raised to
/// the n-th power) are clamped to zero; anything below that is reported as
/// inconsistent input.
pub fn volume_from_squared_distances(d2: &DMatrix<f64>) -> Result<f64> {
    let k = d2.nrows();
    if k == 0 || d2.ncols() != k {
        return Err(invalid("distances", "need a nonempty square matrix"));
    }
    if d2.iter().any(|v| !v.is_finite()) {
        return Err(FlatnessError::NonFinite(0));
    }
    let n = k - 1;
    if n == 0 {
        return Ok(0.0);
    }
    let mut cm = DMatrix::from_element(k + 1, k + 1, 1.0);
    cm[(0, 0)] = 0.0;
    for i in 0..k {
        for j in 0..k {
            cm[(i + 1, j + 1)] = d2[(i, j)];
        }
    }
    let det = cm.determinant();
    let sign = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
    let fact: f64 = (1..=n).map(|v| v as f64).product();
    let vol2 = sign * det / (f64::powi(2.0, n as i32) * fact * fact);
    let scale = d2.iter().fold(0.0f64, |m, v| m.max(*v)).powi(n as i32);
    if vol2 < 0.0 {
        if vol2 >= -1e-12 * scale.max(1.0) {
            return Ok(0.0);
        }
        return Err(FlatnessError::InconsistentDistances(det));
    }
    Ok(vol2.sqrt())
}

/// Largest normalized simplex volume `r^-n Vol_n` over vertices in `S ∩ B_r(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexVolume {
    pub value: f64,
    /// False when the maximum came from the local search instead of full
    /// enumeration.
    pub exact: bool,
}

const EXACT_LIMIT: usize = 40;
const DIAMETER_LIMIT: usize = 8192;
const SEARCH_POOL: usize = 1024;
const MAX_STARTS: usize = 48;

pub fn max_simplex_volume(s: &PointCloud, x: &[f64], r: f64, n: usize) -> Result<SimplexVolume> {
    if x.len() != s.dim() {
        return Err(FlatnessError::DimensionMismatch { expected: s.dim(), found: x.len() });
    }
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let ball = s.ball(x, r);
    if ball.len() < n + 1 || n > s.dim() {
        return Ok(SimplexVolume { value: 0.0, exact: true });
    }
    let pts: Vec<&[f64]> = ball.iter().map(|&i| s.point(i)).collect();
    let norm = r.powi(n as i32);
    if n == 1 && pts.len() <= DIAMETER_LIMIT {
        let mut best: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.max(sq(pts[i], pts[j]));
            }
        }
        return Ok(SimplexVolume { value: best.sqrt() / norm, exact: true });
    }
    if pts.len() <= EXACT_LIMIT {
        let best = enumerate_max(&pts, n)?;
        return Ok(SimplexVolume { value: best / norm, exact: true });
    }
    let pool: Vec<&[f64]> = if pts.len() > SEARCH_POOL {
        let picks = farthest_point_order(&pts, SEARCH_POOL);
        picks.into_iter().map(|i| pts[i]).collect()
    } else {
        pts
    };
    let best = local_search_max(&pool, n)?;
    Ok(SimplexVolume { value: best / norm, exact: false })
}

fn volume_of(pts: &[&[f64]], idx: &[usize]) -> Result<f64> {
    let k = idx.len();
    let d2 = DMatrix::from_fn(k, k, |i, j| sq(pts[idx[i]], pts[idx[j]]));
    volume_from_squared_distances(&d2)
}

fn enumerate_max(pts: &[&[f64]], n: usize) -> Result<f64> {
    let mut idx: Vec<usize> = (0..=n).collect();
    let m = pts.len();
    let mut best: f64 = 0.0;
    loop {
        best = best.max(volume_of(pts, &idx)?);
        // Advance to the next combination in lexicographic order.
        let mut k = n + 1;
        loop {
            if k == 0 {
                return Ok(best);
            }
            k -= 1;
            if idx[k] < m - (n + 1 - k) {
                idx[k] += 1;
                for t in k + 1..=n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Greedy farthest-point order starting from the first point.
pub(crate) fn farthest_point_order(pts: &[&[f64]], count: usize) -> Vec<usize> {
    let count = count.min(pts.len());
    let mut chosen = vec![0usize];
    let mut dist: Vec<f64> = pts.iter().map(|p| sq(p, pts[0])).collect();
    while chosen.len() < count {
        let (next, _) = dist
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        chosen.push(next);
        for (i, p) in pts.iter().enumerate() {
            dist[i] = dist[i].min(sq(p, pts[next]));
        }
    }
    chosen
}

fn local_search_max(pts: &[&[f64]], n: usize) -> Result<f64> {
    let stride = (pts.len() / MAX_STARTS).max(1);
    let mut overall: f64 = 0.0;
    for start in (0..pts.len()).step_by(stride) {
        // Greedy seed: repeatedly add the point maximizing the partial volume.
        let far = (0..pts.len())
            .max_by(|&a, &b| sq(pts[a], pts[start]).total_cmp(&sq(pts[b], pts[start])))
            .unwrap_or(0);
        let mut idx = vec![start, far];
        while idx.len() < n + 1 {
            let mut best = (0usize, -1.0);
            for c in 0..pts.len() {
                if idx.contains(&c) {
                    continue;
                }
                let mut trial = idx.clone();
                trial.push(c);
                let v = volume_of(pts, &trial)?;
                if v > best.1 {
                    best = (c, v);
                }
            }
            idx.push(best.0);
        }
        let mut current = volume_of(pts, &idx)?;
        loop {
            let mut improved = false;
            for slot in 0..idx.len() {
                for c in 0..pts.len() {
                    if idx.contains(&c) {
                        continue;
                    }
                    let old = idx[slot];
                    idx[slot] = c;
                    let v = volume_of(pts, &idx)?;
                    if v > current * (1.0 + 1e-12) {
                        current = v;
                        improved = true;
                    } else {
                        idx[slot] = old;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        overall = overall.max(current);
    }
    Ok(overall)
}
