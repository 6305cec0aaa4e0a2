use serde::{Deserialize, Serialize};

use crate::error::{invalid, FlatnessError, Result};
use crate::geometry::net::ball_lattice;
use crate::geometry::PointCloud;

/// Default cap on the number of points of a Euclidean ball net.
pub const DEFAULT_NET_CAP: usize = 1_000_000;

/// A finite metric space addressed by point index.
pub trait MetricSpace {
    fn len(&self) -> usize;
    fn dist(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn diameter(&self) -> f64 {
        let k = self.len();
        let mut best: f64 = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                best = best.max(self.dist(i, j));
            }
        }
        best
    }
}

/// A metric space stored as a full distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    size: usize,
    dist: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl FiniteMetricSpace {
    /// Validates and wraps a row-major `size x size` matrix: zero diagonal,
    /// exact symmetry, nonnegative entries and the triangle inequality up to
    /// `1e-9` relative to the largest entry.
    pub fn new(size: usize, dist: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(FlatnessError::EmptyInput("metric space"));
        }
        if dist.len() != size * size {
            return Err(FlatnessError::DimensionMismatch { expected: size * size, found: dist.len() });
        }
        if let Some(k) = dist.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(FlatnessError::NonFinite(k / size));
        }
        let scale = dist.iter().copied().fold(0.0, f64::max).max(1.0);
        for i in 0..size {
            if dist[i * size + i] != 0.0 {
                return Err(invalid("dist", format!("nonzero diagonal entry at {i}")));
            }
            for j in 0..size {
                if dist[i * size + j] != dist[j * size + i] {
                    return Err(invalid("dist", format!("asymmetric entry ({i}, {j})")));
                }
            }
        }
        for i in 0..size {
            for j in 0..size {
                for k in 0..size {
                    if dist[i * size + j] > dist[i * size + k] + dist[k * size + j] + 1e-9 * scale {
                        return Err(invalid("dist", format!("triangle inequality fails at ({i}, {k}, {j})")));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { size, dist, labels: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        FiniteMetricSpace::new(rows.len(), rows.concat())
    }

    /// Euclidean distances between points given as rows.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        if points.is_empty() {
            return Err(FlatnessError::EmptyInput("metric space"));
        }
        let d = points[0].as_ref().len();
        let mut flat = Vec::with_capacity(points.len() * d);
        for p in points {
            let p = p.as_ref();
            if p.len() != d {
                return Err(FlatnessError::DimensionMismatch { expected: d, found: p.len() });
            }
            flat.extend_from_slice(p);
        }
        Ok(euclidean_matrix(&flat, d))
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.size {
            return Err(FlatnessError::DimensionMismatch { expected: self.size, found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.size..(i + 1) * self.size]
    }

    /// The subspace on the given points, in the given order.
    pub fn subspace(&self, idx: &[usize]) -> FiniteMetricSpace {
        let k = idx.len();
        let mut dist = vec![0.0; k * k];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                dist[a * k + b] = self.dist[i * self.size + j];
            }
        }
        FiniteMetricSpace {
            size: k,
            dist,
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }
}

impl MetricSpace for FiniteMetricSpace {
    fn len(&self) -> usize {
        self.size
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.size + j]
    }
}

pub(crate) fn euclidean_matrix(flat: &[f64], d: usize) -> FiniteMetricSpace {
    let k = flat.len() / d;
    let mut dist = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let v = flat[i * d..(i + 1) * d]
                .iter()
                .zip(&flat[j * d..(j + 1) * d])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist[i * k + j] = v;
            dist[j * k + i] = v;
        }
    }
    FiniteMetricSpace { size: k, dist, labels: None }
}

/// Points of R^n with the Euclidean metric, distances computed on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanSample {
    dim: usize,
    coords: Vec<f64>,
}

impl EuclideanSample {
    pub fn new(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(invalid("dim", "coordinate count is not a multiple of dim"));
        }
        Ok(EuclideanSample { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_finite(&self) -> FiniteMetricSpace {
        euclidean_matrix(&self.coords, self.dim)
    }
}

impl MetricSpace for EuclideanSample {
    fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// The sample points in the closed ball `B_r(x)` with their Euclidean
/// distances, labelled by sample index.
pub fn restrict_metric(s: &PointCloud, x: &[f64], r: f64) -> Result<FiniteMetricSpace> {
    if x.len() != s.dim() {
        return Err(FlatnessError::DimensionMismatch { expected: s.dim(), found: x.len() });
    }
    let idx = s.ball(x, r);
    if idx.is_empty() {
        return Err(FlatnessError::EmptyBall { radius: r });
    }
    let flat: Vec<f64> = idx.iter().flat_map(|&i| s.point(i).iter().copied()).collect();
    euclidean_matrix(&flat, s.dim()).with_labels(idx)
}

/// An `h`-net of the closed ball `B_r(0)` in R^n built from a cubic lattice.
pub fn euclidean_ball_net(n: usize, r: f64, h: f64) -> Result<EuclideanSample> {
    euclidean_ball_net_capped(n, r, h, DEFAULT_NET_CAP)
}

pub fn euclidean_ball_net_capped(n: usize, r: f64, h: f64, cap: usize) -> Result<EuclideanSample> {
    if !(h > 0.0 && h < r) {
        return Err(invalid("h", "need 0 < h < r"));
    }
    EuclideanSample::new(ball_lattice(n, r, h, cap)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_metrics() {
        assert!(FiniteMetricSpace::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(FiniteMetricSpace::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        let bad = [vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::from_rows(&bad).is_err());
    }

    #[test]
    fn restriction_of_two_points() {
        let s = PointCloud::with_spacing(vec![0.0, 0.0, 0.3, 0.0, 5.0, 0.0], 2, 0.01).unwrap();
        let m = restrict_metric(&s, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(m.size(), 2);
        assert_eq!(m.row(0), &[0.0, 0.3]);
        assert_eq!(m.labels(), Some(&[0, 1][..]));
        let single = restrict_metric(&s, &[5.0, 0.0], 0.1).unwrap();
        assert_eq!(single.row(0), &[0.0]);
    }

    #[test]
    fn segment_net() {
        let net = euclidean_ball_net(1, 1.0, 0.5).unwrap();
        assert_eq!(net.coords(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(euclidean_ball_net(1, 1.0, 1.5).is_err());
    }
}
