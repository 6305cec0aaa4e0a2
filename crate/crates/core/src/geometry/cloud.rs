use std::sync::OnceLock;

use rayon::prelude::*;

use super::spatial::KdTree;
use crate::error::{FlatnessError, Result};

/// Relative slack used for closed-ball membership tests.
pub(crate) const BALL_REL_TOL: f64 = 1e-9;

/// A finite sample of a set in R^d, stored as a flat coordinate buffer.
#[derive(Debug, Clone)]
pub struct PointCloud {
    coords: Vec<f64>,
    dim: usize,
    spacing: f64,
    tree: OnceLock<KdTree>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(FlatnessError::EmptyInput("point cloud"))?.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(FlatnessError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(coords, dim)
    }

    /// Builds a cloud and measures its spacing as the largest
    /// nearest-neighbour distance.
    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        let mut cloud = Self::unmeasured(coords, dim)?;
        cloud.spacing = cloud.measure_spacing();
        Ok(cloud)
    }

    /// Builds a cloud with a caller-supplied spacing, which must be an upper
    /// bound for the largest nearest-neighbour distance.
    pub fn with_spacing(coords: Vec<f64>, dim: usize, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(crate::error::invalid("spacing", "must be positive and finite"));
        }
        let mut cloud = Self::unmeasured(coords, dim)?;
        cloud.spacing = spacing;
        Ok(cloud)
    }

    fn unmeasured(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(crate::error::invalid("dim", "must be at least 1"));
        }
        if coords.is_empty() {
            return Err(FlatnessError::EmptyInput("point cloud"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(FlatnessError::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(FlatnessError::NonFinite(pos / dim));
        }
        Ok(PointCloud {
            coords,
            dim,
            spacing: f64::MIN_POSITIVE,
            tree: OnceLock::new(),
        })
    }

    fn measure_spacing(&self) -> f64 {
        let tree = self.tree();
        let worst = (0..self.len())
            .into_par_iter()
            .map(|i| {
                tree.nearest_other(&self.coords, self.point(i), i)
                    .map_or(0.0, |(_, d)| d)
            })
            .reduce(|| 0.0, f64::max);
        if worst > 0.0 {
            worst
        } else {
            f64::MIN_POSITIVE
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Largest nearest-neighbour gap (or the supplied upper bound for it).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn tree(&self) -> &KdTree {
        self.tree.get_or_init(|| KdTree::build(&self.coords, self.dim))
    }

    /// Indices of the samples in the closed ball `B_r(center)`, ascending.
    pub fn ball(&self, center: &[f64], r: f64) -> Vec<usize> {
        self.tree()
            .within(&self.coords, center, r * (1.0 + BALL_REL_TOL))
    }

    pub fn nearest(&self, q: &[f64]) -> (usize, f64) {
        self.tree()
            .nearest(&self.coords, q)
            .expect("point clouds are nonempty")
    }

    /// Applies `f` to every point; the spacing is rescaled by `spacing_factor`.
    pub fn map_points<F>(&self, spacing_factor: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut dim = None;
        for p in self.points() {
            let q = f(p);
            if *dim.get_or_insert(q.len()) != q.len() {
                return Err(FlatnessError::DimensionMismatch {
                    expected: dim.unwrap_or(0),
                    found: q.len(),
                });
            }
            coords.extend(q);
        }
        Self::with_spacing(coords, dim.unwrap_or(self.dim), self.spacing * spacing_factor)
    }

    /// Sub-cloud made of the given indices, keeping this cloud's spacing.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self::with_spacing(coords, self.dim, self.spacing)
    }
}

/// Hausdorff distance between two finite sets.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(FlatnessError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(directed(a, b).max(directed(b, a)))
}

fn directed(from: &PointCloud, to: &PointCloud) -> f64 {
    let tree = to.tree();
    (0..from.len())
        .into_par_iter()
        .map(|i| tree.nearest(to.coords(), from.point(i)).map_or(0.0, |(_, d)| d))
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[&[f64]]) -> PointCloud {
        PointCloud::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn hausdorff_examples() {
        let ab = cloud(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(hausdorff_distance(&ab, &ab).unwrap(), 0.0);
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[1.0, 0.0]]);
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 1.0);
        let a = cloud(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let b = cloud(&[&[1.0, 0.0]]);
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn hausdorff_dimension_mismatch() {
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[0.0, 0.0, 0.0]]);
        assert!(matches!(
            hausdorff_distance(&a, &b),
            Err(FlatnessError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_invalid_input() {
        assert!(matches!(
            PointCloud::new(vec![]),
            Err(FlatnessError::EmptyInput(_))
        ));
        assert!(matches!(
            PointCloud::new(vec![vec![0.0, 1.0], vec![f64::NAN, 0.0]]),
            Err(FlatnessError::NonFinite(1))
        ));
        assert!(matches!(
            PointCloud::new(vec![vec![0.0, 1.0], vec![0.0]]),
            Err(FlatnessError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spacing_is_max_nearest_gap() {
        let c = cloud(&[&[0.0], &[0.1], &[0.4], &[0.5]]);
        assert!((c.spacing() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ball_is_closed() {
        let c = cloud(&[&[0.0], &[0.1], &[0.3]]);
        assert_eq!(c.ball(&[0.0], 0.1), vec![0, 1]);
    }
}
