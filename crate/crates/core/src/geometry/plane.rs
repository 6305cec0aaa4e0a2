use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FlatnessError, Result};

const ORTHO_TOL: f64 = 1e-12;

/// An affine n-plane `base + span(frame)` in R^d with an orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePlane {
    base: Vec<f64>,
    frame: Vec<Vec<f64>>,
}

impl AffinePlane {
    /// Plane through `base` spanned by `directions`, which are
    /// orthonormalized here.
    pub fn new(base: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self> {
        let d = base.len();
        let n = directions.len();
        if n == 0 || n >= d {
            return Err(invalid("n", format!("need 1 <= n < d, got n={n}, d={d}")));
        }
        for v in &directions {
            if v.len() != d {
                return Err(FlatnessError::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        if base.iter().chain(directions.iter().flatten()).any(|c| !c.is_finite()) {
            return Err(FlatnessError::NonFinite(0));
        }
        let frame = orthonormalize(directions).ok_or(FlatnessError::DegenerateWitnesses { volume: 0.0 })?;
        Ok(AffinePlane { base, frame })
    }

    /// Plane from a `d x n` matrix whose columns span the direction space.
    pub fn from_columns(base: &[f64], columns: &DMatrix<f64>) -> Result<Self> {
        let directions = columns
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect();
        AffinePlane::new(base.to_vec(), directions)
    }

    /// Coordinate plane through `base` spanned by the first `n` axes.
    pub fn axis_aligned(base: Vec<f64>, n: usize) -> Result<Self> {
        let d = base.len();
        let directions = (0..n)
            .map(|k| {
                let mut e = vec![0.0; d];
                if k < d {
                    e[k] = 1.0;
                }
                e
            })
            .collect();
        AffinePlane::new(base, directions)
    }

    pub fn n(&self) -> usize {
        self.frame.len()
    }

    pub fn d(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    /// Frame as a `d x n` matrix.
    pub fn frame_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d(), self.n(), |i, j| self.frame[j][i])
    }

    /// Same direction space through a different base point.
    pub fn through(&self, base: &[f64]) -> Result<Self> {
        check_dim(self.d(), base.len())?;
        Ok(AffinePlane {
            base: base.to_vec(),
            frame: self.frame.clone(),
        })
    }

    /// Frame coordinates of `y - base`.
    pub fn coordinates(&self, y: &[f64]) -> Vec<f64> {
        self.frame
            .iter()
            .map(|e| e.iter().zip(y).zip(&self.base).map(|((e, y), b)| e * (y - b)).sum())
            .collect()
    }

    /// Point `base + frame * z`.
    pub fn embed(&self, z: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (e, &zk) in self.frame.iter().zip(z) {
            for (pi, ei) in p.iter_mut().zip(e) {
                *pi += zk * ei;
            }
        }
        p
    }

    /// Largest entrywise deviation of the frame Gram matrix from identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.frame.iter().enumerate() {
            for (j, b) in self.frame.iter().enumerate() {
                let g: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = y.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        for _ in 0..2 {
            for e in &self.frame {
                let c: f64 = e.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= c * ei;
                }
            }
        }
        v
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FlatnessError::DimensionMismatch { expected, found })
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
fn orthonormalize(mut vs: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let scale = vs
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for i in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let c: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = vs.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= c * b;
                }
            }
        }
        let norm = vs[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= ORTHO_TOL * scale {
            return None;
        }
        vs[i].iter_mut().for_each(|x| *x /= norm);
    }
    Some(vs)
}

/// Euclidean distance from `y` to the plane.
pub fn point_plane_distance(y: &[f64], g: &AffinePlane) -> Result<f64> {
    check_dim(g.d(), y.len())?;
    Ok(g.residual(y).iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Orthogonal projection of `y` onto the plane.
pub fn project(g: &AffinePlane, y: &[f64]) -> Result<Vec<f64>> {
    check_dim(g.d(), y.len())?;
    let r = g.residual(y);
    Ok(y.iter().zip(&r).map(|(a, b)| a - b).collect())
}

/// Sine of the largest principal angle between the direction spaces.
///
/// Evaluated as `max(|(I - P1) F2|, |(I - P2) F1|)` in spectral norm, so the
/// result is exactly symmetric.
pub fn plane_distance(g1: &AffinePlane, g2: &AffinePlane) -> Result<f64> {
    check_dim(g1.d(), g2.d())?;
    if g1.n() != g2.n() {
        return Err(invalid("n", format!("planes have dimensions {} and {}", g1.n(), g2.n())));
    }
    let f1 = g1.frame_matrix();
    let f2 = g2.frame_matrix();
    let s = one_sided_gap(&f1, &f2).max(one_sided_gap(&f2, &f1));
    Ok(s.clamp(0.0, 1.0))
}

/// Spectral norm of `(I - F1 F1^T) F2`.
pub(crate) fn one_sided_gap(f1: &DMatrix<f64>, f2: &DMatrix<f64>) -> f64 {
    let mut m = f2 - f1 * (f1.transpose() * f2);
    m -= f1 * (f1.transpose() * &m);
    spectral_norm(&m)
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 1 {
        return m.norm();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Slack of the Pythagoras-type inequality
/// `|x-y|^2 <= |P(x)-P(y)|^2 + |x-y|^2 (d(G1,G2) + d(y,G1)/|x-y|)^2`
/// with `P` the projection onto `g2`. Nonnegative up to roundoff.
pub fn pitagora_residual(g1: &AffinePlane, g2: &AffinePlane, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(g1.d(), x.len())?;
    check_dim(g1.d(), y.len())?;
    let off = point_plane_distance(x, g1)?;
    if off > 1e-9 {
        return Err(FlatnessError::NotOnPlane { distance: off });
    }
    let xy2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if xy2 == 0.0 {
        return Err(FlatnessError::CoincidentPoints);
    }
    let xy = xy2.sqrt();
    let px = project(g2, x)?;
    let py = project(g2, y)?;
    let proj2: f64 = px.iter().zip(&py).map(|(a, b)| (a - b) * (a - b)).sum();
    let tilt = plane_distance(g1, g2)? + point_plane_distance(y, g1)? / xy;
    Ok(proj2 + xy2 * tilt * tilt - xy2)
}

/// For `p` on `g1`, a point `q` of `g2` whose projection onto `g1` is `p`.
///
/// Solvable whenever `plane_distance(g1, g2) < 1`. Returns `q` and the
/// residual `|P1(q) - p|`.
pub fn projection_preimage(g1: &AffinePlane, g2: &AffinePlane, p: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_dim(g1.d(), g2.d())?;
    check_dim(g1.d(), p.len())?;
    if g1.n() != g2.n() {
        return Err(invalid("n", "planes must have equal dimension"));
    }
    let f1 = g1.frame_matrix();
    let f2 = g2.frame_matrix();
    let s = DVector::from_vec(g1.coordinates(p));
    let shift = DVector::from_vec(g1.coordinates(g2.base()));
    let m = f1.transpose() * &f2;
    let c = m
        .lu()
        .solve(&(s - shift))
        .ok_or(invalid("planes", "direction spaces are orthogonal"))?;
    let q = g2.embed(c.as_slice());
    let back = project(g1, &q)?;
    let residual = back.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok((q, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(base: &[f64], dir: &[f64]) -> AffinePlane {
        AffinePlane::new(base.to_vec(), vec![dir.to_vec()]).unwrap()
    }

    fn random_plane(rng: &mut ChaCha8Rng, n: usize, d: usize) -> AffinePlane {
        let base = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dirs = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        AffinePlane::new(base, dirs).unwrap()
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = AffinePlane::new(vec![0.0; 4], vec![vec![1.0, 1.0, 0.0, 0.0], vec![1.0, 0.0, 1.0, 2.0]]).unwrap();
        assert!(g.orthonormality_defect() <= 1e-12);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(AffinePlane::new(vec![0.0, 0.0], vec![]).is_err());
        assert!(AffinePlane::new(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(AffinePlane::new(vec![0.0; 3], vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn point_plane_distance_examples() {
        let x_axis = line(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(point_plane_distance(&[3.0, 0.0], &x_axis).unwrap(), 0.0);
        assert_eq!(point_plane_distance(&[0.0, 1.0], &x_axis).unwrap(), 1.0);
    }

    #[test]
    fn point_plane_distance_matches_net_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_plane(&mut rng, 2, 4);
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = point_plane_distance(&y, &g).unwrap();
        let step = 0.01;
        let z0 = g.coordinates(&y);
        let mut best = f64::INFINITY;
        for i in -100..=100 {
            for j in -100..=100 {
                let z = [z0[0] + i as f64 * step * 0.5, z0[1] + j as f64 * step * 0.5];
                let p = g.embed(&z);
                let dd = p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                best = best.min(dd);
            }
        }
        assert!(best >= exact - 1e-12);
        assert!(best <= exact + 2.0 * step);
    }

    #[test]
    fn project_examples() {
        let x_axis = line(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(project(&x_axis, &[1.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project(&x_axis, &[2.5, 0.0]).unwrap(), vec![2.5, 0.0]);
    }

    #[test]
    fn project_is_idempotent_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let g = random_plane(&mut rng, 2, 5);
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = project(&g, &y).unwrap();
            let pp = project(&g, &p).unwrap();
            for (a, b) in p.iter().zip(&pp) {
                assert!((a - b).abs() < 1e-12);
            }
            let dist = p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!((dist - point_plane_distance(&y, &g).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_distance_examples() {
        let a = line(&[0.0, 0.0], &[1.0, 0.0]);
        let b = line(&[1.0, 5.0], &[0.0, 1.0]);
        let t = std::f64::consts::FRAC_PI_6;
        let c = line(&[0.0, 0.0], &[t.cos(), t.sin()]);
        assert_eq!(plane_distance(&a, &a).unwrap(), 0.0);
        assert!((plane_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((plane_distance(&a, &c).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn plane_distance_is_symmetric_and_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let g1 = random_plane(&mut rng, 2, 4);
            let g2 = random_plane(&mut rng, 2, 4);
            let g3 = random_plane(&mut rng, 2, 4);
            let d12 = plane_distance(&g1, &g2).unwrap();
            assert_eq!(d12, plane_distance(&g2, &g1).unwrap());
            let d13 = plane_distance(&g1, &g3).unwrap();
            let d23 = plane_distance(&g2, &g3).unwrap();
            assert!(d13 <= d12 + d23 + 1e-12);
        }
    }

    #[test]
    fn plane_distance_rejects_unequal_dimensions() {
        let a = line(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        let b = AffinePlane::axis_aligned(vec![0.0; 3], 2).unwrap();
        assert!(plane_distance(&a, &b).is_err());
    }

    #[test]
    fn pitagora_examples() {
        let x_axis = line(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(pitagora_residual(&x_axis, &x_axis, &[0.0, 0.0], &[0.5, 0.0]).unwrap(), 0.0);
        assert_eq!(pitagora_residual(&x_axis, &x_axis, &[0.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            pitagora_residual(&x_axis, &x_axis, &[0.0, 1.0], &[0.0, 0.0]),
            Err(FlatnessError::NotOnPlane { .. })
        ));
        assert!(matches!(
            pitagora_residual(&x_axis, &x_axis, &[0.0, 0.0], &[0.0, 0.0]),
            Err(FlatnessError::CoincidentPoints)
        ));
    }

    #[test]
    fn preimage_solves_projection_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut solved = 0;
        for _ in 0..200 {
            let g1 = random_plane(&mut rng, 2, 4);
            let g2 = random_plane(&mut rng, 2, 4);
            if plane_distance(&g1, &g2).unwrap() >= 0.999 {
                continue;
            }
            let z: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = g1.embed(&z);
            let (q, res) = projection_preimage(&g1, &g2, &p).unwrap();
            assert!(res <= 1e-9, "residual {res}");
            assert!(point_plane_distance(&q, &g2).unwrap() <= 1e-9);
            solved += 1;
        }
        assert!(solved > 150);
    }
}
