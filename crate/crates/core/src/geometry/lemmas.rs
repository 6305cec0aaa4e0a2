use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::plane::{point_plane_distance, AffinePlane};
use crate::error::{invalid, FlatnessError, Result};

/// Measured Hausdorff distance between the two planes inside `B_4(0)`, and
/// its ratio to the witness tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameCloseReport {
    pub dh: f64,
    pub ratio: f64,
}

const FRAME_BALL: f64 = 4.0;
const FRAME_DEVIATION: f64 = 0.1;

/// Reconstructs the plane through the `n + 1` witnesses and measures
/// `d_H(G1 ∩ B_4(0), G2 ∩ B_4(0))`.
///
/// The frame condition is checked with the orthonormal frame closest to the
/// witness edge vectors (their polar factor).
pub fn verify_frame_close(g1: &AffinePlane, witnesses: &[Vec<f64>], eps: f64) -> Result<FrameCloseReport> {
    let n = g1.n();
    let d = g1.d();
    if witnesses.len() != n + 1 {
        return Err(invalid("witnesses", format!("need {} points, got {}", n + 1, witnesses.len())));
    }
    if !(eps > 0.0 && eps < 0.01) {
        return Err(invalid("eps", "must lie in (0, 1/100)"));
    }
    for w in witnesses {
        if w.len() != d {
            return Err(FlatnessError::DimensionMismatch { expected: d, found: w.len() });
        }
    }
    let x0 = &witnesses[0];
    let edges = DMatrix::from_fn(d, n, |i, j| witnesses[j + 1][i] - x0[i]);
    let gram = edges.transpose() * &edges;
    let volume = gram.determinant().max(0.0).sqrt();
    if volume <= 1e-9 {
        return Err(FlatnessError::DegenerateWitnesses { volume });
    }
    let eig = gram.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(FlatnessError::DegenerateWitnesses { volume });
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let polar = &edges * inv_sqrt;
    let deviation = (0..n)
        .map(|j| (edges.column(j) - polar.column(j)).norm())
        .fold(0.0, f64::max);
    if deviation > FRAME_DEVIATION {
        return Err(FlatnessError::FrameCondition { deviation });
    }
    for w in witnesses {
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1.0 + 1e-12 {
            return Err(invalid("witnesses", "must lie in the closed unit ball"));
        }
        let off = point_plane_distance(w, g1)?;
        if off > eps + 1e-12 {
            return Err(invalid("witnesses", format!("witness at distance {off} > eps from G1")));
        }
    }
    let g2 = AffinePlane::from_columns(x0, &edges)?;
    let dh = disk_hausdorff(g1, &g2, FRAME_BALL);
    Ok(FrameCloseReport { dh, ratio: dh / eps })
}

/// Hausdorff distance between `g1 ∩ B_R(0)` and `g2 ∩ B_R(0)`.
///
/// The distance to a convex set is convex, so each one-sided sup is attained
/// on the boundary sphere of the disk, which is sampled densely.
pub(crate) fn disk_hausdorff(g1: &AffinePlane, g2: &AffinePlane, radius: f64) -> f64 {
    let a = Disk::new(g1, radius);
    let b = Disk::new(g2, radius);
    match (a, b) {
        (Some(a), Some(b)) => a.directed(&b).max(b.directed(&a)),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

struct Disk {
    center: DVector<f64>,
    frame: DMatrix<f64>,
    radius: f64,
}

impl Disk {
    fn new(g: &AffinePlane, ball: f64) -> Option<Disk> {
        let origin = vec![0.0; g.d()];
        let center = DVector::from_vec(super::plane::project(g, &origin).ok()?);
        let c2 = center.norm_squared();
        if c2 > ball * ball {
            return None;
        }
        Some(Disk {
            center,
            frame: g.frame_matrix(),
            radius: (ball * ball - c2).sqrt(),
        })
    }

    fn nearest(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut z = self.frame.transpose() * (p - &self.center);
        let norm = z.norm();
        if norm > self.radius {
            z *= self.radius / norm;
        }
        &self.center + &self.frame * z
    }

    fn directed(&self, other: &Disk) -> f64 {
        sphere_directions(self.frame.ncols())
            .into_iter()
            .map(|u| {
                let p = &self.center + &self.frame * (u * self.radius);
                (&p - other.nearest(&p)).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Unit vectors densely covering the (n-1)-sphere.
fn sphere_directions(n: usize) -> Vec<DVector<f64>> {
    match n {
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..8192)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 8192.0;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            let per_edge = match n {
                3 => 64,
                4 => 16,
                _ => 6,
            };
            let mut out = Vec::new();
            for face in 0..n {
                for sign in [-1.0, 1.0] {
                    let others = n - 1;
                    let total = (per_edge + 1usize).pow(others as u32);
                    for code in 0..total {
                        let mut v = DVector::zeros(n);
                        let mut c = code;
                        let mut slot = 0;
                        for k in 0..n {
                            if k == face {
                                v[k] = sign;
                                continue;
                            }
                            let step = c % (per_edge + 1);
                            c /= per_edge + 1;
                            v[k] = -1.0 + 2.0 * step as f64 / per_edge as f64;
                            slot += 1;
                        }
                        debug_assert_eq!(slot, others);
                        out.push(v.normalize());
                    }
                }
            }
            out
        }
    }
}

/// A global isometry `I(z) = offset + frame * z` fitted to samples of a map
/// `B_r^n -> R^d`, with the measured sup deviation `|I - f|` on the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryFit {
    pub frame: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub deviation: f64,
}

impl IsometryFit {
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.offset.clone();
        for (col, &zk) in self.frame.iter().zip(z) {
            for (o, c) in out.iter_mut().zip(col) {
                *o += zk * c;
            }
        }
        out
    }
}

/// Builds an isometry anchored at the sample closest to the origin by
/// orthonormalizing the image of a well-spread frame of samples.
pub fn fit_isometry(samples: &[(Vec<f64>, Vec<f64>)], r: f64) -> Result<IsometryFit> {
    let (first_z, first_w) = samples.first().ok_or(FlatnessError::EmptyInput("samples"))?;
    let n = first_z.len();
    let d = first_w.len();
    if n == 0 || d < n {
        return Err(invalid("samples", format!("need 1 <= n <= d, got n={n}, d={d}")));
    }
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    for (z, w) in samples {
        if z.len() != n {
            return Err(FlatnessError::DimensionMismatch { expected: n, found: z.len() });
        }
        if w.len() != d {
            return Err(FlatnessError::DimensionMismatch { expected: d, found: w.len() });
        }
        if z.iter().map(|x| x * x).sum::<f64>().sqrt() > r * (1.0 + 1e-12) {
            return Err(invalid("samples", "domain point outside the closed r-ball"));
        }
    }
    let norm2 = |z: &[f64]| z.iter().map(|x| x * x).sum::<f64>();
    let anchor = (0..samples.len())
        .min_by(|&a, &b| norm2(&samples[a].0).total_cmp(&norm2(&samples[b].0)).then(a.cmp(&b)))
        .unwrap_or(0);
    let (z0, w0) = (&samples[anchor].0, &samples[anchor].1);

    // Greedily pick n samples maximizing the spanned volume of z - z0.
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = (usize::MAX, 0.0);
        for (i, (z, _)) in samples.iter().enumerate() {
            let mut v = DVector::from_iterator(n, z.iter().zip(z0).map(|(a, b)| a - b));
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
            let h = v.norm();
            if h > best.1 {
                best = (i, h);
            }
        }
        if best.0 == usize::MAX || best.1 <= 1e-12 * r {
            return Err(FlatnessError::InsufficientSamples { needed: n + 1, found: chosen.len() + 1 });
        }
        let z = &samples[best.0].0;
        let mut v = DVector::from_iterator(n, z.iter().zip(z0).map(|(a, b)| a - b));
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        basis.push(v.normalize());
        chosen.push(best.0);
    }
    let v = DMatrix::from_fn(n, n, |i, j| samples[chosen[j]].0[i] - z0[i]);
    let w = DMatrix::from_fn(d, n, |i, j| samples[chosen[j]].1[i] - w0[i]);
    let v_inv = v
        .try_inverse()
        .ok_or(FlatnessError::InsufficientSamples { needed: n + 1, found: n })?;
    let raw = w * v_inv;
    let frame = gram_schmidt_columns(&raw)
        .ok_or(FlatnessError::InsufficientSamples { needed: n + 1, found: n })?;
    let z0v = DVector::from_column_slice(z0);
    let offset = DVector::from_column_slice(w0) - &frame * z0v;
    let mut fit = IsometryFit {
        frame: frame.column_iter().map(|c| c.iter().copied().collect()).collect(),
        offset: offset.iter().copied().collect(),
        deviation: 0.0,
    };
    fit.deviation = samples
        .iter()
        .map(|(z, w)| {
            let iz = fit.apply(z);
            iz.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    Ok(fit)
}

fn gram_schmidt_columns(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut q = m.clone();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for k in 0..j {
                let c = q.column(k).dot(&q.column(j));
                let qk = q.column(k).clone_owned();
                let mut col = q.column_mut(j);
                col -= qk * c;
            }
        }
        let norm = q.column(j).norm();
        if norm <= 1e-12 * scale {
            return None;
        }
        q.column_mut(j).unscale_mut(norm);
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tilted_plane(theta: f64) -> AffinePlane {
        AffinePlane::new(
            vec![0.0; 3],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, theta.cos(), theta.sin()]],
        )
        .unwrap()
    }

    #[test]
    fn witnesses_on_plane_give_zero() {
        let g1 = tilted_plane(0.0);
        let w = vec![vec![0.0, 0.0, 0.0], vec![0.95, 0.0, 0.0], vec![0.0, 0.95, 0.0]];
        let rep = verify_frame_close(&g1, &w, 0.005).unwrap();
        assert!(rep.dh < 1e-12);
    }

    #[test]
    fn ratio_is_stable_under_tilt_halving() {
        let g1 = tilted_plane(0.0);
        let mut ratios = Vec::new();
        for k in 0..4 {
            let theta = 0.008 / f64::powi(2.0, k);
            let g2 = tilted_plane(theta);
            let w = vec![g2.embed(&[0.0, 0.0]), g2.embed(&[0.95, 0.0]), g2.embed(&[0.0, 0.95])];
            let eps = theta.sin() * 0.95 + 1e-15;
            let rep = verify_frame_close(&g1, &w, eps).unwrap();
            ratios.push(rep.ratio);
        }
        for pair in ratios.windows(2) {
            assert!((pair[0] / pair[1] - 1.0).abs() < 0.01, "{ratios:?}");
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
    }

    #[test]
    fn collinear_witnesses_are_degenerate() {
        let g1 = tilted_plane(0.0);
        let w = vec![vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 0.0], vec![0.9, 0.0, 0.0]];
        assert!(matches!(
            verify_frame_close(&g1, &w, 0.005),
            Err(FlatnessError::DegenerateWitnesses { .. })
        ));
    }

    #[test]
    fn frame_condition_is_enforced() {
        let g1 = tilted_plane(0.0);
        let w = vec![vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 0.0], vec![0.0, 0.5, 0.0]];
        assert!(matches!(
            verify_frame_close(&g1, &w, 0.005),
            Err(FlatnessError::FrameCondition { .. })
        ));
    }

    fn disk_samples(r: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for i in -10..=10 {
            for j in -10..=10 {
                let z = vec![i as f64 * r / 10.0, j as f64 * r / 10.0];
                if z[0].hypot(z[1]) <= r {
                    out.push(z);
                }
            }
        }
        out
    }

    #[test]
    fn exact_isometry_is_recovered() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let samples: Vec<_> = disk_samples(1.0)
            .into_iter()
            .map(|z| {
                let w = vec![c * z[0] - s * z[1] + 1.0, s * z[0] + c * z[1], 2.0];
                (z, w)
            })
            .collect();
        let fit = fit_isometry(&samples, 1.0).unwrap();
        assert!(fit.deviation <= 1e-12, "{}", fit.deviation);
    }

    #[test]
    fn scaling_map_deviation_obeys_square_root_bound() {
        let mut previous = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let samples: Vec<_> = disk_samples(1.0)
                .into_iter()
                .map(|z| {
                    let w = vec![(1.0 + eps) * z[0], (1.0 + eps) * z[1], 0.0];
                    (z, w)
                })
                .collect();
            let fit = fit_isometry(&samples, 1.0).unwrap();
            assert!(fit.deviation <= 10.0 * eps.sqrt());
            assert!(fit.deviation < previous);
            previous = fit.deviation;
        }
    }

    #[test]
    fn collinear_domain_is_rejected() {
        let samples = vec![
            (vec![0.0, 0.0], vec![0.0, 0.0, 0.0]),
            (vec![0.5, 0.0], vec![0.5, 0.0, 0.0]),
            (vec![1.0, 0.0], vec![1.0, 0.0, 0.0]),
        ];
        assert!(matches!(
            fit_isometry(&samples, 1.0),
            Err(FlatnessError::InsufficientSamples { .. })
        ));
    }
}
