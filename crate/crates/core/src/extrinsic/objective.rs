//! The local sample around a center and the two plane objectives on it.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use super::search::{Basis, Objective};
use crate::geometry::net::{ball_lattice, covering_radius};
use crate::geometry::spatial::KdTree;
use crate::geometry::PointCloud;

/// Coarsest net used while a branch-and-bound region is still large.
const COARSEST_NET: f64 = 0.25;
const NET_POINT_BUDGET: f64 = 2e5;

/// Points of `S ∩ B_r(x)` as `(y - x) / r`, expressed in the principal
/// axes of the ball so that searches seeded at the identity are equivariant
/// under rigid motions and scaling.
#[derive(Debug, Clone)]
pub(crate) struct LocalSample {
    pub d: usize,
    /// Working coordinates of the points the searches run on.
    pub w: Vec<f64>,
    /// Working coordinates of the whole ball when `w` is a subsample.
    pub full: Option<Vec<f64>>,
    /// Normalized covering radius of the subsample in the whole ball.
    pub rho: f64,
    /// Columns are the principal axes in ambient coordinates.
    pub axes: DMatrix<f64>,
    /// Ambient indices of the ball points, ascending.
    pub indices: Vec<usize>,
}

impl LocalSample {
    pub fn new(cloud: &PointCloud, x: &[f64], r: f64, cap: usize) -> LocalSample {
        let d = cloud.dim();
        let indices = cloud.ball(x, r);
        let mut v = Vec::with_capacity(indices.len() * d);
        for &i in &indices {
            v.extend(cloud.point(i).iter().zip(x).map(|(a, b)| (a - b) / r));
        }
        let axes = principal_axes(&v, d);
        let k = indices.len();
        let mut w = vec![0.0; k * d];
        for row in 0..k {
            let p = &v[row * d..(row + 1) * d];
            for j in 0..d {
                w[row * d + j] = axes.column(j).iter().zip(p).map(|(a, b)| a * b).sum();
            }
        }
        if k <= cap {
            return LocalSample {
                d,
                w,
                full: None,
                rho: 0.0,
                axes,
                indices,
            };
        }
        let kept = voxel_subsample(&w, d, cap);
        let mut sub = Vec::with_capacity(kept.len() * d);
        for &i in &kept {
            sub.extend_from_slice(&w[i * d..(i + 1) * d]);
        }
        let rho = covering(&w, &sub, d);
        LocalSample {
            d,
            w: sub,
            full: Some(w),
            rho,
            axes,
            indices,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len() / self.d
    }

    /// Working coordinates of every ball point.
    pub fn all_points(&self) -> &[f64] {
        self.full.as_deref().unwrap_or(&self.w)
    }

    /// Ambient direction of working-coordinate vector `u`.
    pub fn to_ambient(&self, u: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.axes[(i, j)] * u[j]).sum())
            .collect()
    }
}

fn principal_axes(v: &[f64], d: usize) -> DMatrix<f64> {
    let mut cov: DMatrix<f64> = DMatrix::zeros(d, d);
    for p in v.chunks_exact(d) {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += p[i] * p[j];
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut axes = DMatrix::zeros(d, d);
    for (slot, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let skew: f64 = v
            .chunks_exact(d)
            .map(|p| col.iter().zip(p).map(|(a, b)| a * b).sum::<f64>().powi(3))
            .sum();
        let anchor = col.iter().copied().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
        if skew < 0.0 || (skew == 0.0 && anchor < 0.0) {
            col.neg_mut();
        }
        axes.set_column(slot, &col);
    }
    axes
}

/// Keeps the lowest-index point in each cell of a cubic grid, coarsening
/// the grid until at most `cap` points remain.
pub(crate) fn voxel_subsample(w: &[f64], d: usize, cap: usize) -> Vec<usize> {
    let k = w.len() / d;
    let mut cell = 2.0 / cap as f64;
    loop {
        let mut seen = std::collections::HashMap::new();
        let mut kept = Vec::new();
        for i in 0..k {
            let key: Vec<i64> = w[i * d..(i + 1) * d]
                .iter()
                .map(|c| (c / cell).floor() as i64)
                .collect();
            seen.entry(key).or_insert_with(|| {
                kept.push(i);
            });
        }
        if kept.len() <= cap {
            return kept;
        }
        cell *= 1.25;
    }
}

/// Largest distance from a point of `all` to its nearest point of `sub`.
pub(crate) fn covering(all: &[f64], sub: &[f64], d: usize) -> f64 {
    let tree = KdTree::build(sub, d);
    all.chunks_exact(d)
        .map(|p| tree.nearest(sub, p).map_or(0.0, |(_, dist)| dist))
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-plane coordinates and distance to the plane of one point.
fn split(basis: &Basis, n: usize, p: &[f64], z: &mut [f64]) -> f64 {
    for (j, zj) in z.iter_mut().enumerate().take(n) {
        *zj = dot(basis.col(j), p);
    }
    (n..basis.d())
        .map(|j| {
            let c = dot(basis.col(j), p);
            c * c
        })
        .sum::<f64>()
        .sqrt()
}

/// `sup_y d(y, V)` over the sample.
pub(crate) struct BetaObjective<'a> {
    pub w: &'a [f64],
    pub d: usize,
    pub n: usize,
}

impl Objective for BetaObjective<'_> {
    fn eval(&self, basis: &Basis, _radius: f64) -> (f64, f64) {
        let v = sup_distance(self.w, self.d, self.n, basis);
        (v, v)
    }
}

pub(crate) fn sup_distance(w: &[f64], d: usize, n: usize, basis: &Basis) -> f64 {
    w.chunks_exact(d)
        .map(|p| {
            (n..d)
                .map(|j| {
                    let c = dot(basis.col(j), p);
                    c * c
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Two-sided Hausdorff distance between the sample and `V ∩ B_1(0)`.
pub(crate) struct AlphaObjective<'a> {
    pub w: &'a [f64],
    pub d: usize,
    pub n: usize,
    h_final: f64,
    nets: Vec<OnceLock<Vec<f64>>>,
}

impl<'a> AlphaObjective<'a> {
    /// `h_final` is the normalized net resolution for n >= 2 (unused for
    /// lines, where the coverage term is computed exactly).
    pub fn new(w: &'a [f64], d: usize, n: usize, h_final: f64) -> Self {
        let h_final = h_final.max(min_net_resolution(n));
        let levels = if n >= 2 {
            ((COARSEST_NET / h_final).log2().ceil().max(0.0) as usize) + 1
        } else {
            0
        };
        AlphaObjective {
            w,
            d,
            n,
            h_final,
            nets: (0..levels).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn resolution(&self) -> f64 {
        self.h_final
    }

    fn net(&self, level: usize) -> (&[f64], f64) {
        let h = self.h_final * f64::powi(2.0, level as i32);
        let net = self.nets[level].get_or_init(|| {
            ball_lattice(self.n, 1.0, h, usize::MAX / 2).expect("net resolution is bounded below")
        });
        (net, covering_radius(self.n, h))
    }
}

/// Smallest resolution keeping the unit-ball net near the point budget.
pub(crate) fn min_net_resolution(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 / (NET_POINT_BUDGET.powf(1.0 / n as f64) - 1.0)
    }
}

impl Objective for AlphaObjective<'_> {
    fn eval(&self, basis: &Basis, radius: f64) -> (f64, f64) {
        let n = self.n;
        let k = self.w.len() / self.d;
        let mut z = vec![0.0; n];
        if n == 1 {
            let mut pairs = Vec::with_capacity(k);
            let mut beta: f64 = 0.0;
            for p in self.w.chunks_exact(self.d) {
                let h = split(basis, 1, p, &mut z);
                beta = beta.max(h);
                pairs.push((z[0], h * h));
            }
            let cod = line_coverage(&mut pairs, 1.0);
            let v = beta.max(cod);
            return (v, v);
        }
        let mut lifted = Vec::with_capacity(k * (n + 1));
        let mut beta: f64 = 0.0;
        for p in self.w.chunks_exact(self.d) {
            let h = split(basis, n, p, &mut z);
            beta = beta.max(h);
            lifted.extend_from_slice(&z);
            lifted.push(h);
        }
        let target = radius.min(COARSEST_NET).max(self.h_final);
        let level = ((target / self.h_final).log2().floor().max(0.0) as usize).min(self.nets.len() - 1);
        let (net, cover) = self.net(level);
        let tree = KdTree::build(&lifted, n + 1);
        let mut q = vec![0.0; n + 1];
        let mut cod: f64 = 0.0;
        for c in net.chunks_exact(n) {
            q[..n].copy_from_slice(c);
            if let Some((_, dist)) = tree.nearest(&lifted, &q) {
                cod = cod.max(dist);
            }
        }
        (beta.max(cod), beta.max(cod + cover))
    }
}

/// `max_{|t| <= half} min_y sqrt((t - t_y)^2 + h_y^2)` for pairs `(t_y, h_y^2)`,
/// through the lower envelope of the parabolas `(t - t_y)^2 + h_y^2`.
pub(crate) fn line_coverage(pairs: &mut [(f64, f64)], half: f64) -> f64 {
    if pairs.is_empty() {
        return f64::INFINITY;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    let mut starts: Vec<f64> = Vec::with_capacity(pairs.len());
    for &(t, h2) in pairs.iter() {
        if let Some(&(lt, _)) = hull.last() {
            if lt == t {
                continue;
            }
        }
        loop {
            match hull.last() {
                None => {
                    hull.push((t, h2));
                    starts.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&(pt, ph2)) => {
                    let s = 0.5 * (pt + t) + (h2 - ph2) / (2.0 * (t - pt));
                    if s <= *starts.last().unwrap_or(&f64::NEG_INFINITY) {
                        hull.pop();
                        starts.pop();
                        continue;
                    }
                    hull.push((t, h2));
                    starts.push(s);
                    break;
                }
            }
        }
    }
    let value = |i: usize, t: f64| (t - hull[i].0) * (t - hull[i].0) + hull[i].1;
    let active = |t: f64| starts.partition_point(|&s| s <= t).saturating_sub(1);
    let mut best = value(active(-half), -half).max(value(active(half), half));
    for i in 1..hull.len() {
        let s = starts[i];
        if s > -half && s < half {
            best = best.max(value(i, s));
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_coverage(pairs: &[(f64, f64)], half: f64) -> f64 {
        (0..=20000)
            .map(|k| {
                let t = -half + 2.0 * half * k as f64 / 20000.0;
                pairs
                    .iter()
                    .map(|&(ty, h2)| ((t - ty) * (t - ty) + h2).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn line_coverage_matches_dense_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let k = rng.random_range(1..30);
            let mut pairs: Vec<(f64, f64)> = (0..k)
                .map(|_| (rng.random_range(-1.2..1.2), rng.random_range(0.0..0.05f64).powi(2)))
                .collect();
            let want = brute_coverage(&pairs, 1.0);
            let got = line_coverage(&mut pairs, 1.0);
            assert!(got >= want - 1e-12 && got <= want + 2e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn line_coverage_of_gapped_segment() {
        let mut pairs: Vec<(f64, f64)> = (0..=200)
            .map(|k| -1.0 + k as f64 * 0.01)
            .filter(|t: &f64| t.abs() >= 0.1 - 1e-12)
            .map(|t| (t, 0.0))
            .collect();
        assert!((line_coverage(&mut pairs, 1.0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn voxel_subsample_respects_cap_and_covers() {
        let w: Vec<f64> = (0..5000).flat_map(|k| [k as f64 / 5000.0, 0.0]).collect();
        let kept = voxel_subsample(&w, 2, 100);
        assert!(kept.len() <= 100 && kept[0] == 0);
        let sub: Vec<f64> = kept.iter().flat_map(|&i| [w[2 * i], w[2 * i + 1]]).collect();
        assert!(covering(&w, &sub, 2) < 0.05);
    }
}
