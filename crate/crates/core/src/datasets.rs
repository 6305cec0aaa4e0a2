//! Deterministic sample generators with attached reference facts.
//!
//! Every generator places a sample point at the origin, so profiles and
//! pointwise numbers can always be evaluated there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::PointCloud;

/// Half-width of the parameter domain of the graph, curve and disk
/// families: every ball `B_r(x)` with `|x| <= 1` and `r <= 1` stays away
/// from the boundary.
pub const DOMAIN_EXTENT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ThinTriangle,
    GappedSegment,
    LipschitzGraph,
    DyadicSnowflake,
    CircleArc,
    FlatDisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    ThinTriangle { eps: f64, m: usize },
    GappedSegment { g: f64, m: usize },
    LipschitzGraph { amplitude: f64, frequency: usize, m: usize, n: usize, d: usize },
    DyadicSnowflake { gamma: f64, depth: usize, m: usize },
    CircleArc { kappa: f64, m: usize },
    FlatDisk { n: usize, d: usize, m: usize },
}

/// A reference value for one of the flatness numbers. Bounds marked
/// approximate are diagnostics rather than guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fact", rename_all = "snake_case")]
pub enum ExpectedFact {
    AlphaAtLeast { center: Vec<f64>, radius: f64, value: f64 },
    /// Distortion of the orthogonal projection onto the best plane.
    ProjectionDistortionAtMost { center: Vec<f64>, radius: f64, value: f64 },
    BetaApprox { center: Vec<f64>, radius: f64, value: f64 },
    /// `alpha <= 4 a` at this center and radius.
    AlphaAtMostFourA { center: Vec<f64>, radius: f64 },
    /// Every number vanishes up to sampling error.
    Flat,
    /// `beta_i` is close to `c 2^(-gamma i)` for `0 <= i < levels`.
    BetaDecay { c: f64, gamma: f64, levels: usize },
}

/// Everything about a generated set except its points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMeta {
    pub family: Family,
    pub params: FamilyParams,
    pub expected: Vec<ExpectedFact>,
    pub seed: u64,
    /// Intrinsic dimension of the sampled set.
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct GeneratedSet {
    pub cloud: PointCloud,
    pub meta: SetMeta,
}

impl GeneratedSet {
    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }
}

fn build(family: Family, params: FamilyParams, n: usize, seed: u64, coords: Vec<f64>, dim: usize, expected: Vec<ExpectedFact>) -> Result<GeneratedSet> {
    Ok(GeneratedSet {
        cloud: PointCloud::from_flat(coords, dim)?,
        meta: SetMeta { family, params, expected, seed, n },
    })
}

fn check_count(m: usize, min: usize) -> Result<()> {
    if m < min {
        return Err(invalid("m", format!("need at least {min} points")));
    }
    Ok(())
}

/// Two unit segments from the origin to `(±sqrt(1 - eps^2), eps)`, each
/// split into `m / 2` equal intervals.
pub fn thin_triangle(eps: f64, m: usize) -> Result<GeneratedSet> {
    if !(1e-6..0.5).contains(&eps) {
        return Err(invalid("eps", "must lie in [1e-6, 1/2)"));
    }
    check_count(m, 10)?;
    let h = m / 2;
    let px = (1.0 - eps * eps).sqrt();
    let mut coords = vec![0.0, 0.0];
    for sign in [1.0, -1.0] {
        for k in 1..=h {
            let t = k as f64 / h as f64;
            coords.extend([sign * px * t, eps * t]);
        }
    }
    let o = vec![0.0, 0.0];
    build(
        Family::ThinTriangle,
        FamilyParams::ThinTriangle { eps, m },
        1,
        0,
        coords,
        2,
        vec![
            ExpectedFact::AlphaAtLeast { center: o.clone(), radius: 1.0, value: eps },
            ExpectedFact::ProjectionDistortionAtMost { center: o, radius: 1.0, value: 4.0 * eps * eps },
        ],
    )
}

/// `[-1, -g] ∪ [g, 1]` on the x-axis of the plane, `m / 2` points per piece,
/// plus the origin-adjacent points `(±g, 0)` as piece endpoints.
pub fn gapped_segment(g: f64, m: usize) -> Result<GeneratedSet> {
    if !(g > 0.0 && g < 0.25) {
        return Err(invalid("g", "must lie in (0, 1/4)"));
    }
    check_count(m, 4)?;
    let h = m / 2;
    let mut coords = Vec::with_capacity(4 * h);
    for sign in [-1.0, 1.0] {
        for k in 0..h {
            let t = g + (1.0 - g) * k as f64 / (h - 1) as f64;
            coords.extend([sign * t, 0.0]);
        }
    }
    let x = vec![g, 0.0];
    build(
        Family::GappedSegment,
        FamilyParams::GappedSegment { g, m },
        1,
        0,
        coords,
        2,
        vec![
            ExpectedFact::AlphaAtMostFourA { center: x.clone(), radius: 1.0 },
            ExpectedFact::BetaApprox { center: x, radius: 1.0, value: 0.0 },
        ],
    )
}

/// Odd number of grid nodes per axis, so the origin is a node.
fn grid_side(m: usize, n: usize) -> usize {
    let side = (m as f64).powf(1.0 / n as f64).round().max(3.0) as usize;
    side | 1
}

fn grid(n: usize, side: usize, mut visit: impl FnMut(&[f64])) {
    let step = 2.0 * DOMAIN_EXTENT / (side - 1) as f64;
    let mut idx = vec![0usize; n];
    let mut u = vec![0.0; n];
    loop {
        for k in 0..n {
            u[k] = -DOMAIN_EXTENT + idx[k] as f64 * step;
        }
        visit(&u);
        let mut k = 0;
        loop {
            if k == n {
                return;
            }
            idx[k] += 1;
            if idx[k] < side {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Graph of `u -> amplitude * sum_j cos(pi j <w_j, u> + phi_j) / j^2 / sum_j j^-2` over
/// the cube `[-2, 2]^n`, placed in the first `n + 1` coordinates of R^d and
/// shifted so the origin lies on it. Directions `w_j` and phases `phi_j`
/// come from `seed`; about `m` grid nodes are used.
pub fn lipschitz_graph(amplitude: f64, frequency: usize, m: usize, n: usize, d: usize, seed: u64) -> Result<GeneratedSet> {
    if !(0.0..0.1).contains(&amplitude) {
        return Err(invalid("amplitude", "must lie in [0, 1/10)"));
    }
    if n == 0 || n >= d {
        return Err(invalid("n", "need 1 <= n < d"));
    }
    if frequency == 0 {
        return Err(invalid("frequency", "must be at least 1"));
    }
    check_count(m, 10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(Vec<f64>, f64)> = (1..=frequency)
        .map(|_| {
            let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            w.iter_mut().for_each(|v| *v /= norm);
            (w, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let norm: f64 = (1..=frequency).map(|j| 1.0 / (j * j) as f64).sum();
    let f = |u: &[f64]| -> f64 {
        modes
            .iter()
            .enumerate()
            .map(|(j, (w, phi))| {
                let jf = (j + 1) as f64;
                let t: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
                (std::f64::consts::PI * jf * t + phi).cos() / (jf * jf)
            })
            .sum::<f64>()
            * amplitude
            / norm
    };
    let f0 = f(&vec![0.0; n]);
    let mut coords = Vec::new();
    grid(n, grid_side(m, n), |u| {
        coords.extend_from_slice(u);
        coords.push(f(u) - f0);
        coords.extend(std::iter::repeat_n(0.0, d - n - 1));
    });
    let expected = if amplitude == 0.0 { vec![ExpectedFact::Flat] } else { Vec::new() };
    build(
        Family::LipschitzGraph,
        FamilyParams::LipschitzGraph { amplitude, frequency, m, n, d },
        n,
        seed,
        coords,
        d,
        expected,
    )
}

/// Target constant of the snowflake decay `beta_i ~ c 2^(-gamma i)`.
pub const SNOWFLAKE_AMPLITUDE: f64 = 0.1;
/// Coarsest displacement level of the snowflake.
const SNOWFLAKE_FIRST_LEVEL: i32 = -2;

/// Displacement constant per level. Curvature of the coarser levels adds
/// to the displacement of the current one, so the constant is calibrated
/// to keep the measured `beta_i` near `SNOWFLAKE_AMPLITUDE 2^(-gamma i)`.
fn snowflake_level_constant(gamma: f64) -> f64 {
    0.0175 - 0.01 * gamma
}

/// Curve from `(-2, h)` to `(2, h')` through the origin, built by recursive
/// midpoint displacement. Level `l = -2, -1, ..., depth - 1` splits `[-2, 2]`
/// into intervals of length `2^-l` and lifts each one by
/// `±c 2^(-(1 + gamma) l) sin^2(pi u)`, `u` the relative position in the
/// interval, with signs drawn from `seed`; `depth = 0` gives the straight
/// segment. The lift vanishes with zero slope at the nodes of its level,
/// so no corners appear, and `beta` at scale `2^-i` tracks
/// `0.1 * 2^(-gamma i)` while `i < depth`. The curve is the graph over
/// `t = -2 + 4k / (2 (m / 2))`, `k = 0..=2 (m / 2)`, shifted to pass
/// through the origin.
pub fn dyadic_snowflake(gamma: f64, depth: usize, m: usize, seed: u64) -> Result<GeneratedSet> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid("gamma", "must lie in (0, 1]"));
    }
    if depth > 14 {
        return Err(invalid("depth", "must be at most 14"));
    }
    check_count(m, 10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = if depth == 0 { 0 } else { SNOWFLAKE_FIRST_LEVEL };
    let c = snowflake_level_constant(gamma);
    let levels: Vec<(f64, Vec<f64>)> = (first..depth as i32)
        .map(|level| {
            let scale = f64::from(level).exp2();
            let cells = (2.0 * DOMAIN_EXTENT * scale).ceil() as usize;
            let signs = (0..cells).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            (scale, signs)
        })
        .collect();
    let height = |t: f64| -> f64 {
        levels
            .iter()
            .map(|(scale, sg)| {
                let cells = (t + DOMAIN_EXTENT) * scale;
                let j = (cells.floor() as usize).min(sg.len() - 1);
                let u = cells - j as f64;
                let amp = c * scale.powf(-(1.0 + gamma));
                sg[j] * amp * (std::f64::consts::PI * u).sin().powi(2)
            })
            .sum()
    };
    let h0 = height(0.0);
    let h = m / 2;
    let mut coords = Vec::with_capacity(2 * (2 * h + 1));
    for k in 0..=2 * h {
        let t = if k == h { 0.0 } else { DOMAIN_EXTENT * (k as f64 - h as f64) / h as f64 };
        coords.extend([t, if k == h { 0.0 } else { height(t) - h0 }]);
    }
    build(
        Family::DyadicSnowflake,
        FamilyParams::DyadicSnowflake { gamma, depth, m },
        1,
        seed,
        coords,
        2,
        vec![ExpectedFact::BetaDecay { c: SNOWFLAKE_AMPLITUDE, gamma, levels: depth }],
    )
}

/// Arc of the circle of radius `1 / kappa` tangent to the x-axis at the
/// origin, of arc length `2 * min(2, 0.9 * pi / kappa)`, with an odd number
/// of about `m` equally spaced points.
pub fn circle_arc(kappa: f64, m: usize) -> Result<GeneratedSet> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(invalid("kappa", "must be positive"));
    }
    check_count(m, 10)?;
    let radius = 1.0 / kappa;
    let half = DOMAIN_EXTENT.min(0.9 * std::f64::consts::PI * radius);
    let h = m / 2;
    let mut coords = Vec::with_capacity(2 * (2 * h + 1));
    for k in 0..=2 * h {
        let s = -half + half * k as f64 / h as f64;
        let theta = s / radius;
        coords.extend([radius * theta.sin(), radius * (1.0 - theta.cos())]);
    }
    coords[2 * h] = 0.0;
    coords[2 * h + 1] = 0.0;
    let o = vec![0.0, 0.0];
    let expected = [0.05, 0.1, 0.2]
        .iter()
        .map(|&r| ExpectedFact::BetaApprox { center: o.clone(), radius: r, value: kappa * r / 2.0 })
        .collect();
    build(Family::CircleArc, FamilyParams::CircleArc { kappa, m }, 1, 0, coords, 2, expected)
}

/// Grid points of the n-ball of radius 2 in the first `n` coordinates of
/// R^d; about `m` nodes of the enclosing cube are visited.
pub fn flat_disk(n: usize, d: usize, m: usize) -> Result<GeneratedSet> {
    if n == 0 || n >= d {
        return Err(invalid("n", "need 1 <= n < d"));
    }
    check_count(m, 10)?;
    let mut coords = Vec::new();
    grid(n, grid_side(m, n), |u| {
        if u.iter().map(|v| v * v).sum::<f64>() <= DOMAIN_EXTENT * DOMAIN_EXTENT * (1.0 + 1e-12) {
            coords.extend_from_slice(u);
            coords.extend(std::iter::repeat_n(0.0, d - n));
        }
    });
    build(Family::FlatDisk, FamilyParams::FlatDisk { n, d, m }, n, 0, coords, d, vec![ExpectedFact::Flat])
}

/// Regenerates a set from its parameters.
pub fn generate(params: &FamilyParams, seed: u64) -> Result<GeneratedSet> {
    match *params {
        FamilyParams::ThinTriangle { eps, m } => thin_triangle(eps, m),
        FamilyParams::GappedSegment { g, m } => gapped_segment(g, m),
        FamilyParams::LipschitzGraph { amplitude, frequency, m, n, d } => lipschitz_graph(amplitude, frequency, m, n, d, seed),
        FamilyParams::DyadicSnowflake { gamma, depth, m } => dyadic_snowflake(gamma, depth, m, seed),
        FamilyParams::CircleArc { kappa, m } => circle_arc(kappa, m),
        FamilyParams::FlatDisk { n, d, m } => flat_disk(n, d, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_triangle_endpoints_and_spacing() {
        let set = thin_triangle(0.1, 2000).unwrap();
        let s = set.cloud();
        let px = 0.99f64.sqrt();
        assert!(s.points().any(|p| (p[0] - px).abs() < 1e-15 && (p[1] - 0.1).abs() < 1e-15));
        assert!(s.points().any(|p| (p[0] + px).abs() < 1e-15 && (p[1] - 0.1).abs() < 1e-15));
        assert!(s.spacing() >= 1.0 / 2000.0 && s.spacing() <= 4.0 / 2000.0, "{}", s.spacing());
        assert!(thin_triangle(1e-9, 2000).is_err());
        assert!(thin_triangle(0.1, 5).is_err());
    }

    #[test]
    fn gapped_segment_has_gap() {
        let set = gapped_segment(0.05, 1000).unwrap();
        assert!(set.cloud().points().all(|p| p[0].abs() >= 0.05 - 1e-15));
        assert!(set.cloud().points().any(|p| p[0] == 0.05));
    }

    #[test]
    fn generators_are_deterministic() {
        let a = lipschitz_graph(0.01, 4, 500, 1, 2, 7).unwrap();
        let b = lipschitz_graph(0.01, 4, 500, 1, 2, 7).unwrap();
        assert_eq!(a.cloud().coords(), b.cloud().coords());
        let a = dyadic_snowflake(0.5, 6, 800, 3).unwrap();
        let b = generate(&a.meta.params, 3).unwrap();
        assert_eq!(a.cloud().coords(), b.cloud().coords());
    }

    #[test]
    fn zero_depth_snowflake_is_straight() {
        let set = dyadic_snowflake(1.0, 0, 100, 0).unwrap();
        assert!(set.cloud().points().all(|p| p[1] == 0.0));
    }

    #[test]
    fn zero_amplitude_graph_is_flat() {
        let set = lipschitz_graph(0.0, 3, 400, 2, 3, 1).unwrap();
        assert!(set.cloud().points().all(|p| p[2] == 0.0));
        assert_eq!(set.meta.expected, vec![ExpectedFact::Flat]);
    }

    #[test]
    fn origin_is_sampled() {
        for set in [
            thin_triangle(0.05, 100).unwrap(),
            lipschitz_graph(0.02, 3, 301, 1, 3, 2).unwrap(),
            dyadic_snowflake(0.5, 5, 400, 1).unwrap(),
            circle_arc(1.0, 400).unwrap(),
            flat_disk(2, 3, 900).unwrap(),
        ] {
            assert_eq!(set.cloud().nearest(&vec![0.0; set.cloud().dim()]).1, 0.0, "{:?}", set.meta.family);
        }
    }
}
