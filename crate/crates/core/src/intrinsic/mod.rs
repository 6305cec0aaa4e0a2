//! Intrinsic flatness: the Gromov-Hausdorff distance `a(x, r)` between the
//! metric ball `S ∩ B_r(x)` and a Euclidean n-ball, and the least distortion
//! `b(x, r)` of a map from the former into the latter.
//!
//! Upper bounds come from orthogonal projection onto the best plane found
//! for `beta`. Lower bounds come from small subsamples, where exhaustive
//! searches are affordable, with the subsampling error subtracted.

mod gh;
mod metric;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gh::{codensity, distortion, gh_bruteforce, gh_upper_via_map, CorrespondenceBound, GhMethod, DEFAULT_GH_SIZE};
pub use metric::{
    euclidean_ball_net, euclidean_ball_net_capped, restrict_metric, EuclideanSample, FiniteMetricSpace,
    MetricSpace, DEFAULT_NET_CAP,
};

use crate::error::{FlatnessError, Result};
use crate::extrinsic::{
    beta_fit, check_center, covering, extrinsic_fit, line_coverage, min_net_resolution, voxel_subsample,
    sampling_slack, working_basis, GrassmannSearchConfig, LocalSample, ALPHA_GATE, SCALE_FLOOR_FACTOR,
};
use crate::geometry::net::{ball_lattice, covering_radius};
use crate::geometry::spatial::{sq_dist, KdTree};
use crate::geometry::{AffinePlane, Bracket, PointCloud};
use crate::profile::DyadicConfig;
use crate::simplex::farthest_point_order;
use gh::min_map_distortion;
use metric::euclidean_matrix;

/// Coarsest net used by the exhaustive forward-map search when n >= 2.
const FORWARD_NET_N2: f64 = 1.0 / 40.0;
/// Partial maps visited per exhaustive map search before giving up.
const MAP_SEARCH_BUDGET: usize = 200_000;
/// Points kept as targets of the reverse-map search.
const REVERSE_TARGET_CAP: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicSettings {
    pub net_resolution: f64,
    pub pair_cap: usize,
    pub draws: usize,
    pub seed: u64,
}

impl Default for IntrinsicSettings {
    fn default() -> Self {
        DyadicConfig::default().intrinsic_settings()
    }
}

/// Which argument produced the lower end of the `a` bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerSource {
    None,
    Diameter,
    ReverseMap,
    ForwardMap,
    Subsample,
}

/// Both intrinsic numbers at one center and scale, with the ingredients of
/// their bounds (all normalized by `r`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicFit {
    pub a: Bracket,
    pub b: Bracket,
    /// Plane whose orthogonal projection gives the upper bounds.
    pub plane: AffinePlane,
    /// Distortion of the projection on the (thinned) ball.
    pub distortion: f64,
    /// Codensity of the projected sample in the unit n-ball.
    pub codensity: f64,
    pub subsample_radius: f64,
    pub a_lower_source: LowerSource,
    /// Forward-map searches that finished within budget.
    pub completed_draws: usize,
    pub ball_size: usize,
}

pub fn a_number(s: &PointCloud, x: &[f64], r: f64, n: usize, cfg: &DyadicConfig) -> Result<Bracket> {
    cfg.validate()?;
    Ok(intrinsic_fit(s, x, r, n, &cfg.intrinsic_settings(), &GrassmannSearchConfig::default())?.a)
}

pub fn b_number(s: &PointCloud, x: &[f64], r: f64, n: usize, cfg: &DyadicConfig) -> Result<Bracket> {
    cfg.validate()?;
    Ok(intrinsic_fit(s, x, r, n, &cfg.intrinsic_settings(), &GrassmannSearchConfig::default())?.b)
}

pub fn intrinsic_fit(
    s: &PointCloud,
    x: &[f64],
    r: f64,
    n: usize,
    settings: &IntrinsicSettings,
    search: &GrassmannSearchConfig,
) -> Result<IntrinsicFit> {
    check_center(s, x, r, n)?;
    let plane = beta_fit(s, x, r, n, search)?.plane;
    let local = LocalSample::new(s, x, r, settings.pair_cap);
    let d = local.d;
    let k = local.len();
    let basis = working_basis(&local, &plane);
    let mut z = Vec::with_capacity(k * n);
    for p in local.w.chunks_exact(d) {
        let start = z.len();
        z.extend((0..n).map(|j| basis.col(j).iter().zip(p).map(|(a, b)| a * b).sum::<f64>()));
        let norm = z[start..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 {
            z[start..].iter_mut().for_each(|v| *v /= norm);
        }
    }
    let (dis, diam) = pair_scan(&local.w, d, &z, n);
    let rho = local.rho;
    let h = (s.spacing() / r).max(settings.net_resolution).max(min_net_resolution(n));
    let cod = image_codensity(&z, n, h)?;

    // A constant map has distortion diam, and d_GH <= max(diam, 2) / 2 = 1.
    let full_diam = (diam + 2.0 * rho).min(2.0);
    let b_hi = (dis + 2.0 * rho).min(full_diam);
    let a_hi = (2.0 * (dis + 2.0 * rho).max(cod)).min(2.0 * dis.max(cod) + rho).min(1.0);

    let mut sources = vec![(LowerSource::Diameter, 0.5 * (2.0 - diam - 2.0 * rho))];
    sources.push((LowerSource::ReverseMap, reverse_bound(&local, n)));
    let forward = forward_bounds(&local.w, d, &z, n, h, settings)?;
    sources.push((LowerSource::ForwardMap, 0.5 * forward.bound));
    sources.push((LowerSource::Subsample, subsample_bound(&local, n, h, settings)?));
    let (source, a_lo) = sources
        .into_iter()
        .fold((LowerSource::None, 0.0), |acc, s| if s.1 > acc.1 { s } else { acc });

    Ok(IntrinsicFit {
        a: Bracket::new(a_lo, a_hi, true),
        b: Bracket::new(forward.bound.max(0.0), b_hi, true),
        plane,
        distortion: dis,
        codensity: cod,
        subsample_radius: rho,
        a_lower_source: source,
        completed_draws: forward.completed,
        ball_size: local.indices.len(),
    })
}

/// Distortion of `w -> z` and the diameter of `w`.
fn pair_scan(w: &[f64], d: usize, z: &[f64], n: usize) -> (f64, f64) {
    let k = w.len() / d;
    let mut dis: f64 = 0.0;
    let mut diam: f64 = 0.0;
    for i in 0..k {
        let wi = &w[i * d..(i + 1) * d];
        let zi = &z[i * n..(i + 1) * n];
        for j in i + 1..k {
            let dw = sq_dist(wi, &w[j * d..(j + 1) * d]).sqrt();
            let dz = sq_dist(zi, &z[j * n..(j + 1) * n]).sqrt();
            dis = dis.max((dw - dz).abs());
            diam = diam.max(dw);
        }
    }
    (dis, diam)
}

/// Upper bound on `sup_{|p| <= 1} d(p, image)` in R^n.
fn image_codensity(z: &[f64], n: usize, h: f64) -> Result<f64> {
    if n == 1 {
        let mut pairs: Vec<(f64, f64)> = z.iter().map(|&t| (t, 0.0)).collect();
        return Ok(line_coverage(&mut pairs, 1.0));
    }
    let net = ball_lattice(n, 1.0, h, DEFAULT_NET_CAP)?;
    let tree = KdTree::build(z, n);
    let worst = net
        .chunks_exact(n)
        .map(|p| tree.nearest(z, p).map_or(f64::INFINITY, |(_, dist)| dist))
        .fold(0.0, f64::max);
    Ok(worst + covering_radius(n, h))
}

fn cross_polytope(n: usize) -> Vec<f64> {
    let mut pts = vec![0.0; n];
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[k] = sign;
            pts.extend(e);
        }
    }
    pts
}

/// `d_GH >= (1/2) min dis` over maps from the centered cross polytope of the
/// unit n-ball into the sample; snapping to a thinned sample costs twice its
/// covering radius.
fn reverse_bound(local: &LocalSample, n: usize) -> f64 {
    if n > 3 {
        return 0.0;
    }
    let d = local.d;
    let kept = voxel_subsample(&local.w, d, REVERSE_TARGET_CAP);
    let target: Vec<f64> = kept.iter().flat_map(|&i| local.w[i * d..(i + 1) * d].iter().copied()).collect();
    let rho = covering(local.all_points(), &target, d);
    let source = euclidean_matrix(&cross_polytope(n), n);
    let da: Vec<f64> = (0..source.size()).flat_map(|i| source.row(i).to_vec()).collect();
    let tree = KdTree::build(&target, d);
    let all: Vec<usize> = (0..kept.len()).collect();
    let start = 2.0f64.max(euclidean_matrix(&target, d).diameter()) + 1e-9;
    match min_map_distortion(&da, &target, d, &tree, &all, start, MAP_SEARCH_BUDGET) {
        Some(v) if v < start => 0.5 * (v - 2.0 * rho),
        _ => 0.0,
    }
}

struct Forward {
    bound: f64,
    completed: usize,
}

/// `b >= min dis - 2 * cover` over maps from small farthest-point
/// subsamples into a net of the unit n-ball; the first image is restricted
/// to a fundamental domain of the net's symmetry group.
fn forward_bounds(w: &[f64], d: usize, z: &[f64], n: usize, h: f64, settings: &IntrinsicSettings) -> Result<Forward> {
    let k = w.len() / d;
    let size = if n == 1 { 4 } else { 3 };
    let h = if n == 1 { h } else { h.max(FORWARD_NET_N2) };
    let net = ball_lattice(n, 1.0, h, DEFAULT_NET_CAP)?;
    let cover = covering_radius(n, h);
    let tree = KdTree::build(&net, n);
    let first: Vec<usize> = net
        .chunks_exact(n)
        .enumerate()
        .filter(|(_, p)| p[0] >= -1e-12 && p.windows(2).all(|q| q[0] <= q[1] + 1e-12))
        .map(|(i, _)| i)
        .collect();
    let rows: Vec<&[f64]> = w.chunks_exact(d).collect();
    let mut out = Forward { bound: 0.0, completed: 0 };
    if k < 2 {
        return Ok(out);
    }
    for draw in 0..settings.draws {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(draw as u64));
        let start = rng.random_range(0..k);
        let mut order: Vec<&[f64]> = Vec::with_capacity(k);
        order.push(rows[start]);
        order.extend(rows.iter().enumerate().filter(|(i, _)| *i != start).map(|(_, r)| *r));
        let picked: Vec<usize> = farthest_point_order(&order, size)
            .into_iter()
            .map(|i| if i == 0 { start } else if i <= start { i - 1 } else { i })
            .collect();
        let sub: Vec<f64> = picked.iter().flat_map(|&i| rows[i].iter().copied()).collect();
        let m = euclidean_matrix(&sub, d);
        let da: Vec<f64> = (0..m.size()).flat_map(|i| m.row(i).to_vec()).collect();
        let snapped: Vec<usize> = picked
            .iter()
            .map(|&i| tree.nearest(&net, &z[i * n..(i + 1) * n]).map_or(0, |p| p.0))
            .collect();
        let incumbent = (0..picked.len())
            .flat_map(|a| (a + 1..picked.len()).map(move |b| (a, b)))
            .map(|(a, b)| {
                let got = sq_dist(&net[snapped[a] * n..(snapped[a] + 1) * n], &net[snapped[b] * n..(snapped[b] + 1) * n]).sqrt();
                (got - m.dist(a, b)).abs()
            })
            .fold(0.0, f64::max);
        if let Some(v) = min_map_distortion(&da, &net, n, &tree, &first, incumbent, MAP_SEARCH_BUDGET) {
            out.completed += 1;
            out.bound = out.bound.max(v - 2.0 * cover);
        }
    }
    Ok(out)
}

/// `d_GH(X, B) >= d_GH(X'', Y'') - cod(X'' in X) - cod(Y'' in B)` for
/// seven-point subsamples `X''` of the ball and `Y''` of the unit n-ball.
fn subsample_bound(local: &LocalSample, n: usize, h: f64, settings: &IntrinsicSettings) -> Result<f64> {
    let d = local.d;
    let k = local.len();
    if k < 2 {
        return Ok(0.0);
    }
    let net = ball_lattice(n, 1.0, h.max(FORWARD_NET_N2), DEFAULT_NET_CAP)?;
    let net_rows: Vec<&[f64]> = net.chunks_exact(n).collect();
    let picked_y = farthest_point_order(&net_rows, DEFAULT_GH_SIZE);
    let y_sub: Vec<f64> = picked_y.iter().flat_map(|&i| net_rows[i].iter().copied()).collect();
    let cod_y = covering(&net, &y_sub, n) + covering_radius(n, h.max(FORWARD_NET_N2));
    let y = euclidean_matrix(&y_sub, n);

    let rows: Vec<&[f64]> = local.w.chunks_exact(d).collect();
    let mut best: f64 = 0.0;
    for draw in 0..settings.draws.clamp(1, 4) {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(1000 + draw as u64));
        let start = rng.random_range(0..k);
        let mut order = vec![rows[start]];
        order.extend(rows.iter().enumerate().filter(|(i, _)| *i != start).map(|(_, r)| *r));
        let picked = farthest_point_order(&order, DEFAULT_GH_SIZE);
        let x_sub: Vec<f64> = picked.iter().flat_map(|&i| order[i].iter().copied()).collect();
        let cod_x = covering(local.all_points(), &x_sub, d);
        let x = euclidean_matrix(&x_sub, d);
        let gh = gh_bruteforce(&x, &y, DEFAULT_GH_SIZE)?.lower;
        best = best.max(gh - cod_x - cod_y);
    }
    Ok(best)
}

/// The `theta` certificate of the projection onto a realizing plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCertificate {
    pub theta: f64,
    /// `max(theta, C alpha_0^2)`.
    pub theta_prime: f64,
    pub c_used: f64,
    /// Upper ends of `beta(x, r 2^-j)` for `j = -2, -1, 0, ...`.
    pub beta_inputs: Vec<f64>,
    /// Upper ends of `alpha(x, r 2^-j)` for the same `j`.
    pub alpha_inputs: Vec<f64>,
    /// Set when the scales stopped at the sampling floor rather than at the
    /// configured depth.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionIsometry {
    /// Plane onto which points are projected; its frame gives coordinates.
    pub plane: AffinePlane,
    pub certificate: ThetaCertificate,
    /// Upper bound on the distortion of the projection on `S ∩ B_r(x)`,
    /// normalized by `r`.
    pub measured_distortion: f64,
    /// Whether every `alpha` input, less its sampling slack, is at most
    /// [`ALPHA_GATE`].
    pub gate_met: bool,
}

/// Deepest scale used by the certificate, relative to `r`.
const MAX_CERTIFICATE_DEPTH: i32 = 40;

/// Orthogonal projection onto the best plane at `(x, r)` together with the
/// `theta` certificate built from `beta(x, r 2^-j)`, `j >= -2`.
pub fn projection_isometry(
    s: &PointCloud,
    x: &[f64],
    r: f64,
    n: usize,
    c: f64,
    cfg: &DyadicConfig,
    search: &GrassmannSearchConfig,
) -> Result<ProjectionIsometry> {
    cfg.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(crate::error::invalid("C", "must be positive"));
    }
    check_center(s, x, r, n)?;
    let floor = SCALE_FLOOR_FACTOR * s.spacing();
    let mut betas = Vec::new();
    let mut alphas = Vec::new();
    let mut gate_met = true;
    let mut j = -2;
    while j <= MAX_CERTIFICATE_DEPTH {
        let rj = r * (-j as f64).exp2();
        if rj < floor * (1.0 - 1e-12) {
            break;
        }
        let fit = extrinsic_fit(s, x, rj, n, search)?;
        gate_met &= fit.alpha.bracket.hi - sampling_slack(s.spacing(), rj, n, search) <= ALPHA_GATE;
        betas.push(fit.beta.bracket.hi);
        alphas.push(fit.alpha.bracket.hi);
        j += 1;
    }
    if alphas.len() < 3 {
        return Err(FlatnessError::ScaleBelowFloor { radius: r, floor });
    }
    if cfg.enforce_gate && !gate_met {
        return Err(FlatnessError::HypothesisViolated(format!(
            "alpha(x, r 2^-j) <= {ALPHA_GATE} required for all j >= -2"
        )));
    }
    let mut theta: f64 = 0.0;
    let mut partial: f64 = 0.0;
    for (pos, beta) in betas.iter().enumerate() {
        partial += beta;
        let jj = pos as i32 - 2;
        if jj >= 0 {
            theta = theta.max(c * c * partial * partial / (jj as f64).exp2());
        }
    }
    let theta_prime = theta.max(c * alphas[2] * alphas[2]);
    let fit = intrinsic_fit(s, x, r, n, &cfg.intrinsic_settings(), search)?;
    Ok(ProjectionIsometry {
        plane: fit.plane,
        certificate: ThetaCertificate {
            theta,
            theta_prime,
            c_used: c,
            beta_inputs: betas,
            alpha_inputs: alphas,
            truncated: j <= MAX_CERTIFICATE_DEPTH,
        },
        measured_distortion: fit.b.hi,
        gate_met,
    })
}

#[cfg(test)]
mod tests;
