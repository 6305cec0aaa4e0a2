//! Dyadic profiles: sups of the flatness numbers over sampled centers, one
//! record per scale `2^-i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FlatnessError, Result};
use crate::extrinsic::{extrinsic_fit, GrassmannSearchConfig, SCALE_FLOOR_FACTOR};
use crate::geometry::{Bracket, PointCloud};
use crate::intrinsic::{intrinsic_fit, IntrinsicSettings};
use crate::simplex::farthest_point_order;

/// Scale range and sampling controls of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicConfig {
    /// Margin `ε`: intrinsic centers are taken in `B_{1-ε}(0)`.
    pub eps_margin: f64,
    pub i_min: i32,
    pub i_max: i32,
    /// Intrinsic dimension.
    pub n: usize,
    /// Largest number of centers per profile, chosen by farthest-point
    /// sampling.
    pub center_sample_cap: usize,
    /// Net resolution relative to the radius.
    pub net_resolution: f64,
    /// Balls with more points are thinned before the quadratic distortion
    /// scans.
    pub pair_cap: usize,
    /// Number of subsample draws for the intrinsic lower bounds.
    pub lower_bound_draws: usize,
    /// Constant in the projection certificate.
    pub theta_c: f64,
    /// Fail instead of reporting when the smallness hypothesis of the
    /// projection certificate is violated.
    pub enforce_gate: bool,
    pub seed: u64,
}

impl Default for DyadicConfig {
    fn default() -> Self {
        DyadicConfig {
            eps_margin: 0.3,
            i_min: 2,
            i_max: 6,
            n: 1,
            center_sample_cap: 32,
            net_resolution: 1.0 / 200.0,
            pair_cap: 4096,
            lower_bound_draws: 20,
            theta_c: 64.0,
            enforce_gate: false,
            seed: 0,
        }
    }
}

impl DyadicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_margin > 0.0 && self.eps_margin < 0.5) {
            return Err(invalid("eps_margin", "must lie in (0, 1/2)"));
        }
        if (-self.i_min as f64).exp2() >= self.eps_margin {
            return Err(invalid("i_min", "need 2^-i_min < eps_margin"));
        }
        if self.i_min > self.i_max {
            return Err(invalid("i_max", "need i_min <= i_max"));
        }
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.center_sample_cap == 0 {
            return Err(invalid("center_sample_cap", "must be at least 1"));
        }
        if !(self.net_resolution > 0.0 && self.net_resolution < 1.0) {
            return Err(invalid("net_resolution", "must lie in (0, 1)"));
        }
        if self.pair_cap < 16 {
            return Err(invalid("pair_cap", "must be at least 16"));
        }
        if !(self.theta_c > 0.0 && self.theta_c.is_finite()) {
            return Err(invalid("theta_c", "must be positive"));
        }
        Ok(())
    }

    /// Profile scales, from `i_min - 2` to `i_max`.
    pub fn scales(&self) -> impl Iterator<Item = i32> {
        (self.i_min - 2)..=self.i_max
    }

    pub(crate) fn intrinsic_settings(&self) -> IntrinsicSettings {
        IntrinsicSettings {
            net_resolution: self.net_resolution,
            pair_cap: self.pair_cap,
            draws: self.lower_bound_draws,
            seed: self.seed,
        }
    }
}

/// Brackets of one dyadic scale. A number is `None` when it was not
/// requested or the scale lies below the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub i: i32,
    pub radius: f64,
    pub alpha: Option<Bracket>,
    pub beta: Option<Bracket>,
    pub a: Option<Bracket>,
    pub b: Option<Bracket>,
    /// Set when `radius < 8 * spacing`; nothing is computed at such scales.
    pub below_floor: bool,
    pub extrinsic_centers: usize,
    pub intrinsic_centers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub len: usize,
    pub dim: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessProfile {
    pub scales: Vec<ScaleRecord>,
    pub config: DyadicConfig,
    pub search: GrassmannSearchConfig,
    pub cloud: CloudMeta,
    /// Candidate centers before capping, for `B_1(0)` and `B_{1-ε}(0)`.
    pub extrinsic_candidates: usize,
    pub intrinsic_candidates: usize,
}

impl FlatnessProfile {
    pub fn scale(&self, i: i32) -> Option<&ScaleRecord> {
        self.scales.iter().find(|s| s.i == i)
    }

    /// Fills the numbers missing here from `other`, which must cover the
    /// same scales.
    pub fn merge(mut self, other: FlatnessProfile) -> Result<FlatnessProfile> {
        if self.scales.len() != other.scales.len() {
            return Err(invalid("profile", "scale ranges differ"));
        }
        for (s, o) in self.scales.iter_mut().zip(other.scales) {
            if s.i != o.i {
                return Err(invalid("profile", "scale ranges differ"));
            }
            s.alpha = s.alpha.or(o.alpha);
            s.beta = s.beta.or(o.beta);
            s.a = s.a.or(o.a);
            s.b = s.b.or(o.b);
            s.extrinsic_centers = s.extrinsic_centers.max(o.extrinsic_centers);
            s.intrinsic_centers = s.intrinsic_centers.max(o.intrinsic_centers);
        }
        self.extrinsic_candidates = self.extrinsic_candidates.max(other.extrinsic_candidates);
        self.intrinsic_candidates = self.intrinsic_candidates.max(other.intrinsic_candidates);
        Ok(self)
    }
}

/// Sample points in the closed ball `B_radius(0)`, thinned to at most `cap`
/// by farthest-point sampling started at the point nearest the origin.
/// Returns the chosen indices in ascending order and the candidate count.
pub fn profile_centers(s: &PointCloud, radius: f64, cap: usize) -> (Vec<usize>, usize) {
    let origin = vec![0.0; s.dim()];
    let mut candidates = s.ball(&origin, radius);
    let total = candidates.len();
    if total > cap {
        let (nearest, _) = s.nearest(&origin);
        if let Some(pos) = candidates.iter().position(|&i| i == nearest) {
            candidates.swap(0, pos);
        }
        let pts: Vec<&[f64]> = candidates.iter().map(|&i| s.point(i)).collect();
        let order = farthest_point_order(&pts, cap);
        candidates = order.into_iter().map(|k| candidates[k]).collect();
        candidates.sort_unstable();
    }
    (candidates, total)
}

fn floor_ok(s: &PointCloud, radius: f64) -> bool {
    radius >= SCALE_FLOOR_FACTOR * s.spacing() * (1.0 - 1e-12)
}

fn blank(cfg: &DyadicConfig, s: &PointCloud) -> Vec<ScaleRecord> {
    cfg.scales()
        .map(|i| {
            let radius = (-i as f64).exp2();
            ScaleRecord {
                i,
                radius,
                alpha: None,
                beta: None,
                a: None,
                b: None,
                below_floor: !floor_ok(s, radius),
                extrinsic_centers: 0,
                intrinsic_centers: 0,
            }
        })
        .collect()
}

fn check_inputs(s: &PointCloud, cfg: &DyadicConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.n >= s.dim() {
        return Err(invalid("n", format!("need n < d = {}", s.dim())));
    }
    if !floor_ok(s, (-(cfg.i_min - 2) as f64).exp2()) {
        return Err(FlatnessError::ScaleBelowFloor {
            radius: (-(cfg.i_min - 2) as f64).exp2(),
            floor: SCALE_FLOOR_FACTOR * s.spacing(),
        });
    }
    Ok(())
}

/// Runs `eval` on every (center, scale) pair in parallel and reduces the
/// results per scale in a fixed order.
fn sweep<T, F>(s: &PointCloud, centers: &[usize], records: &[ScaleRecord], eval: F) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(&[f64], f64) -> Result<T> + Sync,
{
    let jobs: Vec<(usize, usize)> = records
        .iter()
        .enumerate()
        .filter(|(_, rec)| !rec.below_floor)
        .flat_map(|(k, _)| centers.iter().map(move |&c| (k, c)))
        .collect();
    let results: Vec<Result<(usize, T)>> = jobs
        .par_iter()
        .map(|&(k, c)| eval(s.point(c), records[k].radius).map(|v| (k, v)))
        .collect();
    let mut per_scale: Vec<Vec<T>> = records.iter().map(|_| Vec::new()).collect();
    for r in results {
        let (k, v) = r?;
        per_scale[k].push(v);
    }
    Ok(per_scale)
}

fn sup_all(items: impl Iterator<Item = Bracket>) -> Option<Bracket> {
    items.reduce(Bracket::sup)
}

/// `alpha_i` and `beta_i` over centers in `S ∩ B_1(0)`.
pub fn dyadic_profile_extrinsic(
    s: &PointCloud,
    cfg: &DyadicConfig,
    search: &GrassmannSearchConfig,
) -> Result<FlatnessProfile> {
    check_inputs(s, cfg)?;
    search.validate()?;
    let (centers, total) = profile_centers(s, 1.0, cfg.center_sample_cap);
    if centers.is_empty() {
        return Err(FlatnessError::EmptyInput("no sample point in B_1(0)"));
    }
    let mut scales = blank(cfg, s);
    let fits = sweep(s, &centers, &scales, |x, r| {
        extrinsic_fit(s, x, r, cfg.n, search).map(|f| (f.alpha.bracket, f.beta.bracket))
    })?;
    for (rec, list) in scales.iter_mut().zip(fits) {
        if rec.below_floor {
            continue;
        }
        rec.extrinsic_centers = list.len();
        rec.alpha = sup_all(list.iter().map(|p| p.0));
        rec.beta = sup_all(list.iter().map(|p| p.1));
    }
    Ok(FlatnessProfile {
        scales,
        config: cfg.clone(),
        search: search.clone(),
        cloud: meta(s),
        extrinsic_candidates: total,
        intrinsic_candidates: 0,
    })
}

/// `a_i` and `b_i` over centers in `S ∩ B_{1-ε}(0)`.
pub fn dyadic_profile_intrinsic(
    s: &PointCloud,
    cfg: &DyadicConfig,
    search: &GrassmannSearchConfig,
) -> Result<FlatnessProfile> {
    check_inputs(s, cfg)?;
    search.validate()?;
    let (centers, total) = profile_centers(s, 1.0 - cfg.eps_margin, cfg.center_sample_cap);
    if centers.is_empty() {
        return Err(FlatnessError::EmptyInput("no sample point in B_{1-eps}(0)"));
    }
    let settings = cfg.intrinsic_settings();
    let mut scales = blank(cfg, s);
    let fits = sweep(s, &centers, &scales, |x, r| {
        intrinsic_fit(s, x, r, cfg.n, &settings, search).map(|f| (f.a, f.b))
    })?;
    for (rec, list) in scales.iter_mut().zip(fits) {
        if rec.below_floor {
            continue;
        }
        rec.intrinsic_centers = list.len();
        rec.a = sup_all(list.iter().map(|p| p.0));
        rec.b = sup_all(list.iter().map(|p| p.1));
    }
    Ok(FlatnessProfile {
        scales,
        config: cfg.clone(),
        search: search.clone(),
        cloud: meta(s),
        extrinsic_candidates: 0,
        intrinsic_candidates: total,
    })
}

/// All four profiles.
pub fn dyadic_profile(s: &PointCloud, cfg: &DyadicConfig, search: &GrassmannSearchConfig) -> Result<FlatnessProfile> {
    dyadic_profile_extrinsic(s, cfg, search)?.merge(dyadic_profile_intrinsic(s, cfg, search)?)
}

fn meta(s: &PointCloud) -> CloudMeta {
    CloudMeta {
        len: s.len(),
        dim: s.dim(),
        spacing: s.spacing(),
    }
}
