//! Jones `beta` and Reifenberg `alpha` numbers: the one-sided and two-sided
//! distance of `S ∩ B_r(x)` to the best n-plane through `x`, normalized by
//! `r`.

mod objective;
pub(crate) mod search;
mod tilting;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FlatnessError, Result};
use crate::geometry::{AffinePlane, Bracket, PointCloud};
pub(crate) use objective::{covering, line_coverage, min_net_resolution, voxel_subsample, LocalSample};
use objective::{sup_distance, AlphaObjective, BetaObjective};
use search::{certifiable, minimize, Basis, Objective, SearchSettings};
pub use tilting::{tilting_report, TiltKind, TiltRecord, TiltingReport};

/// Smallest admissible radius as a multiple of the sample spacing.
pub const SCALE_FLOOR_FACTOR: f64 = 8.0;
/// Working smallness threshold standing in for the unspecified dimensional
/// constants of the realizing-plane and tilting statements.
pub const ALPHA_GATE: f64 = 0.01;

/// Controls the search over n-planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrassmannSearchConfig {
    /// Number of starting planes for the local search (the principal plane
    /// plus randomly rotated copies).
    pub restarts: usize,
    /// Angular radius (radians) at which branch-and-bound regions stop
    /// splitting; bounds the width of certified brackets.
    pub grid_resolution: f64,
    /// Budget of objective evaluations per search.
    pub max_iterations: usize,
    /// Largest `(n, d)` for which certified lower bounds are produced.
    pub certify_dims: (usize, usize),
    /// Relative gap assumed between the best plane found and the optimum
    /// when no certified bound is available.
    pub convergence_slack: f64,
    /// Balls with more points are thinned by a voxel grid before searching.
    pub ball_cap: usize,
    /// Net resolution for the coverage term of `alpha` when n >= 2,
    /// relative to the radius.
    pub net_resolution: f64,
    pub seed: u64,
}

impl Default for GrassmannSearchConfig {
    fn default() -> Self {
        GrassmannSearchConfig {
            restarts: 4,
            grid_resolution: 1e-4,
            max_iterations: 20_000,
            certify_dims: (2, 3),
            convergence_slack: 0.05,
            ball_cap: 4096,
            net_resolution: 1.0 / 200.0,
            seed: 0,
        }
    }
}

impl GrassmannSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(invalid("restarts", "must be at least 1"));
        }
        if !(self.grid_resolution > 0.0 && self.grid_resolution.is_finite()) {
            return Err(invalid("grid_resolution", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.convergence_slack) {
            return Err(invalid("convergence_slack", "must lie in [0, 1)"));
        }
        if self.ball_cap < 16 {
            return Err(invalid("ball_cap", "must be at least 16"));
        }
        if !(self.net_resolution > 0.0 && self.net_resolution < 1.0) {
            return Err(invalid("net_resolution", "must lie in (0, 1)"));
        }
        Ok(())
    }

    fn settings(&self, n: usize, d: usize, polish_min_step: f64) -> SearchSettings {
        SearchSettings {
            n,
            d,
            restarts: self.restarts,
            grid_resolution: self.grid_resolution,
            max_iterations: self.max_iterations,
            certify: n <= self.certify_dims.0 && d <= self.certify_dims.1 && certifiable(n, d),
            convergence_slack: self.convergence_slack,
            seed: self.seed,
            polish_min_step,
        }
    }
}

/// Checks the shared preconditions of the pointwise numbers.
pub(crate) fn check_center(s: &PointCloud, x: &[f64], r: f64, n: usize) -> Result<()> {
    if x.len() != s.dim() {
        return Err(FlatnessError::DimensionMismatch { expected: s.dim(), found: x.len() });
    }
    if n == 0 || n >= s.dim() {
        return Err(invalid("n", format!("need 1 <= n < d = {}", s.dim())));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", "must be positive and finite"));
    }
    let floor = SCALE_FLOOR_FACTOR * s.spacing();
    if r < floor * (1.0 - 1e-12) {
        return Err(FlatnessError::ScaleBelowFloor { radius: r, floor });
    }
    let (_, distance) = s.nearest(x);
    if distance > 1e-9 * r {
        return Err(FlatnessError::CenterNotInCloud { distance });
    }
    Ok(())
}

/// A bracket together with the plane attaining its upper end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub bracket: Bracket,
    pub plane: AffinePlane,
    pub evaluations: usize,
}

/// Both extrinsic numbers at one center and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicFit {
    pub alpha: PlaneFit,
    pub beta: PlaneFit,
    /// Normalized covering radius of the subsample the search ran on (0
    /// when the whole ball was used).
    pub subsample_radius: f64,
    pub ball_size: usize,
}

struct Searched {
    basis: Basis,
    lo: f64,
    hi: f64,
    certified: bool,
    evaluations: usize,
}

fn plane_from_basis(local: &LocalSample, x: &[f64], basis: &Basis, n: usize) -> Result<AffinePlane> {
    let dirs = (0..n).map(|j| local.to_ambient(basis.col(j))).collect();
    AffinePlane::new(x.to_vec(), dirs)
}

fn search_beta(local: &LocalSample, n: usize, cfg: &GrassmannSearchConfig) -> Searched {
    let d = local.d;
    let obj = BetaObjective { w: &local.w, d, n };
    let out = minimize(&obj, &cfg.settings(n, d, 1e-12), &[Basis::identity(d)]);
    let hi = match &local.full {
        Some(full) => sup_distance(full, d, n, &out.basis),
        None => out.hi,
    };
    Searched {
        lo: out.lo,
        hi,
        certified: out.certified,
        basis: out.basis,
        evaluations: out.evaluations,
    }
}

fn alpha_resolution(spacing: f64, r: f64, n: usize, cfg: &GrassmannSearchConfig) -> f64 {
    if n == 1 {
        0.0
    } else {
        (spacing / r).max(cfg.net_resolution)
    }
}

fn search_alpha(local: &LocalSample, n: usize, h: f64, cfg: &GrassmannSearchConfig, seed: &Basis) -> Searched {
    let d = local.d;
    let obj = AlphaObjective::new(&local.w, d, n, h);
    let mut settings = cfg.settings(n, d, 1e-12);
    if n >= 2 {
        // The coverage term is only known to within the net resolution, so
        // finer angular regions cannot tighten the bracket.
        settings.grid_resolution = settings.grid_resolution.max(obj.resolution());
        settings.polish_min_step = obj.resolution() * 0.5;
        settings.restarts = settings.restarts.min(2);
    }
    let out = minimize(&obj, &settings, &[Basis::identity(d), seed.clone()]);
    let (lo, hi) = match &local.full {
        Some(full) => {
            let exact = AlphaObjective::new(full, d, n, h);
            (out.lo - local.rho, exact.eval(&out.basis, 0.0).1)
        }
        None => (out.lo, out.hi),
    };
    Searched {
        lo: lo.max(0.0),
        hi,
        certified: out.certified,
        basis: out.basis,
        evaluations: out.evaluations,
    }
}

/// Jones number `beta(x, r)`.
pub fn beta_number(s: &PointCloud, x: &[f64], r: f64, n: usize, cfg: &GrassmannSearchConfig) -> Result<Bracket> {
    Ok(beta_fit(s, x, r, n, cfg)?.bracket)
}

/// `beta(x, r)` together with the best plane found.
pub fn beta_fit(s: &PointCloud, x: &[f64], r: f64, n: usize, cfg: &GrassmannSearchConfig) -> Result<PlaneFit> {
    cfg.validate()?;
    check_center(s, x, r, n)?;
    let local = LocalSample::new(s, x, r, cfg.ball_cap);
    let b = search_beta(&local, n, cfg);
    Ok(PlaneFit {
        bracket: Bracket::new(b.lo, b.hi, b.certified),
        plane: plane_from_basis(&local, x, &b.basis, n)?,
        evaluations: b.evaluations,
    })
}

/// Reifenberg number `alpha(x, r)`.
pub fn alpha_number(s: &PointCloud, x: &[f64], r: f64, n: usize, cfg: &GrassmannSearchConfig) -> Result<Bracket> {
    Ok(extrinsic_fit(s, x, r, n, cfg)?.alpha.bracket)
}

/// Both numbers from one local sample, made mutually consistent: `alpha`
/// is at least `beta`, and the plane found for `alpha` also bounds `beta`.
pub fn extrinsic_fit(s: &PointCloud, x: &[f64], r: f64, n: usize, cfg: &GrassmannSearchConfig) -> Result<ExtrinsicFit> {
    cfg.validate()?;
    check_center(s, x, r, n)?;
    let local = LocalSample::new(s, x, r, cfg.ball_cap);
    let d = local.d;
    let beta = search_beta(&local, n, cfg);
    let h = alpha_resolution(s.spacing(), r, n, cfg);
    let alpha = search_alpha(&local, n, h, cfg, &beta.basis);

    let beta_at_alpha = sup_distance(local.all_points(), d, n, &alpha.basis);
    let (beta_hi, beta_basis) = if beta_at_alpha < beta.hi {
        (beta_at_alpha, &alpha.basis)
    } else {
        (beta.hi, &beta.basis)
    };
    let alpha_lo = alpha.lo.max(beta.lo);
    Ok(ExtrinsicFit {
        alpha: PlaneFit {
            bracket: Bracket::new(alpha_lo, alpha.hi, alpha.certified && beta.certified),
            plane: plane_from_basis(&local, x, &alpha.basis, n)?,
            evaluations: alpha.evaluations,
        },
        beta: PlaneFit {
            bracket: Bracket::new(beta.lo.min(beta_hi), beta_hi, beta.certified),
            plane: plane_from_basis(&local, x, beta_basis, n)?,
            evaluations: beta.evaluations,
        },
        subsample_radius: local.rho,
        ball_size: local.indices.len(),
    })
}

/// Part of a computed `alpha` attributable to sampling alone: the spacing
/// term of a flat grid sample plus the covering radius of the net used for
/// the coverage term. Smallness hypotheses are tested on `alpha` less this
/// amount.
pub fn sampling_slack(spacing: f64, r: f64, n: usize, cfg: &GrassmannSearchConfig) -> f64 {
    let grid = spacing / r * (n as f64).sqrt().max(2.0) / 2.0;
    let h = alpha_resolution(spacing, r, n, cfg);
    let net = if n >= 2 {
        crate::geometry::net::covering_radius(n, h.max(min_net_resolution(n)))
    } else {
        0.0
    };
    grid + net
}

/// A plane through `x` realizing the computed `beta(x, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizingPlane {
    pub plane: AffinePlane,
    pub beta_achieved: f64,
    /// Normalized Hausdorff distance of the sample to this plane, divided by
    /// the upper end of the `alpha` bracket.
    pub alpha_ratio: f64,
}

pub fn realizing_plane(s: &PointCloud, x: &[f64], r: f64, n: usize) -> Result<RealizingPlane> {
    realizing_plane_with(s, x, r, n, &GrassmannSearchConfig::default())
}

pub fn realizing_plane_with(
    s: &PointCloud,
    x: &[f64],
    r: f64,
    n: usize,
    cfg: &GrassmannSearchConfig,
) -> Result<RealizingPlane> {
    let fit = extrinsic_fit(s, x, r, n, cfg)?;
    if fit.alpha.bracket.hi - sampling_slack(s.spacing(), r, n, cfg) > ALPHA_GATE {
        return Err(FlatnessError::HypothesisViolated(format!(
            "alpha(x, r) <= {ALPHA_GATE} required, bracket upper end is {}",
            fit.alpha.bracket.hi
        )));
    }
    let alpha_at_plane = plane_alpha(s, x, r, &fit.beta.plane, cfg)?;
    let ratio = if fit.alpha.bracket.hi > 0.0 {
        alpha_at_plane / fit.alpha.bracket.hi
    } else {
        1.0
    };
    Ok(RealizingPlane {
        beta_achieved: fit.beta.bracket.hi,
        plane: fit.beta.plane,
        alpha_ratio: ratio,
    })
}

/// Upper bound on `r^-1 d_H(S ∩ B_r(x), plane ∩ B_r(x))` for a plane
/// through `x`.
pub fn plane_alpha(s: &PointCloud, x: &[f64], r: f64, plane: &AffinePlane, cfg: &GrassmannSearchConfig) -> Result<f64> {
    let n = plane.n();
    check_center(s, x, r, n)?;
    let local = LocalSample::new(s, x, r, usize::MAX);
    let basis = working_basis(&local, plane);
    let obj = AlphaObjective::new(local.all_points(), local.d, n, alpha_resolution(s.spacing(), r, n, cfg));
    Ok(obj.eval(&basis, 0.0).1)
}

/// Normalized sup distance of `S ∩ B_r(x)` to a plane through `x`.
pub fn plane_beta(s: &PointCloud, x: &[f64], r: f64, plane: &AffinePlane) -> Result<f64> {
    check_center(s, x, r, plane.n())?;
    let local = LocalSample::new(s, x, r, usize::MAX);
    let basis = working_basis(&local, plane);
    Ok(sup_distance(local.all_points(), local.d, plane.n(), &basis))
}

/// Expresses the plane's directions in the local working frame, completed
/// to an orthonormal basis.
pub(crate) fn working_basis(local: &LocalSample, plane: &AffinePlane) -> Basis {
    let d = local.d;
    let mut cols: Vec<Vec<f64>> = plane
        .frame()
        .iter()
        .map(|e| (0..d).map(|j| local.axes.column(j).iter().zip(e).map(|(a, b)| a * b).sum()).collect())
        .collect();
    for k in 0..d {
        if cols.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= dot * ci;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Basis::from_columns(d, cols.concat())
}
