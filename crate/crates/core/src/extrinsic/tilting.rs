use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extrinsic_fit, sampling_slack, ExtrinsicFit, GrassmannSearchConfig, ALPHA_GATE};
use crate::error::Result;
use crate::geometry::spatial::sq_dist;
use crate::geometry::{plane_distance, PointCloud};
use crate::profile::{profile_centers, DyadicConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiltKind {
    /// Same center, radii `r` and `2r`.
    Scale,
    /// Centers closer than `r / 4`, same radius.
    Space,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltRecord {
    pub kind: TiltKind,
    pub center: usize,
    pub other: usize,
    pub i: i32,
    /// Distance between the two realizing planes.
    pub lhs: f64,
    /// Sum of the two `beta` values.
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltingReport {
    pub records: Vec<TiltRecord>,
    /// Pairs dropped because an `alpha` exceeded the gate.
    pub skipped_hypothesis: usize,
    /// Pairs dropped because a radius was below the floor or no second
    /// center was close enough.
    pub skipped_other: usize,
    pub alpha_gate: f64,
}

impl TiltingReport {
    pub fn max_ratio(&self, kind: TiltKind) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.ratio)
            .reduce(f64::max)
    }
}

enum Outcome {
    Record(TiltRecord),
    Hypothesis,
    Other,
}

/// Measures how much realizing planes tilt between nearby scales and
/// nearby centers, over the profile centers and scales of `cfg`.
///
/// A pair is used only when both `alpha` values, less
/// [`sampling_slack`], are at most [`ALPHA_GATE`].
pub fn tilting_report(s: &PointCloud, cfg: &DyadicConfig, search: &GrassmannSearchConfig) -> Result<TiltingReport> {
    cfg.validate()?;
    search.validate()?;
    let (centers, _) = profile_centers(s, 1.0, cfg.center_sample_cap);
    let scales: Vec<i32> = cfg.scales().collect();
    let jobs: Vec<(usize, i32)> = centers
        .iter()
        .flat_map(|&c| scales.iter().map(move |&i| (c, i)))
        .collect();
    let fit = |idx: usize, r: f64| -> Option<Result<ExtrinsicFit>> {
        if r < super::SCALE_FLOOR_FACTOR * s.spacing() * (1.0 - 1e-12) {
            None
        } else {
            Some(extrinsic_fit(s, s.point(idx), r, cfg.n, search))
        }
    };
    let gated = |f: &ExtrinsicFit, r: f64| f.alpha.bracket.hi - sampling_slack(s.spacing(), r, cfg.n, search) <= ALPHA_GATE;
    let outcomes: Vec<Result<Vec<Outcome>>> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let r = (-i as f64).exp2();
            let mut out = Vec::new();
            let Some(here) = fit(c, r).transpose()? else {
                return Ok(vec![Outcome::Other, Outcome::Other]);
            };
            match fit(c, 2.0 * r).transpose()? {
                None => out.push(Outcome::Other),
                Some(up) if gated(&here, r) && gated(&up, 2.0 * r) => {
                    out.push(Outcome::Record(record(TiltKind::Scale, c, c, i, &here, &up)?))
                }
                Some(_) => out.push(Outcome::Hypothesis),
            }
            let near = s.ball(s.point(c), 0.25 * r * (1.0 - 1e-9));
            let partner = near.into_iter().filter(|&j| j != c).max_by(|&a, &b| {
                let da = sq_dist(s.point(a), s.point(c));
                let db = sq_dist(s.point(b), s.point(c));
                da.total_cmp(&db).then(b.cmp(&a))
            });
            match partner {
                None => out.push(Outcome::Other),
                Some(y) => {
                    let there = extrinsic_fit(s, s.point(y), r, cfg.n, search)?;
                    if gated(&here, r) && gated(&there, r) {
                        out.push(Outcome::Record(record(TiltKind::Space, c, y, i, &here, &there)?));
                    } else {
                        out.push(Outcome::Hypothesis);
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut report = TiltingReport {
        records: Vec::new(),
        skipped_hypothesis: 0,
        skipped_other: 0,
        alpha_gate: ALPHA_GATE,
    };
    for o in outcomes {
        for item in o? {
            match item {
                Outcome::Record(r) => report.records.push(r),
                Outcome::Hypothesis => report.skipped_hypothesis += 1,
                Outcome::Other => report.skipped_other += 1,
            }
        }
    }
    Ok(report)
}

fn record(kind: TiltKind, center: usize, other: usize, i: i32, f: &ExtrinsicFit, g: &ExtrinsicFit) -> Result<TiltRecord> {
    let lhs = plane_distance(&f.beta.plane, &g.beta.plane)?;
    let rhs = f.beta.bracket.hi + g.beta.bracket.hi;
    Ok(TiltRecord {
        kind,
        center,
        other,
        i,
        lhs,
        rhs,
        ratio: lhs / rhs.max(1e-15),
    })
}
