//! Empirical checks of the inequalities that relate extrinsic and intrinsic
//! flatness, built on top of pointwise fits and dyadic profiles.
//!
//! Every check compares the upper end of the left side with the lower end of
//! the right side, so a small ratio is meaningful despite estimation error.
//! Unknown constants are never inputs: the ratio is the measured constant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FlatnessError, Result};
use crate::extrinsic::{extrinsic_fit, sampling_slack, GrassmannSearchConfig, ALPHA_GATE, SCALE_FLOOR_FACTOR};
use crate::geometry::{Bracket, PointCloud};
use crate::intrinsic::intrinsic_fit;
use crate::profile::{DyadicConfig, FlatnessProfile};
use crate::simplex::max_simplex_volume;

/// Denominator floor of every ratio.
pub const RATIO_FLOOR: f64 = 1e-15;
/// Empirical cap on the constant of the `alpha^2 <= C a` check.
pub const RATIO_CAP: f64 = 100.0;
/// Normalized simplex volumes below this make the `beta` converse vacuous.
pub const VOLUME_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statement {
    #[serde(rename = "precise_A")]
    PreciseA,
    #[serde(rename = "precise_B")]
    PreciseB,
    #[serde(rename = "sum_A")]
    SumA,
    #[serde(rename = "sum_B")]
    SumB,
    #[serde(rename = "converse_alpha")]
    ConverseAlpha,
    #[serde(rename = "converse_beta")]
    ConverseBeta,
}

impl Statement {
    pub const ALL: [Statement; 6] = [
        Statement::PreciseA,
        Statement::PreciseB,
        Statement::SumA,
        Statement::SumB,
        Statement::ConverseAlpha,
        Statement::ConverseBeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statement::PreciseA => "precise_A",
            Statement::PreciseB => "precise_B",
            Statement::SumA => "sum_A",
            Statement::SumB => "sum_B",
            Statement::ConverseAlpha => "converse_alpha",
            Statement::ConverseBeta => "converse_beta",
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statement {
    type Err = FlatnessError;

    fn from_str(s: &str) -> Result<Self> {
        Statement::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| invalid("statement", format!("unsupported statement `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub statement: Statement,
    pub lhs: Bracket,
    pub rhs: Bracket,
    /// `lhs.hi / max(rhs.lo, ratio_floor)`.
    pub ratio: f64,
    /// `lhs.lo / max(rhs.hi, ratio_floor)`, the optimistic orientation.
    pub anti_ratio: f64,
    pub ratio_floor: f64,
    pub hypotheses_met: bool,
    /// Set when `lhs.hi` is within sampling slack of zero, so the inequality
    /// holds for any constant.
    pub trivial: bool,
    pub slack: f64,
    pub lambda: Option<f64>,
    pub i: Option<i32>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    /// Last scale that entered a truncated sum or sup.
    pub truncated_at: Option<i32>,
    /// Geometric estimate of the omitted tail of a truncated sum; infinite
    /// when the last terms do not decay.
    pub tail: Option<f64>,
    /// Running sums of the left side, one per scale.
    pub partial_sums: Vec<f64>,
    /// `(ln alpha.lo, ln a.hi)` for slope regressions.
    pub log_pair: Option<(f64, f64)>,
    pub vacuous: bool,
    /// Outcome of the small-`alpha` corollary check, when it applies.
    pub corollary: Option<bool>,
    pub notes: Vec<String>,
}

impl VerificationRecord {
    fn new(statement: Statement, lhs: Bracket, rhs: Bracket, slack: f64) -> Self {
        VerificationRecord {
            statement,
            lhs,
            rhs,
            ratio: lhs.hi / rhs.lo.max(RATIO_FLOOR),
            anti_ratio: lhs.lo / rhs.hi.max(RATIO_FLOOR),
            ratio_floor: RATIO_FLOOR,
            hypotheses_met: true,
            trivial: lhs.hi <= slack,
            slack,
            lambda: None,
            i: None,
            center: None,
            radius: None,
            truncated_at: None,
            tail: None,
            partial_sums: Vec::new(),
            log_pair: None,
            vacuous: false,
            corollary: None,
            notes: Vec::new(),
        }
    }
}

fn radius_of(i: i32) -> f64 {
    (-i as f64).exp2()
}

/// Sampling slack of an intrinsic upper bound at radius `r`.
pub fn intrinsic_slack(spacing: f64, r: f64, cfg: &DyadicConfig, search: &GrassmannSearchConfig) -> f64 {
    2.0 * sampling_slack(spacing, r, cfg.n, search) + cfg.net_resolution
}

fn alpha_gated(profile: &FlatnessProfile, i: i32) -> Option<bool> {
    let rec = profile.scale(i)?;
    let alpha = rec.alpha?;
    let slack = sampling_slack(profile.cloud.spacing, rec.radius, profile.config.n, &profile.search);
    Some(alpha.hi - slack <= ALPHA_GATE)
}

/// `sup_j (beta_{i-2} + ... + beta_{i+j})^2 / 2^j` over the profile scales,
/// for the lower and upper ends of the `beta` brackets.
fn beta_sup(profile: &FlatnessProfile, i: i32) -> Result<(Bracket, i32, bool)> {
    let mut sum_lo = 0.0;
    let mut sum_hi = 0.0;
    let (mut sup_lo, mut sup_hi): (f64, f64) = (0.0, 0.0);
    let mut last = None;
    let mut certified = true;
    for rec in profile.scales.iter().filter(|r| r.i >= i - 2) {
        let Some(beta) = rec.beta else { break };
        sum_lo += beta.lo;
        sum_hi += beta.hi;
        certified &= beta.certified;
        let j = rec.i - i;
        if j >= 0 {
            let w = (-j as f64).exp2();
            sup_lo = sup_lo.max(sum_lo * sum_lo * w);
            sup_hi = sup_hi.max(sum_hi * sum_hi * w);
        }
        last = Some(rec.i);
    }
    match last {
        Some(l) if l >= i => {
            let truncated = l == profile.config.i_max || profile.scale(l + 1).is_some_and(|r| r.below_floor);
            Ok((Bracket::new(sup_lo, sup_hi, certified), l, truncated))
        }
        _ => Err(FlatnessError::InsufficientData(format!("profile has no beta values for scales {}..={i}", i - 2))),
    }
}

fn precise(
    statement: Statement,
    s: &PointCloud,
    x: &[f64],
    i: i32,
    profile: &FlatnessProfile,
    search: &GrassmannSearchConfig,
) -> Result<VerificationRecord> {
    let cfg = &profile.config;
    let r = radius_of(i);
    let (sup, last, truncated) = beta_sup(profile, i)?;
    let fit = intrinsic_fit(s, x, r, cfg.n, &cfg.intrinsic_settings(), search)?;
    let mut notes = Vec::new();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let inside = norm <= 1.0 - r + 1e-12;
    if !inside {
        notes.push(format!("|x| = {norm} exceeds 1 - 2^-{i}"));
    }
    let mut gated = true;
    for rec in profile.scales.iter().filter(|rec| rec.i >= i - 2 && rec.i <= last) {
        if alpha_gated(profile, rec.i) != Some(true) {
            gated = false;
            notes.push(format!("alpha_{} above the gate {ALPHA_GATE}", rec.i));
        }
    }
    let hypotheses_met = inside && gated;
    if cfg.enforce_gate && !hypotheses_met {
        return Err(FlatnessError::HypothesisViolated(notes.join("; ")));
    }
    let (lhs, rhs) = match statement {
        Statement::PreciseA => {
            let alpha = profile
                .scale(i)
                .and_then(|rec| rec.alpha)
                .ok_or_else(|| FlatnessError::InsufficientData(format!("profile has no alpha at scale {i}")))?;
            let rhs = Bracket::new(
                sup.lo.max(alpha.lo * alpha.lo),
                sup.hi.max(alpha.hi * alpha.hi),
                sup.certified && alpha.certified,
            );
            (fit.a, rhs)
        }
        _ => (fit.b, sup),
    };
    let mut rec = VerificationRecord::new(statement, lhs, rhs, intrinsic_slack(s.spacing(), r, cfg, search));
    rec.hypotheses_met = hypotheses_met;
    rec.i = Some(i);
    rec.center = Some(x.to_vec());
    rec.radius = Some(r);
    rec.truncated_at = truncated.then_some(last);
    rec.notes = notes;
    Ok(rec)
}

/// `a(x, 2^-i)` against `max(sup_j (beta_{i-2} + ... + beta_{i+j})^2 / 2^j, alpha_i^2)`,
/// with `beta_j` and `alpha_i` read from `profile`.
///
/// The hypotheses are `|x| <= 1 - 2^-i` and `alpha_j <= ALPHA_GATE` (less
/// sampling slack) for every profile scale `j >= i - 2`. A violation is
/// reported in the record, or returned as an error when the profile
/// configuration sets `enforce_gate`.
pub fn verify_precise_a(
    s: &PointCloud,
    x: &[f64],
    i: i32,
    profile: &FlatnessProfile,
    search: &GrassmannSearchConfig,
) -> Result<VerificationRecord> {
    precise(Statement::PreciseA, s, x, i, profile, search)
}

/// `b(x, 2^-i)` against `sup_j (beta_{i-2} + ... + beta_{i+j})^2 / 2^j`.
pub fn verify_precise_b(
    s: &PointCloud,
    x: &[f64],
    i: i32,
    profile: &FlatnessProfile,
    search: &GrassmannSearchConfig,
) -> Result<VerificationRecord> {
    precise(Statement::PreciseB, s, x, i, profile, search)
}

/// Geometric tail estimate from the last two terms of a series.
fn geometric_tail(terms: &[f64]) -> f64 {
    match terms {
        [.., _, last] if *last == 0.0 => 0.0,
        [.., prev, last] if last < prev => {
            let q = last / prev;
            last * q / (1.0 - q)
        }
        _ => f64::INFINITY,
    }
}

fn sum(statement: Statement, profile: &FlatnessProfile, lambda: f64) -> Result<VerificationRecord> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", "must be positive"));
    }
    let cfg = &profile.config;
    cfg.validate()?;
    let start = cfg.i_min;
    let pick = |rec: &crate::profile::ScaleRecord| match statement {
        Statement::SumA => (rec.a, rec.alpha),
        _ => (rec.b, rec.beta),
    };
    let mut terms = Vec::new();
    let mut partial = Vec::new();
    let mut lhs_lo = 0.0;
    let mut lhs_hi = 0.0;
    let mut last = None;
    let mut certified = true;
    for rec in profile.scales.iter().filter(|r| r.i >= start) {
        let (Some(left), _) = pick(rec) else { break };
        lhs_lo += left.lo.powf(lambda);
        lhs_hi += left.hi.powf(lambda);
        certified &= left.certified;
        terms.push(left.hi.powf(lambda));
        partial.push(lhs_hi);
        last = Some(rec.i);
    }
    let Some(last) = last else {
        return Err(FlatnessError::InsufficientData(format!("profile has no intrinsic values from scale {start}")));
    };
    let mut rhs_lo = 0.0;
    let mut rhs_hi = 0.0;
    let mut rhs_cert = true;
    let mut notes = Vec::new();
    let mut gated = true;
    for rec in profile.scales.iter().filter(|r| r.i >= start - 2 && r.i <= last) {
        let Some(right) = pick(rec).1 else {
            return Err(FlatnessError::InsufficientData(format!("profile has no extrinsic values at scale {}", rec.i)));
        };
        rhs_lo += right.lo.powf(2.0 * lambda);
        rhs_hi += right.hi.powf(2.0 * lambda);
        rhs_cert &= right.certified;
        if alpha_gated(profile, rec.i) != Some(true) {
            gated = false;
            notes.push(format!("alpha_{} above the gate {ALPHA_GATE}", rec.i));
        }
    }
    if cfg.enforce_gate && !gated {
        return Err(FlatnessError::HypothesisViolated(notes.join("; ")));
    }
    let r_last = radius_of(last);
    let slack = intrinsic_slack(profile.cloud.spacing, r_last, cfg, &profile.search).powf(lambda);
    let mut rec = VerificationRecord::new(
        statement,
        Bracket::new(lhs_lo, lhs_hi, certified),
        Bracket::new(rhs_lo, rhs_hi, rhs_cert),
        slack * partial.len() as f64,
    );
    rec.hypotheses_met = gated;
    rec.lambda = Some(lambda);
    rec.i = Some(start);
    rec.truncated_at = Some(last);
    rec.tail = Some(geometric_tail(&terms));
    rec.partial_sums = partial;
    rec.notes = notes;
    Ok(rec)
}

/// `sum_{i >= i_min} a_i^lambda` against `sum_{i >= i_min - 2} alpha_i^(2 lambda)`
/// over the computed profile scales.
///
/// The sums stop at the last computed scale; `tail` estimates the omitted
/// part of the left side from the decay of its last two terms.
pub fn verify_sum_a(profile: &FlatnessProfile, lambda: f64) -> Result<VerificationRecord> {
    sum(Statement::SumA, profile, lambda)
}

/// `sum_{i >= i_min} b_i^lambda` against `sum_{i >= i_min - 2} beta_i^(2 lambda)`.
pub fn verify_sum_b(profile: &FlatnessProfile, lambda: f64) -> Result<VerificationRecord> {
    sum(Statement::SumB, profile, lambda)
}

/// `alpha(x, r)^2` against `a(x, r)`. Unconditional; also records
/// `(ln alpha.lo, ln a.hi)` for slope fits.
pub fn verify_converse_alpha(
    s: &PointCloud,
    x: &[f64],
    r: f64,
    cfg: &DyadicConfig,
    search: &GrassmannSearchConfig,
) -> Result<VerificationRecord> {
    cfg.validate()?;
    let ext = extrinsic_fit(s, x, r, cfg.n, search)?;
    let int = intrinsic_fit(s, x, r, cfg.n, &cfg.intrinsic_settings(), search)?;
    let alpha = ext.alpha.bracket;
    let lhs = Bracket::new(alpha.lo * alpha.lo, alpha.hi * alpha.hi, alpha.certified);
    let slack = sampling_slack(s.spacing(), r, cfg.n, search).powi(2);
    let mut rec = VerificationRecord::new(Statement::ConverseAlpha, lhs, int.a, slack);
    rec.center = Some(x.to_vec());
    rec.radius = Some(r);
    if alpha.lo > 0.0 && int.a.hi > 0.0 {
        rec.log_pair = Some((alpha.lo.ln(), int.a.hi.ln()));
    }
    if !rec.trivial && rec.ratio > RATIO_CAP {
        rec.notes.push(format!("ratio {} exceeds the cap {RATIO_CAP}", rec.ratio));
    }
    Ok(rec)
}

/// `beta(x, r)` against `min(sqrt(b) / V, V^(1/n))`, where `V` is the
/// largest normalized n-simplex volume in the ball.
///
/// When `V` vanishes the record is vacuous. When `alpha < 1/8` the record
/// also checks `beta <= 100 C sqrt(b)` with `C` the measured ratio.
pub fn verify_converse_beta(
    s: &PointCloud,
    x: &[f64],
    r: f64,
    cfg: &DyadicConfig,
    search: &GrassmannSearchConfig,
) -> Result<VerificationRecord> {
    cfg.validate()?;
    let n = cfg.n;
    let ext = extrinsic_fit(s, x, r, n, search)?;
    let int = intrinsic_fit(s, x, r, n, &cfg.intrinsic_settings(), search)?;
    let volume = max_simplex_volume(s, x, r, n)?;
    let v = volume.value;
    let vacuous = v <= VOLUME_FLOOR;
    let side = |b: f64| {
        if vacuous {
            0.0
        } else {
            (b.sqrt() / v).min(v.powf(1.0 / n as f64))
        }
    };
    let slack = sampling_slack(s.spacing(), r, n, search);
    let rhs = Bracket::new(side(int.b.lo), side(int.b.hi), int.b.certified && volume.exact);
    let mut rec = VerificationRecord::new(Statement::ConverseBeta, ext.beta.bracket, rhs, slack);
    rec.center = Some(x.to_vec());
    rec.radius = Some(r);
    rec.vacuous = vacuous;
    if vacuous {
        rec.notes.push(format!("simplex volume {v} below {VOLUME_FLOOR}"));
    }
    if !volume.exact {
        rec.notes.push("simplex volume from local search".into());
    }
    if ext.alpha.bracket.hi < 0.125 && !vacuous {
        rec.corollary = Some(ext.beta.bracket.hi <= 100.0 * rec.ratio * int.b.hi.sqrt() + slack);
    }
    Ok(rec)
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn slope_analysis(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < 3 {
        return Err(FlatnessError::InsufficientData(format!("need at least 3 pairs, got {}", pairs.len())));
    }
    if let Some(p) = pairs.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite())) {
        return Err(FlatnessError::InsufficientData(format!("nonpositive pair {p:?}")));
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FlatnessError::InsufficientData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Smallest scale index whose radius stays above the sampling floor.
pub fn deepest_scale(spacing: f64) -> i32 {
    (1.0 / (SCALE_FLOOR_FACTOR * spacing)).log2().floor() as i32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{flat_disk, thin_triangle};
    use crate::profile::dyadic_profile;

    #[test]
    fn slope_of_power_laws() {
        let sq: Vec<(f64, f64)> = [0.01, 0.02, 0.04].iter().map(|&t| (t, t * t)).collect();
        let fit = slope_analysis(&sq).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let id: Vec<(f64, f64)> = [0.01, 0.02, 0.04].iter().map(|&t| (t, t)).collect();
        assert!((slope_analysis(&id).unwrap().slope - 1.0).abs() < 1e-12);
        assert!(slope_analysis(&sq[..2]).is_err());
        assert!(slope_analysis(&[(1.0, 0.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn statement_names_round_trip() {
        for st in Statement::ALL {
            assert_eq!(st.name().parse::<Statement>().unwrap(), st);
            assert_eq!(serde_json::to_string(&st).unwrap(), format!("\"{}\"", st.name()));
        }
        assert!("precise_C".parse::<Statement>().is_err());
    }

    #[test]
    fn geometric_tail_cases() {
        assert_eq!(geometric_tail(&[0.4, 0.0]), 0.0);
        assert!((geometric_tail(&[0.4, 0.2]) - 0.2).abs() < 1e-15);
        assert!(geometric_tail(&[0.2, 0.4]).is_infinite());
        assert!(geometric_tail(&[0.2]).is_infinite());
    }

    #[test]
    fn thin_triangle_precise_b() {
        let set = thin_triangle(0.1, 2000).unwrap();
        let s = set.cloud();
        let cfg = DyadicConfig {
            i_min: 2,
            i_max: 4,
            ..DyadicConfig::default()
        };
        let search = GrassmannSearchConfig::default();
        let profile = dyadic_profile(s, &cfg, &search).unwrap();
        let rec = verify_precise_b(s, &[0.0, 0.0], 0, &profile, &search).unwrap();
        assert!(rec.lhs.hi <= 0.04 + rec.slack, "{rec:?}");
        assert!(rec.rhs.lo > 0.0 && rec.ratio.is_finite());
        assert!(!rec.hypotheses_met);
        let rec = verify_precise_a(s, &[0.0, 0.0], 0, &profile, &search).unwrap();
        assert!(rec.rhs.lo >= 0.01 - 1e-9, "{rec:?}");
    }

    #[test]
    fn flat_disk_records_are_trivial() {
        let set = flat_disk(1, 2, 4001).unwrap();
        let s = set.cloud();
        let cfg = DyadicConfig {
            i_min: 2,
            i_max: 5,
            ..DyadicConfig::default()
        };
        let search = GrassmannSearchConfig::default();
        let profile = dyadic_profile(s, &cfg, &search).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            let rec = verify_sum_a(&profile, lambda).unwrap();
            assert!(rec.hypotheses_met);
            assert!(rec.trivial, "{rec:?}");
            assert!(rec.partial_sums.windows(2).all(|w| w[0] <= w[1]));
        }
        let rec = verify_precise_b(s, &[0.0, 0.0], 3, &profile, &search).unwrap();
        assert!(rec.hypotheses_met && rec.trivial, "{rec:?}");
        let rec = verify_converse_alpha(s, &[0.0, 0.0], 0.5, &cfg, &search).unwrap();
        assert!(rec.trivial, "{rec:?}");
    }

    #[test]
    fn degenerate_cluster_is_vacuous() {
        let pts: Vec<Vec<f64>> = (0..50).map(|k| vec![0.0, 1e-9 * k as f64, 0.0]).collect();
        let s = PointCloud::with_spacing(pts.concat(), 3, 1e-4).unwrap();
        let cfg = DyadicConfig {
            n: 2,
            ..DyadicConfig::default()
        };
        let rec = verify_converse_beta(&s, &[0.0, 0.0, 0.0], 1.0, &cfg, &GrassmannSearchConfig::default()).unwrap();
        assert!(rec.vacuous, "{rec:?}");
        assert_eq!(rec.rhs.hi, 0.0);
    }
}
