//! Every generated set satisfies the facts it reports about itself.

use flatness::datasets::{
    circle_arc, dyadic_snowflake, flat_disk, gapped_segment, lipschitz_graph, thin_triangle, ExpectedFact,
    GeneratedSet,
};
use flatness::extrinsic::{extrinsic_fit, sampling_slack, GrassmannSearchConfig};
use flatness::intrinsic::{intrinsic_fit, projection_isometry, IntrinsicSettings};
use flatness::profile::{dyadic_profile_extrinsic, DyadicConfig};
use flatness::verification::intrinsic_slack;

fn check_facts(set: &GeneratedSet) {
    let search = GrassmannSearchConfig::default();
    let cfg = DyadicConfig { n: set.meta.n, ..Default::default() };
    let settings = IntrinsicSettings { draws: 4, ..Default::default() };
    let s = set.cloud();
    let n = set.meta.n;
    let noise = |r: f64| 2.0 * s.spacing() / r;
    for fact in &set.meta.expected {
        match fact {
            ExpectedFact::AlphaAtLeast { center, radius, value } => {
                let alpha = extrinsic_fit(s, center, *radius, n, &search).unwrap().alpha.bracket;
                assert!(alpha.lo >= value - noise(*radius), "{fact:?}: {alpha:?}");
            }
            ExpectedFact::ProjectionDistortionAtMost { center, radius, value } => {
                let p = projection_isometry(s, center, *radius, n, 1.0, &cfg, &search).unwrap();
                assert!(p.measured_distortion <= value + noise(*radius), "{fact:?}: {}", p.measured_distortion);
            }
            ExpectedFact::BetaApprox { center, radius, value } => {
                let beta = extrinsic_fit(s, center, *radius, n, &search).unwrap().beta.bracket;
                let slack = sampling_slack(s.spacing(), *radius, n, &search);
                if *value == 0.0 {
                    assert!(beta.hi <= slack, "{fact:?}: {beta:?}");
                } else {
                    assert!(beta.hi <= 2.0 * value + slack && beta.lo >= value / 2.0 - slack, "{fact:?}: {beta:?}");
                }
            }
            ExpectedFact::AlphaAtMostFourA { center, radius } => {
                let ext = extrinsic_fit(s, center, *radius, n, &search).unwrap();
                let int = intrinsic_fit(s, center, *radius, n, &settings, &search).unwrap();
                let slack = settings.net_resolution + ext.subsample_radius.max(int.subsample_radius);
                assert!(ext.alpha.bracket.hi <= 4.0 * int.a.lo + slack, "{fact:?}");
            }
            ExpectedFact::Flat => {
                let x = vec![0.0; s.dim()];
                let ext = extrinsic_fit(s, &x, 1.0, n, &search).unwrap();
                let int = intrinsic_fit(s, &x, 1.0, n, &settings, &search).unwrap();
                let ext_slack = sampling_slack(s.spacing(), 1.0, n, &search);
                let int_slack = intrinsic_slack(s.spacing(), 1.0, &cfg, &search);
                assert!(ext.alpha.bracket.hi <= ext_slack && ext.beta.bracket.hi <= ext_slack);
                assert!(int.a.hi <= int_slack && int.b.hi <= int_slack, "{:?} {:?} {int_slack}", int.a, int.b);
            }
            ExpectedFact::BetaDecay { .. } => {}
        }
    }
}

#[test]
fn thin_triangle_facts() {
    check_facts(&thin_triangle(0.05, 2000).unwrap());
}

#[test]
fn gapped_segment_facts() {
    check_facts(&gapped_segment(0.05, 2000).unwrap());
}

#[test]
fn circle_arc_facts() {
    check_facts(&circle_arc(1.0, 4001).unwrap());
}

#[test]
fn flat_facts() {
    check_facts(&flat_disk(1, 2, 4001).unwrap());
    check_facts(&flat_disk(2, 3, 10_000).unwrap());
    check_facts(&lipschitz_graph(0.0, 3, 4001, 1, 3, 0).unwrap());
}

#[test]
fn graph_alpha_at_unit_scale() {
    let set = lipschitz_graph(0.01, 16, 8000, 1, 2, 0).unwrap();
    let alpha = extrinsic_fit(set.cloud(), &[0.0, 0.0], 1.0, 1, &GrassmannSearchConfig::default()).unwrap();
    assert!(alpha.alpha.bracket.hi <= 0.02, "{:?}", alpha.alpha.bracket);
}

/// Ratios `beta_i.hi / (c 2^(-gamma i))` (or `alpha_i.hi`) over `scales`.
fn decay_ratios(gamma: f64, depth: usize, m: usize, scales: std::ops::RangeInclusive<i32>, use_alpha: bool) -> Vec<f64> {
    let set = dyadic_snowflake(gamma, depth, m, 0).unwrap();
    let Some(ExpectedFact::BetaDecay { c, .. }) = set.meta.expected.first().cloned() else {
        panic!("snowflake reports its decay");
    };
    let cfg = DyadicConfig { i_min: scales.start() + 2, i_max: *scales.end(), center_sample_cap: 16, ..Default::default() };
    let profile = dyadic_profile_extrinsic(set.cloud(), &cfg, &GrassmannSearchConfig::default()).unwrap();
    scales
        .map(|i| {
            let rec = profile.scale(i).unwrap();
            let v = if use_alpha { rec.alpha } else { rec.beta }.unwrap().hi;
            v / (c * (-gamma * f64::from(i)).exp2())
        })
        .collect()
}

#[test]
fn snowflake_beta_tracks_square_root_decay() {
    let ratios = decay_ratios(0.5, 12, 20_000, 0..=8, false);
    assert!(ratios.iter().all(|r| (0.5..=2.0).contains(r)), "{ratios:?}");
}

#[test]
fn snowflake_alpha_tracks_linear_decay() {
    let ratios = decay_ratios(1.0, 8, 80_000, 2..=6, true);
    assert!(ratios.iter().all(|r| (0.25..=4.0).contains(r)), "{ratios:?}");
}
