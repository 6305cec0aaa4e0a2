use super::*;
use crate::datasets::{flat_disk, gapped_segment, lipschitz_graph, thin_triangle};
use crate::extrinsic::extrinsic_fit;

fn settings() -> IntrinsicSettings {
    IntrinsicSettings::default()
}

#[test]
fn thin_triangle_projection_is_a_square_law_isometry() {
    let eps = 0.1;
    let set = thin_triangle(eps, 2000).unwrap();
    let t = std::time::Instant::now();
    let fit = intrinsic_fit(set.cloud(), &[0.0, 0.0], 1.0, 1, &settings(), &GrassmannSearchConfig::default()).unwrap();
    eprintln!("thin triangle fit {:?}: {fit:?}", t.elapsed());
    assert!(fit.b.hi <= 4.0 * eps * eps + 4.0 / 2000.0, "{fit:?}");
    assert!(fit.a.hi <= 8.0 * eps * eps + 4.0 / 2000.0, "{fit:?}");
    let ext = extrinsic_fit(set.cloud(), &[0.0, 0.0], 1.0, 1, &GrassmannSearchConfig::default()).unwrap();
    assert!(fit.a.lo <= ext.alpha.bracket.hi);
    assert!(fit.b.lo <= 2.0 * ext.beta.bracket.hi);
}

#[test]
fn flat_disk_numbers_vanish_up_to_sampling() {
    let set = flat_disk(2, 3, 2601).unwrap();
    let s = set.cloud();
    let t = std::time::Instant::now();
    let fit = intrinsic_fit(s, &[0.0, 0.0, 0.0], 1.0, 2, &settings(), &GrassmannSearchConfig::default()).unwrap();
    eprintln!("flat disk fit {:?}: {fit:?}", t.elapsed());
    let h = s.spacing().max(1.0 / 200.0);
    assert!(fit.b.hi <= 1e-12, "{fit:?}");
    assert!(fit.a.hi <= 2.0 * (s.spacing() + h), "{fit:?}");
}

#[test]
fn gapped_segment_lower_bound_controls_alpha() {
    for g in [0.01, 0.05] {
        let set = gapped_segment(g, 2000).unwrap();
        let x = [g, 0.0];
        let fit = intrinsic_fit(set.cloud(), &x, 1.0, 1, &settings(), &GrassmannSearchConfig::default()).unwrap();
        let ext = extrinsic_fit(set.cloud(), &x, 1.0, 1, &GrassmannSearchConfig::default()).unwrap();
        eprintln!("gap {g}: {:?} {:?} {:?}", fit.a, fit.a_lower_source, ext.alpha.bracket);
        assert!(ext.alpha.bracket.hi <= 4.0 * fit.a.lo + 4.0 * set.cloud().spacing(), "{g}");
        assert!(fit.a.lo <= ext.alpha.bracket.hi);
    }
}

#[test]
fn projection_certificate_on_graph() {
    let set = lipschitz_graph(0.02, 3, 4001, 1, 2, 1).unwrap();
    let cfg = DyadicConfig::default();
    let t = std::time::Instant::now();
    let p = projection_isometry(set.cloud(), &[0.0, 0.0], 0.25, 1, 64.0, &cfg, &GrassmannSearchConfig::default()).unwrap();
    eprintln!("certificate {:?}: {p:?}", t.elapsed());
    assert!(p.certificate.theta_prime >= p.certificate.theta);
    assert!(p.measured_distortion <= p.certificate.theta, "{p:?}");
}

#[test]
fn flat_projection_is_isometric() {
    let set = lipschitz_graph(0.0, 3, 4001, 1, 2, 1).unwrap();
    let p = projection_isometry(set.cloud(), &[0.0, 0.0], 0.25, 1, 64.0, &DyadicConfig::default(), &GrassmannSearchConfig::default()).unwrap();
    assert!(p.measured_distortion <= 1e-9);
    assert!(p.gate_met);
}
