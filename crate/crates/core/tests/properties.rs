use flatness::datasets::lipschitz_graph;
use flatness::extrinsic::{extrinsic_fit, realizing_plane, GrassmannSearchConfig};
use flatness::geometry::{pitagora_residual, plane_distance};
use flatness::intrinsic::{gh_bruteforce, intrinsic_fit, FiniteMetricSpace, IntrinsicSettings};
use flatness::io::{read_csv, read_json, to_csv, to_json};
use flatness::simplex::{cayley_menger_volume, Simplex};
use flatness::{AffinePlane, PointCloud};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Curve sample through the origin: a wavy graph over `[-1.2, 1.2]` with
/// jitter, embedded in the first two coordinates of R^d.
fn wavy_cloud(d: usize, amp: f64, freq: f64, phase: f64, jitter: &[f64]) -> PointCloud {
    let k = jitter.len() as i32;
    let h = 1.2 / f64::from(k);
    let f = |t: f64| amp * ((freq * t + phase).sin() - phase.sin());
    let mut pts = Vec::new();
    for i in -k..=k {
        let t = if i == 0 { 0.0 } else { f64::from(i) * h + jitter[i.unsigned_abs() as usize % jitter.len()] * h * 0.25 };
        let mut p = vec![0.0; d];
        p[0] = t;
        p[1] = f(t);
        if d > 2 && i != 0 {
            p[2] = jitter[(i.unsigned_abs() as usize + 1) % jitter.len()] * amp * 0.5;
        }
        pts.push(p);
    }
    PointCloud::new(pts).unwrap()
}

fn rotation(d: usize, entries: &[f64]) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |i, j| entries[(i * d + j) % entries.len()] + if i == j { 0.5 } else { 0.0 });
    let qr = g.qr();
    qr.q()
}

fn cloud_strategy() -> impl Strategy<Value = (usize, f64, f64, f64, Vec<f64>)> {
    (2usize..=3, 0.0..0.2f64, 0.5..4.0f64, 0.0..6.0f64, prop::collection::vec(-1.0..1.0f64, 40..=60))
}

fn plane_strategy(d: usize, n: usize) -> impl Strategy<Value = AffinePlane> {
    (prop::collection::vec(-2.0..2.0f64, d), prop::collection::vec(-1.0..1.0f64, d * n)).prop_filter_map(
        "degenerate frame",
        move |(base, dirs)| AffinePlane::new(base, dirs.chunks(d).map(<[f64]>::to_vec).collect()).ok(),
    )
}

fn metric_strategy() -> impl Strategy<Value = FiniteMetricSpace> {
    (1usize..=5, 1usize..=3).prop_flat_map(|(k, d)| {
        prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), k)
            .prop_map(|pts| FiniteMetricSpace::from_points(&pts).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn brackets_are_ordered_and_consistent((d, amp, freq, phase, jitter) in cloud_strategy()) {
        let s = wavy_cloud(d, amp, freq, phase, &jitter);
        let x = vec![0.0; d];
        let search = GrassmannSearchConfig::default();
        let ext = extrinsic_fit(&s, &x, 1.0, 1, &search).unwrap();
        let int = intrinsic_fit(&s, &x, 1.0, 1, &IntrinsicSettings { draws: 2, ..Default::default() }, &search).unwrap();
        let (alpha, beta) = (ext.alpha.bracket, ext.beta.bracket);
        for b in [alpha, beta, int.a, int.b] {
            prop_assert!(0.0 <= b.lo && b.lo <= b.hi, "{b:?}");
        }
        prop_assert!(beta.lo <= alpha.hi + 1e-12);
        prop_assert!(int.a.lo <= alpha.hi + 1e-12);
        prop_assert!(int.b.lo <= 2.0 * beta.hi + 1e-12);
    }

    #[test]
    fn extrinsic_numbers_are_similarity_invariant(
        (d, amp, freq, phase, jitter) in cloud_strategy(),
        entries in prop::collection::vec(-1.0..1.0f64, 9),
        shift in prop::collection::vec(-3.0..3.0f64, 3),
        lambda in prop::sample::select(vec![0.5, 2.0]),
    ) {
        let s = wavy_cloud(d, amp, freq, phase, &jitter);
        let q = rotation(d, &entries);
        let shift = &shift[..d];
        let moved = s
            .map_points(lambda, |p| {
                let v = &q * DVector::from_column_slice(p) * lambda;
                v.iter().zip(shift).map(|(a, b)| a + b).collect()
            })
            .unwrap();
        let search = GrassmannSearchConfig::default();
        let before = extrinsic_fit(&s, &vec![0.0; d], 1.0, 1, &search).unwrap();
        let after = extrinsic_fit(&moved, shift, lambda, 1, &search).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12);
        prop_assert!(close(before.alpha.bracket.hi, after.alpha.bracket.hi));
        prop_assert!(close(before.beta.bracket.hi, after.beta.bracket.hi));
        prop_assert!(close(before.alpha.bracket.lo, after.alpha.bracket.lo));
        prop_assert!(close(before.beta.bracket.lo, after.beta.bracket.lo));
    }
}

proptest! {
    #[test]
    fn pitagora_residual_is_nonnegative(
        (g1, g2) in (2usize..=4).prop_flat_map(|d| (1..d).prop_flat_map(move |n| (plane_strategy(d, n), plane_strategy(d, n)))),
        z in prop::collection::vec(-1.0..1.0f64, 3),
        step in prop::collection::vec(-1.0..1.0f64, 4),
    ) {
        let x = g1.embed(&z[..g1.n()]);
        let y: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        prop_assume!(x != y);
        prop_assert!(pitagora_residual(&g1, &g2, &x, &y).unwrap() >= -1e-12);
    }

    #[test]
    fn plane_distance_is_a_symmetric_sine(
        (g1, g2) in (2usize..=4).prop_flat_map(|d| (1..d).prop_flat_map(move |n| (plane_strategy(d, n), plane_strategy(d, n)))),
    ) {
        let a = plane_distance(&g1, &g2).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a, plane_distance(&g2, &g1).unwrap());
        prop_assert!(plane_distance(&g1, &g1).unwrap() <= 1e-12);
    }

    #[test]
    fn simplex_volume_is_homogeneous_and_symmetric(
        verts in (1usize..=4).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 5), n + 1)),
        lambda in 0.1..10.0f64,
    ) {
        let n = verts.len() - 1;
        let v = cayley_menger_volume(&Simplex::new(verts.clone()).unwrap()).unwrap();
        let scaled: Vec<Vec<f64>> = verts.iter().map(|p| p.iter().map(|c| c * lambda).collect()).collect();
        let vs = cayley_menger_volume(&Simplex::new(scaled).unwrap()).unwrap();
        let mut reversed = verts.clone();
        reversed.reverse();
        let vr = cayley_menger_volume(&Simplex::new(reversed).unwrap()).unwrap();
        let tol = 1e-9 * v.max(1e-6);
        prop_assert!((vs - v * lambda.powi(n as i32)).abs() <= tol * lambda.powi(n as i32));
        prop_assert!((vr - v).abs() <= tol);
    }

    #[test]
    fn gromov_hausdorff_bounds_are_symmetric(x in metric_strategy(), y in metric_strategy()) {
        let xy = gh_bruteforce(&x, &y, 6).unwrap();
        let yx = gh_bruteforce(&y, &x, 6).unwrap();
        prop_assert!(xy.lower <= xy.upper + 1e-12);
        prop_assert!((xy.lower - yx.lower).abs() <= 1e-12);
        prop_assert!(gh_bruteforce(&x, &x, 6).unwrap().upper <= 1e-12);
        let diam = |m: &FiniteMetricSpace| (0..m.size()).flat_map(|i| m.row(i).to_vec()).fold(0.0, f64::max);
        prop_assert!(xy.upper <= diam(&x).max(diam(&y)) / 2.0 + 1e-12);
    }

    #[test]
    fn clouds_round_trip_through_both_formats(
        pts in (1usize..=4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-1e6..1e6f64, d), 1..30)),
    ) {
        let cloud = PointCloud::new(pts).unwrap();
        let csv = read_csv(to_csv(&cloud).as_bytes()).unwrap();
        let json = read_json(to_json(&cloud).unwrap().as_bytes()).unwrap();
        prop_assert_eq!(csv.coords(), cloud.coords());
        prop_assert_eq!(json.coords(), cloud.coords());
    }
}

#[test]
fn realizing_plane_ratio_is_stable_under_doubling() {
    for seed in 0..3 {
        let ratios: Vec<f64> = [4000, 8000]
            .iter()
            .map(|&m| {
                let set = lipschitz_graph(0.002, 8, m, 1, 2, seed).unwrap();
                realizing_plane(set.cloud(), &[0.0, 0.0], 1.0, 1).unwrap().alpha_ratio
            })
            .collect();
        assert!((ratios[1] / ratios[0] - 1.0).abs() <= 0.2, "seed {seed}: {ratios:?}");
    }
}

#[test]
fn graph_alpha_changes_by_the_spacing_under_doubling() {
    let search = GrassmannSearchConfig::default();
    for m in [4000, 8000] {
        let coarse = lipschitz_graph(0.01, 8, m, 1, 2, 5).unwrap();
        let fine = lipschitz_graph(0.01, 8, 2 * m, 1, 2, 5).unwrap();
        for r in [1.0, 0.25] {
            let a = extrinsic_fit(coarse.cloud(), &[0.0, 0.0], r, 1, &search).unwrap().alpha.bracket.hi;
            let b = extrinsic_fit(fine.cloud(), &[0.0, 0.0], r, 1, &search).unwrap().alpha.bracket.hi;
            assert!((a - b).abs() <= 2.0 * coarse.cloud().spacing() / r, "m={m} r={r}: {a} vs {b}");
        }
    }
}
