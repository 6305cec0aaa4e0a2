//! Minimization of plane objectives over the Grassmannian of n-planes
//! through the origin.
//!
//! Objectives are evaluated on an orthonormal basis of R^d whose leading `n`
//! columns span the candidate plane. Every objective used here is
//! 1-Lipschitz with respect to the plane distance, which is what makes the
//! branch-and-bound lower bounds rigorous: a region of angular radius `ρ`
//! around a center plane `V` cannot contain a plane whose value is below
//! `f(V) - sin ρ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Lipschitz constant of the objectives with a little headroom for roundoff.
const LIPSCHITZ: f64 = 1.0 + 1e-9;
const ARC_START: usize = 64;
const PATCH_START: usize = 8;
const RESTART_ANGLE: f64 = 0.5;
const POLISH_START_STEP: f64 = 0.05;

/// Orthonormal basis of R^d stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    d: usize,
    cols: Vec<f64>,
}

impl Basis {
    pub fn identity(d: usize) -> Self {
        let mut cols = vec![0.0; d * d];
        for i in 0..d {
            cols[i * d + i] = 1.0;
        }
        Basis { d, cols }
    }

    pub fn from_columns(d: usize, cols: Vec<f64>) -> Self {
        debug_assert_eq!(cols.len(), d * d);
        Basis { d, cols }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.d..(j + 1) * self.d]
    }

    /// Rotation by `theta` in the plane of columns `a` and `b`.
    pub fn rotated(&self, a: usize, b: usize, theta: f64) -> Basis {
        let (s, c) = theta.sin_cos();
        let mut out = self.clone();
        for i in 0..self.d {
            let qa = self.cols[a * self.d + i];
            let qb = self.cols[b * self.d + i];
            out.cols[a * self.d + i] = c * qa + s * qb;
            out.cols[b * self.d + i] = -s * qa + c * qb;
        }
        out
    }

    fn planar(theta: f64) -> Basis {
        let (s, c) = theta.sin_cos();
        Basis { d: 2, cols: vec![c, s, -s, c] }
    }

    /// Basis of R^3 with `u` first (line direction).
    fn leading(u: [f64; 3]) -> Basis {
        let (a, b) = complete(u);
        Basis { d: 3, cols: [u, a, b].concat() }
    }

    /// Basis of R^3 with `nu` last (plane normal).
    fn trailing(nu: [f64; 3]) -> Basis {
        let (a, b) = complete(nu);
        Basis { d: 3, cols: [a, b, nu].concat() }
    }
}

fn complete(u: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let k = (0..3)
        .min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs()).then(i.cmp(&j)))
        .unwrap_or(0);
    let mut a = [0.0; 3];
    a[k] = 1.0;
    let dot = u[k];
    for i in 0..3 {
        a[i] -= dot * u[i];
    }
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    for v in &mut a {
        *v /= na;
    }
    let b = [
        u[1] * a[2] - u[2] * a[1],
        u[2] * a[0] - u[0] * a[2],
        u[0] * a[1] - u[1] * a[0],
    ];
    (a, b)
}

/// A plane objective. `radius` is the angular radius of the region the
/// basis represents; objectives that discretize may evaluate more coarsely
/// for large regions as long as `lo <= f <= hi` holds at the given basis.
pub(crate) trait Objective: Sync {
    fn eval(&self, basis: &Basis, radius: f64) -> (f64, f64);
}

#[derive(Debug, Clone)]
pub(crate) struct SearchSettings {
    pub n: usize,
    pub d: usize,
    pub restarts: usize,
    pub grid_resolution: f64,
    pub max_iterations: usize,
    pub certify: bool,
    pub convergence_slack: f64,
    pub seed: u64,
    pub polish_min_step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SearchOutcome {
    pub lo: f64,
    pub hi: f64,
    pub certified: bool,
    pub basis: Basis,
    pub evaluations: usize,
}

/// True when the branch-and-bound parametrization exists for `(n, d)`.
pub(crate) fn certifiable(n: usize, d: usize) -> bool {
    matches!((n, d), (1, 2) | (1, 3) | (2, 3))
}

pub(crate) fn minimize(obj: &dyn Objective, s: &SearchSettings, seeds: &[Basis]) -> SearchOutcome {
    assert!(!seeds.is_empty(), "at least one seed basis is required");
    let mut state = Incumbent::new(obj, seeds);
    if s.certify && certifiable(s.n, s.d) {
        let lo = branch_and_bound(obj, s, &mut state);
        SearchOutcome {
            lo: lo.min(state.value),
            hi: state.value,
            certified: true,
            basis: state.basis,
            evaluations: state.evaluations,
        }
    } else {
        let mut rng_seeds = Vec::new();
        for restart in 1..s.restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(restart as u64));
            let base = &seeds[(restart - 1) % seeds.len()];
            let mut b = base.clone();
            for a in 0..s.n {
                for c in s.n..s.d {
                    b = b.rotated(a, c, rng.random_range(-RESTART_ANGLE..RESTART_ANGLE));
                }
            }
            rng_seeds.push(b);
        }
        for seed in seeds.iter().chain(&rng_seeds) {
            let (b, v) = polish(obj, s, seed.clone(), &mut state.evaluations);
            state.offer(b, v);
        }
        SearchOutcome {
            lo: state.value * (1.0 - s.convergence_slack),
            hi: state.value,
            certified: false,
            basis: state.basis,
            evaluations: state.evaluations,
        }
    }
}

struct Incumbent {
    basis: Basis,
    value: f64,
    evaluations: usize,
}

impl Incumbent {
    fn new(obj: &dyn Objective, seeds: &[Basis]) -> Self {
        let mut best = Incumbent {
            basis: seeds[0].clone(),
            value: f64::INFINITY,
            evaluations: 0,
        };
        for b in seeds {
            let (_, hi) = obj.eval(b, 0.0);
            best.evaluations += 1;
            best.offer(b.clone(), hi);
        }
        best
    }

    fn offer(&mut self, basis: Basis, value: f64) -> bool {
        if value < self.value {
            self.value = value;
            self.basis = basis;
            true
        } else {
            false
        }
    }
}

/// Coordinate descent over Givens rotations between plane and normal
/// directions, halving the angle whenever no move improves.
fn polish(obj: &dyn Objective, s: &SearchSettings, start: Basis, evaluations: &mut usize) -> (Basis, f64) {
    let mut current = start;
    let mut value = obj.eval(&current, 0.0).1;
    *evaluations += 1;
    let mut step = POLISH_START_STEP;
    let budget = s.max_iterations.max(1);
    let mut used = 0usize;
    while step >= s.polish_min_step && used < budget {
        let mut improved = false;
        for a in 0..s.n {
            for b in s.n..s.d {
                for sign in [1.0, -1.0] {
                    let cand = current.rotated(a, b, sign * step);
                    let v = obj.eval(&cand, 0.0).1;
                    used += 1;
                    if v < value {
                        value = v;
                        current = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    *evaluations += used;
    (current, value)
}

#[derive(Debug, Clone, Copy)]
enum Region {
    Arc { center: f64, half: f64 },
    Patch { face: usize, u: (f64, f64), v: (f64, f64) },
}

impl Region {
    fn initial(d: usize) -> Vec<Region> {
        if d == 2 {
            let w = std::f64::consts::PI / ARC_START as f64;
            (0..ARC_START)
                .map(|k| Region::Arc { center: (k as f64 + 0.5) * w, half: 0.5 * w })
                .collect()
        } else {
            let w = 2.0 / PATCH_START as f64;
            let mut out = Vec::new();
            for face in 0..3 {
                for i in 0..PATCH_START {
                    for j in 0..PATCH_START {
                        let u0 = -1.0 + i as f64 * w;
                        let v0 = -1.0 + j as f64 * w;
                        out.push(Region::Patch { face, u: (u0, u0 + w), v: (v0, v0 + w) });
                    }
                }
            }
            out
        }
    }

    fn vector(face: usize, u: f64, v: f64) -> [f64; 3] {
        let mut p = [0.0; 3];
        p[face] = 1.0;
        p[(face + 1) % 3] = u;
        p[(face + 2) % 3] = v;
        let norm = (1.0 + u * u + v * v).sqrt();
        [p[0] / norm, p[1] / norm, p[2] / norm]
    }

    fn radius(&self) -> f64 {
        match *self {
            Region::Arc { half, .. } => half,
            Region::Patch { face, u, v } => {
                let c = Region::vector(face, 0.5 * (u.0 + u.1), 0.5 * (v.0 + v.1));
                [(u.0, v.0), (u.0, v.1), (u.1, v.0), (u.1, v.1)]
                    .iter()
                    .map(|&(a, b)| angle(c, Region::vector(face, a, b)))
                    .fold(0.0, f64::max)
            }
        }
    }

    fn basis(&self, n: usize) -> Basis {
        match *self {
            Region::Arc { center, .. } => Basis::planar(center),
            Region::Patch { face, u, v } => {
                let c = Region::vector(face, 0.5 * (u.0 + u.1), 0.5 * (v.0 + v.1));
                if n == 1 {
                    Basis::leading(c)
                } else {
                    Basis::trailing(c)
                }
            }
        }
    }

    fn split(&self) -> Vec<Region> {
        match *self {
            Region::Arc { center, half } => vec![
                Region::Arc { center: center - 0.5 * half, half: 0.5 * half },
                Region::Arc { center: center + 0.5 * half, half: 0.5 * half },
            ],
            Region::Patch { face, u, v } => {
                let um = 0.5 * (u.0 + u.1);
                let vm = 0.5 * (v.0 + v.1);
                vec![
                    Region::Patch { face, u: (u.0, um), v: (v.0, vm) },
                    Region::Patch { face, u: (u.0, um), v: (vm, v.1) },
                    Region::Patch { face, u: (um, u.1), v: (v.0, vm) },
                    Region::Patch { face, u: (um, u.1), v: (vm, v.1) },
                ]
            }
        }
    }
}

fn angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    cn.atan2(dot.abs())
}

/// Level-synchronous branch and bound; returns a rigorous lower bound on
/// the minimum and updates the incumbent with every evaluated center.
fn branch_and_bound(obj: &dyn Objective, s: &SearchSettings, best: &mut Incumbent) -> f64 {
    let mut alive: Vec<(Region, f64)> = Region::initial(s.d).into_iter().map(|r| (r, 0.0)).collect();
    let mut settled = f64::INFINITY;
    while !alive.is_empty() {
        let evals: Vec<(f64, f64, f64)> = alive
            .par_iter()
            .map(|(region, _)| {
                let rad = region.radius();
                let (lo, hi) = obj.eval(&region.basis(s.n), rad);
                (lo, hi, rad)
            })
            .collect();
        best.evaluations += alive.len();

        let mut improved = false;
        for ((region, _), &(_, hi, _)) in alive.iter().zip(&evals) {
            improved |= best.offer(region.basis(s.n), hi);
        }
        if improved {
            let (b, v) = polish(obj, s, best.basis.clone(), &mut best.evaluations);
            best.offer(b, v);
        }

        let budget_left = best.evaluations < s.max_iterations;
        let mut next = Vec::new();
        for ((region, parent), &(lo, _, rad)) in alive.iter().zip(&evals) {
            let lb = if rad >= std::f64::consts::FRAC_PI_2 {
                *parent
            } else {
                parent.max(lo - LIPSCHITZ * rad.sin())
            };
            if lb >= best.value || rad <= s.grid_resolution || !budget_left {
                settled = settled.min(lb);
            } else {
                next.extend(region.split().into_iter().map(|c| (c, lb)));
            }
        }
        if best.evaluations + next.len() > s.max_iterations {
            for (_, lb) in &next {
                settled = settled.min(*lb);
            }
            break;
        }
        alive = next;
    }
    settled.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sup distance of fixed points to the candidate plane.
    struct SupDist {
        pts: Vec<Vec<f64>>,
        n: usize,
    }

    impl Objective for SupDist {
        fn eval(&self, basis: &Basis, _radius: f64) -> (f64, f64) {
            let d = basis.d();
            let v = self
                .pts
                .iter()
                .map(|p| {
                    (self.n..d)
                        .map(|j| {
                            let c: f64 = basis.col(j).iter().zip(p).map(|(a, b)| a * b).sum();
                            c * c
                        })
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max);
            (v, v)
        }
    }

    fn settings(n: usize, d: usize) -> SearchSettings {
        SearchSettings {
            n,
            d,
            restarts: 4,
            grid_resolution: 1e-4,
            max_iterations: 50_000,
            certify: true,
            convergence_slack: 0.05,
            seed: 0,
            polish_min_step: 1e-10,
        }
    }

    #[test]
    fn basis_completion_is_orthonormal() {
        let b = Basis::leading([0.6, 0.0, 0.8]);
        for i in 0..3 {
            for j in 0..3 {
                let g: f64 = b.col(i).iter().zip(b.col(j)).map(|(x, y)| x * y).sum();
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn planar_search_brackets_grid_oracle() {
        // Two points symmetric about the x-axis: the best line is the x-axis.
        let eps = 0.1;
        let pts = vec![vec![(1.0f64 - eps * eps).sqrt(), eps], vec![-(1.0f64 - eps * eps).sqrt(), eps]];
        let obj = SupDist { pts: pts.clone(), n: 1 };
        let out = minimize(&obj, &settings(1, 2), &[Basis::identity(2)]);
        let oracle = (0..=31416)
            .map(|k| obj.eval(&Basis::planar(k as f64 * 1e-4), 0.0).1)
            .fold(f64::INFINITY, f64::min);
        assert!(out.certified);
        assert!(out.lo <= oracle + 1e-12 && oracle <= out.hi + 1e-4);
        assert!((out.hi - eps).abs() < 1e-9);
        assert!(out.hi - out.lo <= 2e-4);
    }

    #[test]
    fn spatial_searches_find_planes() {
        let pts = vec![
            vec![1.0, 0.0, 0.01],
            vec![0.0, 1.0, -0.01],
            vec![-1.0, 0.0, 0.01],
            vec![0.0, -1.0, -0.01],
        ];
        let obj = SupDist { pts, n: 2 };
        let out = minimize(&obj, &settings(2, 3), &[Basis::identity(3)]);
        assert!(out.certified);
        assert!(out.lo <= 0.01 + 1e-12 && out.hi <= 0.01 + 1e-9, "{out:?}");

        let pts = vec![vec![1.0, 0.02, 0.0], vec![-1.0, 0.02, 0.0], vec![0.0, 0.0, 0.0]];
        let obj = SupDist { pts, n: 1 };
        let out = minimize(&obj, &settings(1, 3), &[Basis::identity(3)]);
        assert!(out.lo <= 0.02 && out.hi >= 0.0199 && out.hi <= 0.0201, "{out:?}");
    }

    #[test]
    fn uncertified_search_is_flagged() {
        let pts = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]];
        let obj = SupDist { pts, n: 2 };
        let mut s = settings(2, 4);
        s.certify = false;
        let out = minimize(&obj, &s, &[Basis::identity(4)]);
        assert!(!out.certified);
        assert!(out.hi < 1e-12);
    }

    #[test]
    fn refinement_is_monotone() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|k| {
                let t = k as f64 / 39.0 * 2.0 - 1.0;
                vec![t, 0.1 * (3.0 * t).sin(), 0.05 * t * t]
            })
            .collect();
        let obj = SupDist { pts, n: 1 };
        let mut previous: Option<SearchOutcome> = None;
        for res in [1e-2, 1e-3, 1e-4] {
            let mut s = settings(1, 3);
            s.grid_resolution = res;
            let out = minimize(&obj, &s, &[Basis::identity(3)]);
            if let Some(p) = &previous {
                assert!(out.hi <= p.hi && out.lo >= p.lo, "{p:?} -> {out:?}");
            }
            previous = Some(out);
        }
    }
}
