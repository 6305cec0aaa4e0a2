//! Distortion, codensity and Gromov-Hausdorff bounds on finite spaces.

use serde::{Deserialize, Serialize};

use super::metric::MetricSpace;
use crate::error::{invalid, FlatnessError, Result};
use crate::geometry::spatial::KdTree;

/// Default size cap for [`gh_bruteforce`].
pub const DEFAULT_GH_SIZE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GhMethod {
    ExactEnumeration,
    Subsample,
    DistributionBound,
    MapBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceBound {
    pub lower: f64,
    pub upper: f64,
    pub method: GhMethod,
}

/// Turns a list of `(x, f(x))` pairs into a dense map, requiring every
/// point of `X` to appear with a single image in `Y`.
fn dense_map(f: &[(usize, usize)], x_len: usize, y_len: usize) -> Result<Vec<usize>> {
    let mut map = vec![usize::MAX; x_len];
    for &(a, b) in f {
        if a >= x_len || b >= y_len {
            return Err(invalid("f", format!("pair ({a}, {b}) is out of range")));
        }
        if map[a] != usize::MAX && map[a] != b {
            return Err(invalid("f", format!("point {a} has two images")));
        }
        map[a] = b;
    }
    match map.iter().position(|&v| v == usize::MAX) {
        Some(missing) => Err(FlatnessError::PartialMap(missing)),
        None => Ok(map),
    }
}

/// `sup |d_Y(f(x), f(x')) - d_X(x, x')|` over pairs of points of `X`.
pub fn distortion<X, Y>(f: &[(usize, usize)], x: &X, y: &Y) -> Result<f64>
where
    X: MetricSpace + ?Sized,
    Y: MetricSpace + ?Sized,
{
    let map = dense_map(f, x.len(), y.len())?;
    Ok(map_distortion(&map, x, y))
}

pub(crate) fn map_distortion<X, Y>(map: &[usize], x: &X, y: &Y) -> f64
where
    X: MetricSpace + ?Sized,
    Y: MetricSpace + ?Sized,
{
    let mut worst: f64 = 0.0;
    for i in 0..map.len() {
        for j in i + 1..map.len() {
            worst = worst.max((y.dist(map[i], map[j]) - x.dist(i, j)).abs());
        }
    }
    worst
}

/// `sup_{y in Y} d(y, image)`.
pub fn codensity<Y: MetricSpace + ?Sized>(image: &[usize], y: &Y) -> f64 {
    (0..y.len())
        .map(|q| image.iter().map(|&p| y.dist(q, p)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// `2 max(dis f, codensity of f(X) in Y)`, an upper bound for `d_GH(X, Y)`.
pub fn gh_upper_via_map<X, Y>(f: &[(usize, usize)], x: &X, y: &Y) -> Result<f64>
where
    X: MetricSpace + ?Sized,
    Y: MetricSpace + ?Sized,
{
    let map = dense_map(f, x.len(), y.len())?;
    Ok(2.0 * map_distortion(&map, x, y).max(codensity(&map, y)))
}

/// Exact `d_GH(X, Y)` by branch and bound over correspondences.
///
/// Every correspondence contains one of the form `graph(f) ∪ {(g(y), y)}`
/// with `f: X -> Y` arbitrary and `g` defined on the points missed by `f`,
/// and distortion only decreases when pairs are removed, so it suffices to
/// enumerate those.
pub fn gh_bruteforce<X, Y>(x: &X, y: &Y, max_size: usize) -> Result<CorrespondenceBound>
where
    X: MetricSpace + ?Sized,
    Y: MetricSpace + ?Sized,
{
    for len in [x.len(), y.len()] {
        if len == 0 {
            return Err(FlatnessError::EmptyInput("metric space"));
        }
        if len > max_size {
            return Err(FlatnessError::SizeCapExceeded { size: len, cap: max_size });
        }
    }
    let mut search = Correspondences {
        x,
        y,
        pairs: Vec::new(),
        covered: vec![0; y.len()],
        best: x.diameter().max(y.diameter()),
    };
    search.assign_forward(0, 0.0);
    let value = 0.5 * search.best;
    Ok(CorrespondenceBound {
        lower: value,
        upper: value,
        method: GhMethod::ExactEnumeration,
    })
}

struct Correspondences<'a, X: ?Sized, Y: ?Sized> {
    x: &'a X,
    y: &'a Y,
    pairs: Vec<(usize, usize)>,
    covered: Vec<usize>,
    best: f64,
}

impl<X: MetricSpace + ?Sized, Y: MetricSpace + ?Sized> Correspondences<'_, X, Y> {
    fn added(&self, a: usize, b: usize, mut dis: f64) -> f64 {
        for &(p, q) in &self.pairs {
            dis = dis.max((self.x.dist(a, p) - self.y.dist(b, q)).abs());
            if dis >= self.best {
                break;
            }
        }
        dis
    }

    fn assign_forward(&mut self, a: usize, dis: f64) {
        if a == self.x.len() {
            self.assign_backward(0, dis);
            return;
        }
        for b in 0..self.y.len() {
            let nd = self.added(a, b, dis);
            if nd < self.best {
                self.pairs.push((a, b));
                self.covered[b] += 1;
                self.assign_forward(a + 1, nd);
                self.covered[b] -= 1;
                self.pairs.pop();
            }
        }
    }

    fn assign_backward(&mut self, b: usize, dis: f64) {
        if b == self.y.len() {
            self.best = dis;
            return;
        }
        if self.covered[b] > 0 {
            self.assign_backward(b + 1, dis);
            return;
        }
        for a in 0..self.x.len() {
            let nd = self.added(a, b, dis);
            if nd < self.best {
                self.pairs.push((a, b));
                self.assign_backward(b + 1, nd);
                self.pairs.pop();
            }
        }
    }
}

/// Least distortion of a map from a small space (distance matrix `da`) into
/// a point set in R^m, found by depth-first search with pruning.
///
/// The image of the first point is restricted to `first`, which lets callers
/// quotient out symmetries of the target. `start` is a known achievable
/// value (or an upper bound on the answer). Returns `None` when more than
/// `budget` partial maps would have to be visited.
pub(crate) fn min_map_distortion(
    da: &[f64],
    target: &[f64],
    m: usize,
    tree: &KdTree,
    first: &[usize],
    start: f64,
    budget: usize,
) -> Option<f64> {
    let k = (da.len() as f64).sqrt().round() as usize;
    if k <= 1 {
        return Some(0.0);
    }
    let mut state = MapSearch {
        da,
        k,
        target,
        m,
        tree,
        image: Vec::with_capacity(k),
        best: start,
        nodes: 0,
        budget,
    };
    for &p in first {
        state.image.push(p);
        state.descend(0.0);
        state.image.pop();
        if state.nodes > budget {
            return None;
        }
    }
    Some(state.best)
}

struct MapSearch<'a> {
    da: &'a [f64],
    k: usize,
    target: &'a [f64],
    m: usize,
    tree: &'a KdTree,
    image: Vec<usize>,
    best: f64,
    nodes: usize,
    budget: usize,
}

impl MapSearch<'_> {
    fn point(&self, i: usize) -> &[f64] {
        &self.target[i * self.m..(i + 1) * self.m]
    }

    fn descend(&mut self, dis: f64) {
        let i = self.image.len();
        if i == self.k {
            self.best = dis;
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return;
        }
        // Ring around the placed point whose prescribed distance is smallest.
        let anchor = (0..i)
            .min_by(|&a, &b| self.da[i * self.k + a].total_cmp(&self.da[i * self.k + b]))
            .unwrap_or(0);
        let want = self.da[i * self.k + anchor];
        let center = self.point(self.image[anchor]).to_vec();
        let candidates = self.tree.within(self.target, &center, want + self.best);
        for c in candidates {
            let mut nd = dis;
            for j in 0..i {
                let got = crate::geometry::spatial::sq_dist(self.point(c), self.point(self.image[j])).sqrt();
                nd = nd.max((got - self.da[i * self.k + j]).abs());
                if nd >= self.best {
                    break;
                }
            }
            if nd < self.best {
                self.image.push(c);
                self.descend(nd);
                self.image.pop();
                if self.nodes > self.budget {
                    return;
                }
            }
        }
    }
}
