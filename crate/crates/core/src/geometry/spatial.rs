//! Static kd-tree over a flat coordinate buffer.
//!
//! Indices returned by queries refer to positions in the buffer the tree was
//! built from. Range queries return indices in ascending order so callers can
//! rely on a deterministic iteration order.

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn build(coords: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && coords.len().is_multiple_of(dim));
        let count = coords.len() / dim;
        let mut tree = KdTree {
            dim,
            order: (0..count).collect(),
            nodes: Vec::new(),
        };
        if count > 0 {
            tree.build_node(coords, 0, count);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn build_node(&mut self, coords: &[f64], start: usize, end: usize) -> usize {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &self.order[start..end] {
            let p = &coords[i * dim..(i + 1) * dim];
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            lo: lo.clone(),
            hi: hi.clone(),
            children: None,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * dim + axis]
                .total_cmp(&coords[b * dim + axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(coords, start, mid);
        let right = self.build_node(coords, mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    fn box_sq_dist(&self, node: &Node, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let v = q[k];
            let d = if v < node.lo[k] {
                node.lo[k] - v
            } else if v > node.hi[k] {
                v - node.hi[k]
            } else {
                0.0
            };
            s += d * d;
        }
        s
    }

    /// Indices of all points with `|p - center| <= radius`, ascending.
    pub fn within(&self, coords: &[f64], center: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if self.box_sq_dist(node, center) > r2 {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        let p = &coords[i * self.dim..(i + 1) * self.dim];
                        if sq_dist(p, center) <= r2 {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Nearest point, ties broken by smallest index. Returns `(index, distance)`.
    pub fn nearest(&self, coords: &[f64], q: &[f64]) -> Option<(usize, f64)> {
        self.nearest_filtered(coords, q, usize::MAX)
    }

    /// Nearest point other than `exclude`.
    pub fn nearest_other(&self, coords: &[f64], q: &[f64], exclude: usize) -> Option<(usize, f64)> {
        self.nearest_filtered(coords, q, exclude)
    }

    fn nearest_filtered(&self, coords: &[f64], q: &[f64], exclude: usize) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(coords, q, exclude, 0, &mut best);
        if best.0 == usize::MAX {
            None
        } else {
            Some((best.0, best.1.sqrt()))
        }
    }

    fn nearest_rec(
        &self,
        coords: &[f64],
        q: &[f64],
        exclude: usize,
        id: usize,
        best: &mut (usize, f64),
    ) {
        let node = &self.nodes[id];
        if self.box_sq_dist(node, q) > best.1 {
            return;
        }
        match node.children {
            Some((l, r)) => {
                let dl = self.box_sq_dist(&self.nodes[l], q);
                let dr = self.box_sq_dist(&self.nodes[r], q);
                if dl <= dr {
                    self.nearest_rec(coords, q, exclude, l, best);
                    self.nearest_rec(coords, q, exclude, r, best);
                } else {
                    self.nearest_rec(coords, q, exclude, r, best);
                    self.nearest_rec(coords, q, exclude, l, best);
                }
            }
            None => {
                for &i in &self.order[node.start..node.end] {
                    if i == exclude {
                        continue;
                    }
                    let d = sq_dist(&coords[i * self.dim..(i + 1) * self.dim], q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coords(count: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn within_matches_linear_scan() {
        let dim = 3;
        let coords = random_coords(500, dim, 1);
        let tree = KdTree::build(&coords, dim);
        let center = [0.1, -0.2, 0.3];
        let got = tree.within(&coords, &center, 0.5);
        let want: Vec<usize> = (0..500)
            .filter(|&i| sq_dist(&coords[i * dim..(i + 1) * dim], &center) <= 0.25)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let dim = 2;
        let coords = random_coords(300, dim, 2);
        let tree = KdTree::build(&coords, dim);
        let queries = random_coords(50, dim, 3);
        for q in queries.chunks(dim) {
            let (i, d) = tree.nearest(&coords, q).unwrap();
            let best = (0..300)
                .map(|j| sq_dist(&coords[j * dim..(j + 1) * dim], q))
                .fold(f64::INFINITY, f64::min);
            assert!((d * d - best).abs() < 1e-15);
            assert!((sq_dist(&coords[i * dim..(i + 1) * dim], q) - best).abs() < 1e-15);
        }
    }

    #[test]
    fn nearest_other_skips_self() {
        let coords = vec![0.0, 1.0, 3.0];
        let tree = KdTree::build(&coords, 1);
        assert_eq!(tree.nearest_other(&coords, &[1.0], 1), Some((0, 1.0)));
    }

    #[test]
    fn duplicate_points_do_not_recurse_forever() {
        let coords = vec![0.5; 200];
        let tree = KdTree::build(&coords, 2);
        assert_eq!(tree.within(&coords, &[0.5, 0.5], 0.0).len(), 100);
    }
}
