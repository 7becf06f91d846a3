//! Static kd-tree over the ambient coordinates, used for ball queries when the
//! metric is euclidean or a snowflake of the euclidean metric.

use crate::stats::CompensatedSum;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    dim: usize,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    /// Per node, `dim` lower then `dim` upper bounding-box coordinates.
    bounds: Vec<f64>,
    /// Per node, total weight of its points.
    mass: Vec<f64>,
}

#[inline]
pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

impl KdTree {
    pub(crate) fn build(coords: &[f64], dim: usize, weights: &[f64]) -> Self {
        let n = coords.len().checked_div(dim).unwrap_or(0);
        let mut tree = KdTree { dim, perm: (0..n).collect(), nodes: Vec::new(), bounds: Vec::new(), mass: Vec::new() };
        if n > 0 {
            tree.build_node(coords, 0, n);
            tree.summarize(coords, weights);
        }
        tree
    }

    fn summarize(&mut self, coords: &[f64], weights: &[f64]) {
        let dim = self.dim;
        self.bounds = vec![0.0; self.nodes.len() * 2 * dim];
        self.mass = vec![0.0; self.nodes.len()];
        // children always follow their parent
        for id in (0..self.nodes.len()).rev() {
            let (mut lo, mut hi) = (vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]);
            let mut acc = CompensatedSum::default();
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &p in &self.perm[start..end] {
                        for a in 0..dim {
                            lo[a] = lo[a].min(coords[p * dim + a]);
                            hi[a] = hi[a].max(coords[p * dim + a]);
                        }
                        acc.add(weights[p]);
                    }
                }
                Node::Split { left, right, .. } => {
                    for child in [left, right] {
                        let b = &self.bounds[child * 2 * dim..(child + 1) * 2 * dim];
                        for a in 0..dim {
                            lo[a] = lo[a].min(b[a]);
                            hi[a] = hi[a].max(b[dim + a]);
                        }
                        acc.add(self.mass[child]);
                    }
                }
            }
            self.bounds[id * 2 * dim..id * 2 * dim + dim].copy_from_slice(&lo);
            self.bounds[id * 2 * dim + dim..(id + 1) * 2 * dim].copy_from_slice(&hi);
            self.mass[id] = acc.value();
        }
    }

    /// Largest euclidean distance from `q` to the bounding box of a node.
    fn farthest(&self, id: usize, q: &[f64]) -> f64 {
        let dim = self.dim;
        let b = &self.bounds[id * 2 * dim..(id + 1) * 2 * dim];
        let mut s = 0.0;
        for a in 0..dim {
            let d = (q[a] - b[a]).abs().max((b[dim + a] - q[a]).abs());
            s += d * d;
        }
        s.sqrt()
    }

    /// Total weight of the points at euclidean distance at most `radius`
    /// from `q` that `accept` keeps. Nodes lying entirely within `inner` are
    /// added whole, so `accept` must keep every distance below `inner`.
    pub(crate) fn mass_within<F: Fn(usize, f64) -> bool>(
        &self,
        coords: &[f64],
        weights: &[f64],
        q: &[f64],
        (inner, radius): (f64, f64),
        accept: F,
    ) -> f64 {
        let mut acc = CompensatedSum::default();
        if self.nodes.is_empty() {
            return 0.0;
        }
        let dim = self.dim;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if self.farthest(id, q) < inner {
                acc.add(self.mass[id]);
                continue;
            }
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &p in &self.perm[start..end] {
                        let d = euclid(&coords[p * dim..(p + 1) * dim], q);
                        if d <= radius && accept(p, d) {
                            acc.add(weights[p]);
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    if q[axis] + radius >= value {
                        stack.push(right);
                    }
                    if q[axis] - radius <= value {
                        stack.push(left);
                    }
                }
            }
        }
        acc.value()
    }

    fn build_node(&mut self, coords: &[f64], start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.dim;
        // split along the axis of largest spread
        let mut axis = 0;
        let mut best = f64::NEG_INFINITY;
        for a in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &p in &self.perm[start..end] {
                let v = coords[p * dim + a];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best {
                best = hi - lo;
                axis = a;
            }
        }
        if best <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&p, &q| {
            coords[p * dim + axis].total_cmp(&coords[q * dim + axis]).then(p.cmp(&q))
        });
        let value = coords[self.perm[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(coords, start, mid);
        let right = self.build_node(coords, mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Visits every point whose euclidean distance to `q` is at most
    /// `radius`, passing the index and that distance. Visiting order is a
    /// fixed function of the tree.
    pub(crate) fn within<F: FnMut(usize, f64)>(&self, coords: &[f64], q: &[f64], radius: f64, mut visit: F) {
        if self.nodes.is_empty() {
            return;
        }
        let dim = self.dim;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &p in &self.perm[start..end] {
                        let d = euclid(&coords[p * dim..(p + 1) * dim], q);
                        if d <= radius {
                            visit(p, d);
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    // right pushed first so the left subtree is visited first
                    if q[axis] + radius >= value {
                        stack.push(right);
                    }
                    if q[axis] - radius <= value {
                        stack.push(left);
                    }
                }
            }
        }
    }

    /// Smallest positive euclidean distance from point `i` to any other point.
    pub(crate) fn nearest_positive(&self, coords: &[f64], i: usize) -> f64 {
        let dim = self.dim;
        let q = &coords[i * dim..(i + 1) * dim];
        let mut best = f64::INFINITY;
        let mut stack = vec![(0usize, 0.0f64)];
        while let Some((id, bound)) = stack.pop() {
            if bound > best {
                continue;
            }
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &p in &self.perm[start..end] {
                        let d = euclid(&coords[p * dim..(p + 1) * dim], q);
                        if d > 0.0 && d < best {
                            best = d;
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let gap = q[axis] - value;
                    let (near, far) = if gap <= 0.0 { (left, right) } else { (right, left) };
                    stack.push((far, gap.abs()));
                    stack.push((near, 0.0));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn within_matches_brute_force() {
        let mut rng = crate::stats::rng(3);
        let dim = 2;
        let coords: Vec<f64> = (0..500 * dim).map(|_| rng.gen::<f64>()).collect();
        let tree = KdTree::build(&coords, dim, &vec![1.0; 500]);
        for k in 0..20 {
            let q = &coords[k * dim..(k + 1) * dim];
            let r = 0.05 + 0.01 * k as f64;
            let mut got = Vec::new();
            tree.within(&coords, q, r, |p, _| got.push(p));
            got.sort_unstable();
            let want: Vec<usize> = (0..500).filter(|&p| euclid(&coords[p * dim..(p + 1) * dim], q) <= r).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn mass_within_matches_brute_force() {
        let mut rng = crate::stats::rng(4);
        let dim = 3;
        let n = 2000;
        let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let tree = KdTree::build(&coords, dim, &weights);
        for k in 0..30 {
            let q = &coords[k * dim..(k + 1) * dim];
            let r = 0.05 * (k + 1) as f64;
            let got = tree.mass_within(&coords, &weights, q, (r * (1.0 - 1e-12), r), |_, d| d < r);
            let want: f64 =
                (0..n).filter(|&p| euclid(&coords[p * dim..(p + 1) * dim], q) < r).map(|p| weights[p]).sum();
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{got} {want}");
        }
    }

    #[test]
    fn nearest_positive_skips_duplicates() {
        let coords = vec![0.0, 0.0, 0.5, 2.0];
        let tree = KdTree::build(&coords, 1, &[1.0; 4]);
        assert_eq!(tree.nearest_positive(&coords, 0), 0.5);
        assert_eq!(tree.nearest_positive(&coords, 3), 1.5);
    }
}
