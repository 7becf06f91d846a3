//! Sampled metric measure spaces.
//!
//! A [`SampledSpace`] is a finite weighted point cloud standing in for a metric
//! measure space. Points are addressed by their index; the string ids are kept
//! for CSV round trips. Balls are open: `B(x, r) = { y : d(x, y) < r }`.

mod build;
mod estimate;
mod index;
pub mod io;

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::CompensatedSum;

pub use build::{build_cantor, build_grid, snowflake, POINT_BUDGET};
pub use estimate::{
    annulus_witness, check_uniform_perfectness, check_uniform_perfectness_in, estimate_regularity, PerfectnessFailure,
    PerfectnessReport, RegularityReport,
};
pub(crate) use index::euclid;
use index::KdTree;

/// Metric on a sampled space.
///
/// Nested snowflakes are flattened at construction, so `base` is never itself
/// a snowflake.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Euclidean,
    /// Row-major `n x n` distance matrix in point order.
    Dense(Vec<f64>),
    Snowflake {
        base: Box<Metric>,
        epsilon: f64,
    },
}

impl Metric {
    /// Exponent applied on top of the base metric (1 for non-snowflakes).
    pub fn exponent(&self) -> f64 {
        match self {
            Metric::Snowflake { epsilon, .. } => *epsilon,
            _ => 1.0,
        }
    }

    fn base(&self) -> &Metric {
        match self {
            Metric::Snowflake { base, .. } => base,
            m => m,
        }
    }

    #[inline]
    fn transform(&self, base_distance: f64) -> f64 {
        match self {
            Metric::Snowflake { epsilon, .. } => base_distance.powf(*epsilon),
            _ => base_distance,
        }
    }

    /// Base-metric radius that contains every metric ball of radius `r`.
    fn base_radius(&self, r: f64) -> f64 {
        match self {
            Metric::Snowflake { epsilon, .. } => r.powf(1.0 / epsilon) * (1.0 + 1e-9) + f64::MIN_POSITIVE,
            _ => r,
        }
    }

    /// Base-metric radius inside which every point lies in the metric ball
    /// of radius `r`.
    fn inner_base_radius(&self, r: f64) -> f64 {
        let base = match self {
            Metric::Snowflake { epsilon, .. } => r.powf(1.0 / epsilon),
            _ => r,
        };
        base * (1.0 - 1e-9)
    }

    pub fn describe(&self) -> String {
        match self {
            Metric::Euclidean => "euclidean".into(),
            Metric::Dense(_) => "dense".into(),
            Metric::Snowflake { base, epsilon } => format!("snowflake({}, {epsilon})", base.describe()),
        }
    }
}

/// Records that a sample is a finite window `[center - half_width, center + half_width]^dim`
/// into an unbounded space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Vec<f64>,
    pub half_width: f64,
}

#[derive(Debug)]
pub struct SampledSpace {
    ids: Vec<String>,
    dim: usize,
    coords: Vec<f64>,
    metric: Metric,
    weights: Vec<f64>,
    total_mass: f64,
    window: Option<Window>,
    diam: f64,
    diam_pair: (usize, usize),
    tree: OnceLock<Option<KdTree>>,
    min_positive: OnceLock<f64>,
}

impl SampledSpace {
    /// Validates and assembles a space. The diameter is computed by
    /// exhaustive pair enumeration.
    pub fn new(
        ids: Vec<String>,
        dim: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        metric: Metric,
        window: Option<Window>,
    ) -> Result<Self> {
        let mut space = Self::assemble(ids, dim, coords, weights, metric, window)?;
        let (_, pair) = space.exhaustive_diameter();
        space.set_diameter_pair(pair);
        Ok(space)
    }

    pub(crate) fn assemble(
        ids: Vec<String>,
        dim: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        metric: Metric,
        window: Option<Window>,
    ) -> Result<Self> {
        let n = weights.len();
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: format!("a space needs at least two points, got {n}"),
            });
        }
        if ids.len() != n || coords.len() != n * dim {
            return Err(Error::Mismatch(format!(
                "{} ids, {} weights and {} coordinates for dimension {dim}",
                ids.len(),
                n,
                coords.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "weight",
                reason: format!("weights must be positive and finite, got {w}"),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter { name: "coordinates", reason: "coordinates must be finite".into() });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidParameter { name: "id", reason: format!("duplicate point id `{id}`") });
            }
        }
        if let Metric::Dense(m) = metric.base() {
            if m.len() != n * n {
                return Err(Error::Mismatch(format!("dense metric has {} entries for {n} points", m.len())));
            }
        } else if dim == 0 {
            return Err(Error::InvalidParameter { name: "dim", reason: "coordinate metrics need dim >= 1".into() });
        }
        let mut acc = CompensatedSum::default();
        for &w in &weights {
            acc.add(w);
        }
        Ok(SampledSpace {
            ids,
            dim,
            coords,
            metric,
            total_mass: acc.value(),
            weights,
            window,
            diam: 0.0,
            diam_pair: (0, 0),
            tree: OnceLock::new(),
            min_positive: OnceLock::new(),
        })
    }

    fn exhaustive_diameter(&self) -> (f64, (usize, usize)) {
        let n = self.len();
        let mut best = (0.0f64, (0, 0));
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.dist(i, j);
                if d > best.0 {
                    best = (d, (i, j));
                }
            }
        }
        best
    }

    pub(crate) fn set_diameter_pair(&mut self, pair: (usize, usize)) {
        self.diam_pair = pair;
        self.diam = self.dist(pair.0, pair.1);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn all_coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn window(&self) -> Option<&Window> {
        self.window.as_ref()
    }

    /// Supremum of pairwise distances over the sample.
    pub fn diam_sample(&self) -> f64 {
        self.diam
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::MissingPoint(i))
        }
    }

    fn base_dist(&self, i: usize, j: usize) -> f64 {
        match self.metric.base() {
            Metric::Dense(m) => m[i * self.len() + j],
            _ => euclid(self.coords(i), self.coords(j)),
        }
    }

    /// Distance between points `i` and `j`. Panics on out-of-range indices.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.metric.transform(self.base_dist(i, j))
    }

    /// Distances from `i` to every point, in point order.
    pub fn distances_from(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.dist(i, j)).collect()
    }

    fn tree(&self) -> Option<&KdTree> {
        self.tree
            .get_or_init(|| match self.metric.base() {
                Metric::Dense(_) => None,
                _ => Some(KdTree::build(&self.coords, self.dim, &self.weights)),
            })
            .as_ref()
    }

    /// Calls `visit(j, d(i, j))` for every `j` in the open ball `B(i, r)`,
    /// including `i` itself. Order is deterministic but unspecified.
    pub fn for_each_in_ball<F: FnMut(usize, f64)>(&self, i: usize, r: f64, mut visit: F) {
        match self.tree() {
            Some(tree) => {
                let q = self.coords(i);
                tree.within(&self.coords, q, self.metric.base_radius(r), |j, base_d| {
                    let d = if j == i { 0.0 } else { self.metric.transform(base_d) };
                    if d < r {
                        visit(j, d);
                    }
                });
            }
            None => {
                for j in 0..self.len() {
                    let d = self.dist(i, j);
                    if d < r {
                        visit(j, d);
                    }
                }
            }
        }
    }

    /// Open ball `B(center, radius)`, sorted by point index.
    pub fn ball(&self, center: usize, radius: f64) -> Result<Vec<usize>> {
        self.check(center)?;
        let mut out = Vec::new();
        self.for_each_in_ball(center, radius, |j, _| out.push(j));
        out.sort_unstable();
        Ok(out)
    }

    /// Measure of the open ball `B(center, radius)`.
    pub fn ball_measure(&self, center: usize, radius: f64) -> Result<f64> {
        self.check(center)?;
        Ok(self.ball_measure_unchecked(center, radius))
    }

    pub(crate) fn ball_measure_unchecked(&self, center: usize, radius: f64) -> f64 {
        if radius > self.diam {
            return self.total_mass;
        }
        match self.tree() {
            Some(tree) => {
                let radii = (self.metric.inner_base_radius(radius), self.metric.base_radius(radius));
                tree.mass_within(&self.coords, &self.weights, self.coords(center), radii, |j, base_d| {
                    j == center || self.metric.transform(base_d) < radius
                })
            }
            None => {
                let mut acc = CompensatedSum::default();
                for j in 0..self.len() {
                    if self.dist(center, j) < radius {
                        acc.add(self.weights[j]);
                    }
                }
                acc.value()
            }
        }
    }

    /// Diameter of a subset of points; zero for singletons.
    pub fn diam_of(&self, subset: &[usize]) -> Result<f64> {
        if subset.is_empty() {
            return Err(Error::EmptySet);
        }
        for &i in subset {
            self.check(i)?;
        }
        let mut best = 0.0f64;
        for (k, &i) in subset.iter().enumerate() {
            for &j in &subset[k + 1..] {
                best = best.max(self.dist(i, j));
            }
        }
        Ok(best)
    }

    /// Smallest positive pairwise distance in the sample.
    pub fn min_positive_distance(&self) -> f64 {
        *self.min_positive.get_or_init(|| match self.tree() {
            Some(tree) => {
                let base =
                    (0..self.len()).map(|i| tree.nearest_positive(&self.coords, i)).fold(f64::INFINITY, f64::min);
                self.metric.transform(base)
            }
            None => {
                let mut best = f64::INFINITY;
                for i in 0..self.len() {
                    for j in (i + 1)..self.len() {
                        let d = self.dist(i, j);
                        if d > 0.0 {
                            best = best.min(d);
                        }
                    }
                }
                best
            }
        })
    }

    /// Radius band `[k * min positive distance, diam / k]` inside which the
    /// estimators trust the sample, with `k = 4` in the base metric, i.e.
    /// `4^epsilon` for a snowflake.
    pub fn valid_radius_band(&self) -> (f64, f64) {
        let k = 4f64.powf(self.metric.exponent());
        (k * self.min_positive_distance(), self.diam / k)
    }

    /// Metric distance from point `i` to the window boundary; infinite for
    /// spaces that are not windows.
    pub fn boundary_distance(&self, i: usize) -> f64 {
        match &self.window {
            None => f64::INFINITY,
            Some(w) => {
                let x = self.coords(i);
                let sup = x.iter().zip(&w.center).map(|(a, c)| (a - c).abs()).fold(0.0f64, f64::max);
                self.metric.transform((w.half_width - sup).max(0.0))
            }
        }
    }

    /// Points at metric distance at least `r` from the window boundary.
    pub fn interior_points(&self, r: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.boundary_distance(i) >= r).collect()
    }

    /// Index of the sample point closest (in ambient coordinates) to `x`.
    pub fn nearest_point(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: x.len() });
        }
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.len() {
            let d = euclid(self.coords(i), x);
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(best.1)
    }

    /// Index of the point with the given string id.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    /// True when both spaces carry the same ids and coordinates in the same order.
    pub fn same_points(&self, other: &SampledSpace) -> bool {
        self.ids == other.ids && self.dim == other.dim && self.coords == other.coords
    }
}
