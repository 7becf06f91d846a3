use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::SampledMap;

/// Domain distance ratios outside this range are not sampled.
pub const QS_RATIO_RANGE: (f64, f64) = (1e-3, 1e3);
/// Relative tolerance under which two values of `lambda(theta)` tie.
const TIE_TOLERANCE: f64 = 1e-9;
/// Worst random triples refined per gauge exponent.
const REFINE_SEEDS: usize = 8;
const REFINE_STEPS: usize = 200;
/// Neighbours tried per vertex and step.
const REFINE_CANDIDATES: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QsParams {
    pub theta: f64,
    pub lambda: f64,
}

impl QsParams {
    pub fn new(theta: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("theta", theta), ("lambda", lambda)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be >= 1, got {v}") });
            }
        }
        Ok(QsParams { theta, lambda })
    }

    pub fn eta(&self, t: f64) -> f64 {
        eta(self.lambda, self.theta, t)
    }
}

/// The power gauge `lambda * t^(1/theta)` below 1 and `lambda * t^theta` above.
pub fn eta(lambda: f64, theta: f64, t: f64) -> f64 {
    if t < 1.0 {
        lambda * t.powf(1.0 / theta)
    } else {
        lambda * t.powf(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    /// `d_Z(x, z) / d_Z(y, z)`
    pub t: f64,
    /// `d_W(f(x), f(z)) / d_W(f(y), f(z))`
    pub ratio: f64,
}

fn make_triple(map: &SampledMap, x: usize, y: usize, z: usize) -> Result<Option<Triple>> {
    if x == y || y == z || x == z {
        return Ok(None);
    }
    let space = map.domain();
    let (dxz, dyz) = (space.dist(x, z), space.dist(y, z));
    if dyz <= 0.0 {
        return Ok(None);
    }
    let t = dxz / dyz;
    if !(QS_RATIO_RANGE.0..=QS_RATIO_RANGE.1).contains(&t) {
        return Ok(None);
    }
    let den = map.image_dist(y, z);
    if den <= 0.0 {
        return Err(Error::NonInjective(y, z));
    }
    Ok(Some(Triple { x, y, z, t, ratio: map.image_dist(x, z) / den }))
}

fn sample_triples(map: &SampledMap, n: usize, seed: u64) -> Result<Vec<Triple>> {
    let len = map.domain().len();
    if len < 3 {
        return Err(Error::InvalidParameter { name: "space", reason: "need at least three points".into() });
    }
    let mut rng = crate::stats::rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < 100 * n.max(1) {
        attempts += 1;
        let (x, y, z) = (rng.gen_range(0..len), rng.gen_range(0..len), rng.gen_range(0..len));
        out.extend(make_triple(map, x, y, z)?);
    }
    if out.is_empty() {
        return Err(Error::InsufficientPairs(0.0));
    }
    Ok(out)
}

fn score(tr: &Triple, theta: f64) -> f64 {
    tr.ratio / eta(1.0, theta, tr.t)
}

/// Candidate replacements for one vertex: a thinned neighbourhood whose
/// radius follows the scale of the triple.
fn moves(map: &SampledMap, p: usize, radius: f64, out: &mut Vec<usize>) {
    out.clear();
    map.domain().for_each_in_ball(p, radius, |j, _| {
        if j != p {
            out.push(j);
        }
    });
    out.sort_unstable();
    if out.len() > REFINE_CANDIDATES {
        let stride = out.len().div_ceil(REFINE_CANDIDATES);
        let kept: Vec<usize> = out.iter().copied().step_by(stride).collect();
        *out = kept;
    }
}

/// Greedy ascent of `score` by moving one vertex at a time.
fn climb(map: &SampledMap, mut best: Triple, theta: f64) -> Result<Triple> {
    let floor = 2.0 * map.domain().min_positive_distance();
    let mut cand = Vec::new();
    for _ in 0..REFINE_STEPS {
        let space = map.domain();
        let radius = (0.5 * space.dist(best.x, best.z).min(space.dist(best.y, best.z))).max(floor);
        let mut improved = false;
        for which in 0..3 {
            let p = [best.x, best.y, best.z][which];
            moves(map, p, radius, &mut cand);
            for &q in &cand {
                let (x, y, z) = match which {
                    0 => (q, best.y, best.z),
                    1 => (best.x, q, best.z),
                    _ => (best.x, best.y, q),
                };
                if let Some(tr) = make_triple(map, x, y, z)? {
                    if score(&tr, theta) > score(&best, theta) {
                        best = tr;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(best)
}

/// Random triples plus, for every `theta`, local maxima of `ratio / eta`
/// reached from the worst random ones. Suprema of the ratio sit on thin
/// configurations that uniform draws rarely hit.
fn triple_pool(map: &SampledMap, thetas: &[f64], n: usize, seed: u64) -> Result<Vec<Triple>> {
    let mut pool = sample_triples(map, n, seed)?;
    let base = pool.len();
    for &theta in thetas {
        let mut order: Vec<usize> = (0..base).collect();
        order.sort_by(|&a, &b| score(&pool[b], theta).total_cmp(&score(&pool[a], theta)).then(a.cmp(&b)));
        for &k in order.iter().take(REFINE_SEEDS) {
            let tr = climb(map, pool[k], theta)?;
            pool.push(tr);
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QsAudit {
    pub params: QsParams,
    /// `max(0, max ratio / eta(t) - 1)` over the sample.
    pub max_excess: f64,
    pub violations: usize,
    pub triples_used: usize,
    pub worst: Option<Triple>,
    pub seed: u64,
}

/// Compares image distance ratios against the gauge on random triples and
/// on the locally worst triples reached from them.
pub fn qs_ratio_audit(map: &SampledMap, params: &QsParams, n_triples: usize, seed: u64) -> Result<QsAudit> {
    let triples = triple_pool(map, &[params.theta], n_triples, seed)?;
    let mut max_excess = 0.0f64;
    let mut worst = None;
    let mut violations = 0;
    for tr in &triples {
        let excess = tr.ratio / params.eta(tr.t) - 1.0;
        if excess > SLACK {
            violations += 1;
        }
        if excess > max_excess {
            max_excess = excess;
            worst = Some(*tr);
        }
    }
    Ok(QsAudit { params: *params, max_excess, violations, triples_used: triples.len(), worst, seed })
}

/// Floating noise allowed before a triple counts as a violation.
const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QsFit {
    pub params: QsParams,
    /// `(theta, lambda(theta))` for every grid value.
    pub lambda_curve: Vec<(f64, f64)>,
    pub triples_used: usize,
    pub seed: u64,
}

/// For each `theta`, the least `lambda >= 1` covering the sample; returns the
/// minimiser, preferring the smallest `theta` among ties.
pub fn fit_power_qs(map: &SampledMap, theta_grid: &[f64], n_triples: usize, seed: u64) -> Result<QsFit> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidParameter { name: "theta_grid", reason: "empty grid".into() });
    }
    if let Some(&bad) = theta_grid.iter().find(|&&t| !(t >= 1.0 && t.is_finite())) {
        return Err(Error::InvalidParameter { name: "theta_grid", reason: format!("theta must be >= 1, got {bad}") });
    }
    let mut grid = theta_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let triples = triple_pool(map, &grid, n_triples, seed)?;
    let curve: Vec<(f64, f64)> = grid
        .iter()
        .map(|&theta| {
            let lambda = triples.iter().map(|tr| tr.ratio / eta(1.0, theta, tr.t)).fold(1.0f64, f64::max);
            (theta, lambda)
        })
        .collect();
    let best = curve.iter().map(|&(_, l)| l).fold(f64::INFINITY, f64::min);
    let &(theta, lambda) = curve.iter().find(|&&(_, l)| l <= best * (1.0 + TIE_TOLERANCE)).expect("grid is nonempty");
    Ok(QsFit { params: QsParams::new(theta, lambda)?, lambda_curve: curve, triples_used: triples.len(), seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{make_identity, make_radial_stretch, make_scaling, make_sqrt_radial};
    use crate::space::{build_cantor, build_grid, snowflake};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn grid_theta() -> Vec<f64> {
        (0..=40).map(|k| 1.0 + 0.05 * k as f64).collect()
    }

    #[test]
    fn eta_branches() {
        assert_eq!(eta(2.0, 2.0, 0.25), 1.0);
        assert_eq!(eta(2.0, 2.0, 3.0), 18.0);
        assert_eq!(eta(1.0, 3.0, 1.0), 1.0);
        assert!(QsParams::new(0.5, 1.0).is_err());
        assert!(QsParams::new(1.0, 0.9).is_err());
    }

    #[test]
    fn scaling_has_zero_excess() {
        let g = Arc::new(build_grid(2, 1.0, 21, &[]).unwrap());
        let m = make_scaling(g, 2.0).unwrap();
        let a = qs_ratio_audit(&m, &QsParams::new(1.0, 1.0).unwrap(), 5000, 4).unwrap();
        assert!(a.max_excess < 1e-12 && a.violations == 0);
    }

    #[test]
    fn snowflake_identity_has_zero_excess_and_fits_two() {
        let c = build_cantor(1.0 / 3.0, 7, 1).unwrap();
        let sf = Arc::new(snowflake(&c, 0.5).unwrap());
        let m = make_identity(Arc::new(c), sf).unwrap();
        let a = qs_ratio_audit(&m, &QsParams::new(2.0, 1.0).unwrap(), 5000, 8).unwrap();
        assert_eq!(a.violations, 0);
        let fit = fit_power_qs(&m, &grid_theta(), 5000, 8).unwrap();
        assert!((fit.params.theta - 2.0).abs() < 1e-9, "{:?}", fit.params);
        assert!((fit.params.lambda - 1.0).abs() < 1e-9);
    }

    #[test]
    fn isometry_fits_one_one() {
        let g = Arc::new(build_grid(2, 1.0, 15, &[]).unwrap());
        let fit = fit_power_qs(&make_identity(g.clone(), g).unwrap(), &grid_theta(), 4000, 1).unwrap();
        assert_eq!(fit.params, QsParams { theta: 1.0, lambda: 1.0 });
    }

    #[test]
    fn radial_stretch_fit_audits_clean_on_larger_windows() {
        let fit = fit_power_qs(
            &make_radial_stretch(Arc::new(build_grid(2, 4.0, 61, &[]).unwrap())).unwrap(),
            &grid_theta(),
            20_000,
            3,
        )
        .unwrap();
        for hw in [8.0, 16.0] {
            let m = make_radial_stretch(Arc::new(build_grid(2, hw, 61, &[]).unwrap())).unwrap();
            let a = qs_ratio_audit(&m, &fit.params, 20_000, 3).unwrap();
            assert!(a.max_excess < 1e-9, "hw {hw}: {a:?}");
        }
    }

    #[test]
    fn sqrt_radial_fit_is_stable_across_windows() {
        // same spacing in every window
        let fits: Vec<QsParams> = [(2.0, 41), (4.0, 81), (8.0, 161)]
            .iter()
            .map(|&(hw, res)| {
                let m = make_sqrt_radial(Arc::new(build_grid(2, hw, res, &[]).unwrap())).unwrap();
                fit_power_qs(&m, &grid_theta(), 20_000, 9).unwrap().params
            })
            .collect();
        let (lo, hi) = fits.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.lambda), b.max(p.lambda)));
        assert!(hi / lo < 1.2, "{fits:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn lambda_nonincreasing_in_theta(seed in 0u64..1000) {
            let m = make_sqrt_radial(Arc::new(build_grid(2, 2.0, 21, &[]).unwrap())).unwrap();
            let fit = fit_power_qs(&m, &grid_theta(), 500, seed).unwrap();
            for w in fit.lambda_curve.windows(2) {
                prop_assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12));
            }
        }

        #[test]
        fn excess_invariant_under_codomain_similarity(factor in 0.1f64..10.0, seed in 0u64..1000) {
            let g = Arc::new(build_grid(2, 1.5, 21, &[]).unwrap());
            let base = make_radial_stretch(g.clone()).unwrap();
            // radial stretch then scaling equals the radial stretch of a rescaled sample
            let p = QsParams::new(1.3, 1.1).unwrap();
            let a = qs_ratio_audit(&base, &p, 400, seed).unwrap();
            let scaled = base.scale_codomain(factor).unwrap();
            let b = qs_ratio_audit(&scaled, &p, 400, seed).unwrap();
            prop_assert!((a.max_excess - b.max_excess).abs() <= 1e-9 * (1.0 + a.max_excess));
        }
    }
}
