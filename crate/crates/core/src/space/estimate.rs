//! Estimators for the geometric parameters of a sampled space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{log_uniform, ols, rng};

use super::SampledSpace;

/// Ahlfors regularity fit `C^-1 r^Q <= nu(B(x, r)) <= C r^Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub q_hat: f64,
    /// Smallest `C >= 1` making the two-sided bound hold on every sample at `q_hat`.
    pub c_hat: f64,
    pub radii_used: Vec<f64>,
    /// Largest absolute residual of the pooled log-log least-squares fit.
    pub residual: f64,
    pub samples: usize,
    pub radius_band: (f64, f64),
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectnessFailure {
    pub x: usize,
    pub r: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectnessReport {
    /// Smallest tested kappa for which every probe found a point in the annulus.
    pub kappa_hat: Option<f64>,
    pub tested_grid: Vec<f64>,
    pub failures: Vec<PerfectnessFailure>,
    pub probes_used: usize,
    pub radius_range: (f64, f64),
    pub seed: u64,
    pub verdict: bool,
}

/// Pooled least-squares estimate of the Ahlfors exponent from ball masses at
/// log-uniform radii in the valid band. Centers closer to the window boundary
/// than the probe radius are skipped.
pub fn estimate_regularity(
    space: &SampledSpace,
    n_centers: usize,
    n_radii: usize,
    seed: u64,
) -> Result<RegularityReport> {
    if space.len() < 16 {
        return Err(Error::InvalidParameter {
            name: "space",
            reason: format!("regularity estimation needs at least 16 points, got {}", space.len()),
        });
    }
    if n_centers == 0 || n_radii == 0 {
        return Err(Error::InvalidParameter {
            name: "n_centers",
            reason: "need at least one center and radius".into(),
        });
    }
    let (lo, hi) = space.valid_radius_band();
    if !(lo.is_finite() && lo < hi) {
        return Err(Error::DegenerateGeometry(format!("empty radius band [{lo}, {hi}]")));
    }
    let candidates = space.interior_points(lo * 2.0);
    if candidates.is_empty() {
        return Err(Error::WindowTooSmall(lo * 2.0));
    }
    let mut rng = rng(seed);
    let mut samples = Vec::with_capacity(n_centers * n_radii);
    let mut radii_used = Vec::with_capacity(n_centers * n_radii);
    for _ in 0..n_centers {
        let x = candidates[rng.gen_range(0..candidates.len())];
        let top = hi.min(space.boundary_distance(x));
        for _ in 0..n_radii {
            let r = log_uniform(&mut rng, lo, top);
            let mass = space.ball_measure_unchecked(x, r);
            samples.push((r.ln(), mass.ln()));
            radii_used.push(r);
        }
    }
    let fit = ols(&samples).ok_or_else(|| Error::DegenerateGeometry("all sampled radii coincide".into()))?;
    if !(fit.slope > 0.0) {
        return Err(Error::DegenerateGeometry(format!("non-positive exponent {}", fit.slope)));
    }
    let residual = samples.iter().map(|&(x, y)| (y - fit.eval(x)).abs()).fold(0.0, f64::max);
    let spread = samples.iter().map(|&(x, y)| (y - fit.slope * x).abs()).fold(0.0, f64::max);
    Ok(RegularityReport {
        q_hat: fit.slope,
        c_hat: spread.exp().max(1.0),
        radii_used,
        residual,
        samples: samples.len(),
        radius_band: (lo, hi),
        seed,
    })
}

/// Uniform perfectness probe over the valid radius band.
pub fn check_uniform_perfectness(
    space: &SampledSpace,
    kappa_grid: &[f64],
    n_probes: usize,
    seed: u64,
) -> Result<PerfectnessReport> {
    let band = space.valid_radius_band();
    check_uniform_perfectness_in(space, kappa_grid, n_probes, band, seed)
}

/// Tests `B(x, r) \ B(x, r/kappa) != {}` at random probes `(x, r)` with `r`
/// log-uniform in `radius_range`, keeping only probes where `B(x, r)` does not
/// exhaust the sample and `x` lies at least `r` inside the window.
pub fn check_uniform_perfectness_in(
    space: &SampledSpace,
    kappa_grid: &[f64],
    n_probes: usize,
    radius_range: (f64, f64),
    seed: u64,
) -> Result<PerfectnessReport> {
    if kappa_grid.is_empty() || kappa_grid.iter().any(|&k| !(k > 1.0)) {
        return Err(Error::InvalidParameter { name: "kappa_grid", reason: "every kappa must exceed 1".into() });
    }
    if kappa_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter { name: "kappa_grid", reason: "grid must be sorted ascending".into() });
    }
    let (lo, hi) = radius_range;
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::InvalidParameter { name: "radius_range", reason: format!("invalid range [{lo}, {hi}]") });
    }
    let mut rng = rng(seed);
    let mut failures = Vec::new();
    let mut failing = vec![false; kappa_grid.len()];
    let mut probes = 0;
    let max_attempts = 50 * n_probes.max(1);
    for _ in 0..max_attempts {
        if probes == n_probes {
            break;
        }
        let x = rng.gen_range(0..space.len());
        let r = log_uniform(&mut rng, lo, hi);
        if space.boundary_distance(x) < r {
            continue;
        }
        // largest distance below r, and whether anything lies outside the ball
        let mut inner = 0.0f64;
        let mut count = 0usize;
        space.for_each_in_ball(x, r, |_, d| {
            inner = inner.max(d);
            count += 1;
        });
        if count == space.len() {
            continue;
        }
        probes += 1;
        for (k, &kappa) in kappa_grid.iter().enumerate() {
            if inner < r / kappa {
                failing[k] = true;
                failures.push(PerfectnessFailure { x, r, kappa });
            }
        }
    }
    let kappa_hat =
        if probes == 0 { None } else { kappa_grid.iter().zip(&failing).find(|(_, f)| !**f).map(|(k, _)| *k) };
    Ok(PerfectnessReport {
        kappa_hat,
        tested_grid: kappa_grid.to_vec(),
        failures,
        probes_used: probes,
        radius_range,
        seed,
        verdict: kappa_hat.is_some(),
    })
}

/// Point `z` with `r/mu <= d(x, z) < r`, `mu = max(8, kappa)`. Returns the
/// farthest such point, smallest index on ties.
pub fn annulus_witness(space: &SampledSpace, x: usize, r: f64, kappa: f64) -> Result<usize> {
    if x >= space.len() {
        return Err(Error::MissingPoint(x));
    }
    if !(r > 0.0 && r < 2.0 * space.diam_sample()) {
        return Err(Error::InvalidRadius { radius: r, reason: "need 0 < r < 2 diam".into() });
    }
    if !(kappa > 1.0) {
        return Err(Error::InvalidParameter { name: "kappa", reason: format!("kappa must exceed 1, got {kappa}") });
    }
    let mu = kappa.max(8.0);
    let lower = r / mu;
    let mut best: Option<(f64, usize)> = None;
    space.for_each_in_ball(x, r, |j, d| {
        if d >= lower {
            let better = match best {
                None => true,
                Some((bd, bj)) => d > bd || (d == bd && j < bj),
            };
            if better {
                best = Some((d, j));
            }
        }
    });
    best.map(|(_, j)| j).ok_or(Error::WitnessNotFound { center: x, lower, upper: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_cantor, build_grid, snowflake, Metric};

    #[test]
    fn grid_is_two_regular() {
        let g = build_grid(2, 1.0, 41, &[]).unwrap();
        let rep = estimate_regularity(&g, 64, 8, 1).unwrap();
        assert!((1.8..=2.2).contains(&rep.q_hat), "q_hat = {}", rep.q_hat);
        assert!(rep.c_hat >= 1.0);
    }

    #[test]
    fn cantor_thirds_dimension() {
        let c = build_cantor(1.0 / 3.0, 8, 1).unwrap();
        let rep = estimate_regularity(&c, 128, 8, 2).unwrap();
        let q = 2f64.ln() / 3f64.ln();
        assert!((rep.q_hat - q).abs() < 0.05, "q_hat = {}", rep.q_hat);
    }

    #[test]
    fn cantor_quarter_dimension() {
        let c = build_cantor(0.25, 6, 1).unwrap();
        let rep = estimate_regularity(&c, 128, 8, 3).unwrap();
        assert!((rep.q_hat - 0.5).abs() < 0.05, "q_hat = {}", rep.q_hat);
    }

    #[test]
    fn snowflaked_line_doubles_exponent() {
        let g = build_grid(1, 1.0, 401, &[]).unwrap();
        let s = snowflake(&g, 0.5).unwrap();
        let rep = estimate_regularity(&s, 64, 8, 4).unwrap();
        assert!((rep.q_hat - 2.0).abs() < 0.2, "q_hat = {}", rep.q_hat);
    }

    #[test]
    fn small_or_flat_spaces_are_rejected() {
        let g = build_grid(1, 1.0, 8, &[]).unwrap();
        assert!(estimate_regularity(&g, 4, 4, 0).is_err());
        // equilateral: every pairwise distance is 1, so the band is empty
        let n = 20;
        let mut m = vec![1.0; n * n];
        for i in 0..n {
            m[i * n + i] = 0.0;
        }
        let s =
            SampledSpace::new((0..n).map(|i| i.to_string()).collect(), 0, vec![], vec![1.0; n], Metric::Dense(m), None)
                .unwrap();
        assert!(matches!(estimate_regularity(&s, 4, 4, 0), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn connected_grid_is_perfect_near_grid_limit() {
        let g = build_grid(1, 1.0, 201, &[]).unwrap();
        let rep = check_uniform_perfectness(&g, &[1.1, 1.25, 1.5, 2.0, 4.0], 200, 5).unwrap();
        assert!(rep.verdict);
        assert!(rep.kappa_hat.unwrap() <= 1.5);
    }

    #[test]
    fn cantor_is_perfect_at_four() {
        let c = build_cantor(1.0 / 3.0, 8, 1).unwrap();
        let rep = check_uniform_perfectness(&c, &[1.5, 2.5, 4.0], 300, 6).unwrap();
        assert!(rep.probes_used > 100);
        assert!(rep.kappa_hat.is_some_and(|k| k <= 4.0), "{:?}", rep.kappa_hat);
        // the 1/3 gaps defeat small kappa
        assert!(rep.failures.iter().any(|f| f.kappa == 1.5));
    }

    #[test]
    fn integer_lattice_fails_below_unit_scale() {
        let z = build_grid(1, 20.0, 41, &[]).unwrap();
        assert_eq!(z.min_positive_distance(), 1.0);
        let rep = check_uniform_perfectness_in(&z, &[1.5, 2.0, 4.0], 50, (0.2, 0.9), 7).unwrap();
        assert!(rep.probes_used > 0);
        assert!(!rep.failures.is_empty());
        assert!(!rep.verdict);
    }

    #[test]
    fn witness_examples() {
        let g = build_grid(1, 1.0, 41, &[]).unwrap();
        let x = g.nearest_point(&[0.0]).unwrap();
        let z = annulus_witness(&g, x, 1.0, 2.0).unwrap();
        let d = g.dist(x, z);
        assert!((1.0 / 8.0..1.0).contains(&d));

        let two =
            SampledSpace::new(vec!["0".into(), "1".into()], 1, vec![0.0, 1.0], vec![0.5, 0.5], Metric::Euclidean, None)
                .unwrap();
        assert_eq!(annulus_witness(&two, 0, 1.5, 2.0).unwrap(), 1);
        assert!(matches!(annulus_witness(&two, 0, 0.5, 2.0), Err(Error::WitnessNotFound { .. })));
    }

    #[test]
    fn cantor_witness_in_sibling_cell() {
        let c = build_cantor(1.0 / 3.0, 8, 1).unwrap();
        for x in [0, 37, 128, 255] {
            let z = annulus_witness(&c, x, 1.0 / 3.0, 4.0).unwrap();
            let d = c.dist(x, z);
            assert!((1.0 / 24.0..1.0 / 3.0).contains(&d));
        }
    }
}
