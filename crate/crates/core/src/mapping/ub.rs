use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

use super::{HolderParams, QsParams, SampledMap};

/// Largest `b / a` still read as bounded.
pub const DEFAULT_RATIO_CAP: f64 = 1e3;
/// Step-to-step factor by which `b` must grow across nested windows to count
/// as unbounded growth.
pub const DEFAULT_GROWTH_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterDiam {
    pub center: String,
    pub diam: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UbReport {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub centers_used: usize,
    pub ratio_cap: f64,
    pub verdict: bool,
    pub per_center: Vec<CenterDiam>,
}

/// Image diameters of radius-`r` balls around randomly chosen centers at
/// distance at least `r` from the window boundary.
pub fn check_uniform_boundedness(map: &SampledMap, r: f64, n_centers: usize, seed: u64) -> Result<UbReport> {
    ensure_positive("r", r)?;
    let admissible = map.domain().interior_points(r);
    if admissible.is_empty() || n_centers == 0 {
        return Err(Error::WindowTooSmall(r));
    }
    let mut rng = crate::stats::rng(seed);
    let mut centers: Vec<usize> = sample(&mut rng, admissible.len(), n_centers.min(admissible.len()))
        .into_iter()
        .map(|k| admissible[k])
        .collect();
    centers.sort_unstable();
    check_uniform_boundedness_at(map, r, &centers, DEFAULT_RATIO_CAP)
}

/// Same measurement at explicit centers, each of which must be admissible.
pub fn check_uniform_boundedness_at(map: &SampledMap, r: f64, centers: &[usize], ratio_cap: f64) -> Result<UbReport> {
    ensure_positive("r", r)?;
    ensure_positive("ratio_cap", ratio_cap)?;
    let domain = map.domain();
    if centers.is_empty() {
        return Err(Error::WindowTooSmall(r));
    }
    let mut per_center = Vec::with_capacity(centers.len());
    for &c in centers {
        if c >= domain.len() {
            return Err(Error::MissingPoint(c));
        }
        if domain.boundary_distance(c) < r {
            return Err(Error::WindowTooSmall(r));
        }
        let ball = domain.ball(c, r)?;
        per_center.push(CenterDiam { center: domain.ids()[c].clone(), diam: map.image_diam(&ball)? });
    }
    let a = per_center.iter().map(|c| c.diam).fold(f64::INFINITY, f64::min);
    let b = per_center.iter().map(|c| c.diam).fold(0.0f64, f64::max);
    let verdict = a > 0.0 && b.is_finite() && b / a <= ratio_cap;
    Ok(UbReport { r, a, b, centers_used: centers.len(), ratio_cap, verdict, per_center })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedUbReport {
    pub windows: Vec<UbReport>,
    pub growth_factor: f64,
    /// `b` grew by at least `growth_factor` at every step over three or more windows.
    pub b_growth: bool,
    pub verdict: bool,
}

/// Runs the check on maps over increasing windows; unbounded growth of `b`
/// fails the verdict even when each window passes on its own.
pub fn nested_uniform_boundedness(
    maps: &[SampledMap],
    r: f64,
    n_centers: usize,
    seed: u64,
    growth_factor: f64,
) -> Result<NestedUbReport> {
    if maps.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let windows = maps.iter().map(|m| check_uniform_boundedness(m, r, n_centers, seed)).collect::<Result<Vec<_>>>()?;
    Ok(summarize_nested(windows, growth_factor))
}

pub(crate) fn summarize_nested(windows: Vec<UbReport>, growth_factor: f64) -> NestedUbReport {
    let b_growth = windows.len() >= 3 && windows.windows(2).all(|w| w[1].b >= growth_factor * w[0].b);
    let verdict = !b_growth && windows.iter().all(|w| w.verdict);
    NestedUbReport { windows, growth_factor, b_growth, verdict }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_ab(a: f64, b: f64) -> Result<()> {
    positive("a", a)?;
    positive("b", b)?;
    if b < a {
        return Err(Error::Domain(format!("need a <= b, got a = {a}, b = {b}")));
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa must exceed 1, got {kappa}")));
    }
    Ok(())
}

/// Moves uniform-boundedness constants from radius `r` to radius `s` for a
/// power-quasisymmetric map on a `kappa`-uniformly perfect space.
pub fn transfer_ub(a: f64, b: f64, kappa: f64, eta: &QsParams, r: f64, s: f64) -> Result<(f64, f64)> {
    check_ab(a, b)?;
    check_kappa(kappa)?;
    positive("r", r)?;
    positive("s", s)?;
    let a1 = a.min(a / eta.eta(kappa * r / s));
    let b1 = b.max(eta.eta(kappa * s / r) * b);
    Ok((a1, b1))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QsHolderConstants {
    pub params: HolderParams,
    pub mu: f64,
    /// `a / (3 lambda^2 (r mu)^theta)`
    pub lower_coefficient: f64,
    /// `lambda b mu^(1/theta) / r^(1/theta)`
    pub upper_coefficient: f64,
    /// Lower bound on `diam f(B(x, r))` recovered from `params`.
    pub ub_lower: f64,
    /// Upper bound on `diam f(B(x, r))` recovered from `params`.
    pub ub_upper: f64,
}

/// biHölder parameters implied by power quasisymmetry with gauge `eta`,
/// `kappa`-uniform perfectness and `r`-uniform bounds `a <= diam <= b`.
/// The returned `C` is clamped to at least 1.
pub fn qs_to_holder_constants(eta: &QsParams, kappa: f64, r: f64, a: f64, b: f64) -> Result<QsHolderConstants> {
    check_ab(a, b)?;
    check_kappa(kappa)?;
    positive("r", r)?;
    let QsParams { theta, lambda } = *eta;
    let mu = kappa.max(8.0);
    let lower_coefficient = a / (3.0 * lambda * lambda * (r * mu).powf(theta));
    let upper_coefficient = lambda * b * mu.powf(1.0 / theta) / r.powf(1.0 / theta);
    let c = (1.0 / lower_coefficient).max(upper_coefficient).max(1.0);
    let params = HolderParams::new(theta, 1.0 / theta, r, c)?;
    Ok(QsHolderConstants {
        params,
        mu,
        lower_coefficient,
        upper_coefficient,
        ub_lower: r.powf(theta) / (mu.powf(theta) * c),
        ub_upper: 2.0 * c * r.powf(1.0 / theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{make_identity, make_radial_stretch, make_scaling, make_sqrt_radial};
    use crate::space::build_grid;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn sqrt_radial_bounds() {
        let m = make_sqrt_radial(Arc::new(build_grid(2, 4.0, 81, &[]).unwrap())).unwrap();
        let rep = check_uniform_boundedness(&m, 2.0, 200, 0).unwrap();
        assert!(rep.a >= 1.9 && rep.b <= 6.3, "{} {}", rep.a, rep.b);
        assert!(rep.verdict);
    }

    #[test]
    fn radial_stretch_grows_linearly() {
        for n in [1usize, 3, 5, 10] {
            let g = Arc::new(build_grid(2, 2.0, 61, &[n as f64, 0.0]).unwrap());
            let c = g.nearest_point(&[n as f64, 0.0]).unwrap();
            let m = make_radial_stretch(g).unwrap();
            let rep = check_uniform_boundedness_at(&m, 1.0, &[c], DEFAULT_RATIO_CAP).unwrap();
            assert!(rep.b >= 0.95 * (2 * n + 1) as f64, "n={n}: {}", rep.b);
        }
    }

    #[test]
    fn radial_stretch_fails_nested() {
        let maps: Vec<_> = [(4.0, 61), (8.0, 121), (16.0, 241)]
            .iter()
            .map(|&(hw, res)| make_radial_stretch(Arc::new(build_grid(2, hw, res, &[]).unwrap())).unwrap())
            .collect();
        let rep = nested_uniform_boundedness(&maps, 1.0, 100, 0, DEFAULT_GROWTH_FACTOR).unwrap();
        assert!(rep.b_growth && !rep.verdict);
    }

    #[test]
    fn identity_is_bounded() {
        let g = Arc::new(build_grid(2, 2.0, 21, &[]).unwrap());
        let m = make_identity(g.clone(), g.clone()).unwrap();
        let rep = check_uniform_boundedness(&m, 0.5, 50, 1).unwrap();
        assert!((rep.b - rep.a).abs() < 1e-12 * rep.a);
        assert!(rep.verdict);
        let c = g.nearest_point(&[0.0, 0.0]).unwrap();
        assert!((rep.a - g.diam_of(&g.ball(c, 0.5).unwrap()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn window_too_small() {
        let g = Arc::new(build_grid(2, 1.0, 11, &[]).unwrap());
        let m = make_identity(g.clone(), g).unwrap();
        assert!(matches!(check_uniform_boundedness(&m, 1.5, 10, 0), Err(Error::WindowTooSmall(_))));
    }

    #[test]
    fn transfer_examples() {
        let id = QsParams::new(1.0, 1.0).unwrap();
        let (a1, b1) = transfer_ub(2.0, 6.0, 2.0, &id, 2.0, 1.0).unwrap();
        assert!((a1 - 0.5).abs() < 1e-12 && (b1 - 6.0).abs() < 1e-12);
        let (a1, b1) = transfer_ub(2.0, 6.0, 1.0 + 1e-15, &id, 3.0, 3.0).unwrap();
        assert!((a1 - 2.0).abs() < 1e-12 && (b1 - 6.0).abs() < 1e-12);
        assert!(matches!(transfer_ub(0.0, 1.0, 2.0, &id, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(transfer_ub(1.0, 2.0, 1.0, &id, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn qs_to_holder_example() {
        let k = qs_to_holder_constants(&QsParams::new(1.0, 1.0).unwrap(), 2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(k.mu, 8.0);
        assert!((k.params.c - 24.0).abs() < 1e-12);
        assert_eq!((k.params.theta1, k.params.theta2, k.params.r), (1.0, 1.0, 1.0));
    }

    #[test]
    fn scaling_envelope_contains_linear_law() {
        let g = Arc::new(build_grid(2, 2.0, 31, &[]).unwrap());
        let m = make_scaling(g, 2.0).unwrap();
        let rep = check_uniform_boundedness(&m, 1.0, 50, 2).unwrap();
        let k = qs_to_holder_constants(&QsParams::new(1.0, 1.0).unwrap(), 2.0, 1.0, rep.a, rep.b).unwrap();
        for d in [0.01, 0.1, 0.5, 0.99] {
            assert!(k.params.lower(d) <= 2.0 * d && 2.0 * d <= k.params.upper(d));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn transfer_identity_limit(a in 0.01f64..10.0, extra in 0.0f64..10.0, r in 0.1f64..10.0) {
            let b = a + extra;
            let (a1, b1) = transfer_ub(a, b, 1.0 + 1e-15, &QsParams::new(1.0, 1.0).unwrap(), r, r).unwrap();
            prop_assert!((a1 - a).abs() <= 1e-12 * a && (b1 - b).abs() <= 1e-12 * b);
        }

        #[test]
        fn ub_scales_with_codomain(factor in 0.1f64..10.0, seed in 0u64..100) {
            let m = make_sqrt_radial(Arc::new(build_grid(2, 2.0, 21, &[]).unwrap())).unwrap();
            let base = check_uniform_boundedness(&m, 0.5, 10, seed).unwrap();
            let scaled = check_uniform_boundedness(&m.scale_codomain(factor).unwrap(), 0.5, 10, seed).unwrap();
            prop_assert!((scaled.a - factor * base.a).abs() <= 1e-12 * scaled.a);
            prop_assert!((scaled.b - factor * base.b).abs() <= 1e-12 * scaled.b);
        }
    }
}
