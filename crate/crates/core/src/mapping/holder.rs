use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::stats::ols;

use super::pairs::close_pairs;
use super::SampledMap;

/// Violations kept verbatim in a report; the count covers all of them.
const MAX_REPORTED: usize = 1000;
/// Relative slack on the bound comparisons, for exact power laws.
const SLACK: f64 = 1e-12;
/// Log-distance bins used by the envelope fit.
const ENVELOPE_BINS: usize = 24;
/// Pairs closer than this multiple of the smallest distance are left out of
/// the slopes: pairs spanning a single sample gap cannot be placed finely
/// enough relative to their length to realise the extremes.
const FIT_FLOOR: f64 = 2.0;
/// Fewest occupied bins a slope is fitted through.
const MIN_FIT_BINS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub theta1: f64,
    pub theta2: f64,
    pub r: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl HolderParams {
    pub fn new(theta1: f64, theta2: f64, r: f64, c: f64) -> Result<Self> {
        ensure_positive("theta1", theta1)?;
        ensure_positive("theta2", theta2)?;
        ensure_positive("r", r)?;
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::InvalidParameter { name: "C", reason: format!("coefficient must be >= 1, got {c}") });
        }
        Ok(HolderParams { theta1, theta2, r, c })
    }

    pub fn lower(&self, d: f64) -> f64 {
        d.powf(self.theta1) / self.c
    }

    pub fn upper(&self, d: f64) -> f64 {
        self.c * d.powf(self.theta2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: String,
    pub y: String,
    #[serde(rename = "dZ")]
    pub d_z: f64,
    #[serde(rename = "dW")]
    pub d_w: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderCheck {
    pub params: HolderParams,
    pub verdict: bool,
    pub pairs_checked: usize,
    pub pairs_available: u64,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    pub seed: u64,
}

/// Tests the local biHölder inequality on pairs closer than `params.r`.
pub fn check_local_biholder(map: &SampledMap, params: &HolderParams, n_pairs: usize, seed: u64) -> Result<HolderCheck> {
    let domain = map.domain();
    check_radius(map, params.r)?;
    let cp = close_pairs(domain, params.r, n_pairs, seed);
    if cp.pairs.is_empty() {
        return Err(Error::InsufficientPairs(params.r));
    }
    let mut violations = Vec::new();
    let mut violation_count = 0;
    for &(i, j, d_z) in &cp.pairs {
        let d_w = map.image_dist(i, j);
        let (lo, hi) = (params.lower(d_z), params.upper(d_z));
        let bound = if d_w < lo * (1.0 - SLACK) {
            lo
        } else if d_w > hi * (1.0 + SLACK) {
            hi
        } else {
            continue;
        };
        violation_count += 1;
        if violations.len() < MAX_REPORTED {
            let ids = domain.ids();
            violations.push(Violation { x: ids[i].clone(), y: ids[j].clone(), d_z, d_w, bound });
        }
    }
    Ok(HolderCheck {
        params: *params,
        verdict: violation_count == 0,
        pairs_checked: cp.pairs.len(),
        pairs_available: cp.total,
        violation_count,
        violations,
        seed,
    })
}

fn check_radius(map: &SampledMap, r: f64) -> Result<()> {
    ensure_positive("r", r)?;
    let limit = 2.0 * map.domain().diam_sample();
    if r >= limit {
        return Err(Error::InvalidRadius { radius: r, reason: format!("must be below twice the diameter ({limit})") });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub pairs_used: usize,
    pub pairs_available: u64,
    pub exhaustive: bool,
    /// Occupied log-distance bins entering the slope fits.
    pub bins: usize,
    /// `[min, max]` of the distances used for the slopes.
    pub fit_range: (f64, f64),
    pub d_min: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderFit {
    pub params: HolderParams,
    pub diagnostics: FitDiagnostics,
}

/// Fits exponents to the upper and lower envelopes of the log-log scatter of
/// `(d_Z, d_W)` over close pairs, then the smallest `C` covering every pair.
///
/// Envelopes are the per-bin extremes of `log d_W` over log-spaced bins of
/// `d_Z`; the slopes are least-squares fits through those extremes over the
/// smallest resolved octave of distances, widened by octaves until it holds
/// at least three occupied bins. Local exponents are small-scale limits, and
/// over wide ranges smooth curvature of the envelopes would bias them.
pub fn fit_local_biholder(map: &SampledMap, r: f64, n_pairs: usize, seed: u64) -> Result<HolderFit> {
    check_radius(map, r)?;
    let cp = close_pairs(map.domain(), r, n_pairs, seed);
    if cp.pairs.len() < 2 {
        return Err(Error::InsufficientPairs(r));
    }
    let mut pts = Vec::with_capacity(cp.pairs.len());
    for &(i, j, d_z) in &cp.pairs {
        let d_w = map.image_dist(i, j);
        if d_w <= 0.0 {
            return Err(Error::NonInjective(i, j));
        }
        pts.push((d_z, d_w));
    }
    let first = pts[0].1;
    if pts.iter().all(|&(_, w)| w == first) {
        return Err(Error::DegenerateMap("every image distance is equal".into()));
    }
    let lz_min = pts.iter().map(|&(z, _)| z.ln()).fold(f64::INFINITY, f64::min);
    let lr = r.ln();
    // bins over [lo, hi), keeping the extreme pair of each
    let bin = |lo: f64, hi: f64| {
        let width = (hi - lo).max(f64::MIN_POSITIVE) / ENVELOPE_BINS as f64;
        let mut upper = vec![(f64::NAN, f64::NEG_INFINITY); ENVELOPE_BINS];
        let mut lower = vec![(f64::NAN, f64::INFINITY); ENVELOPE_BINS];
        for &(z, w) in &pts {
            let (lz, lw) = (z.ln(), w.ln());
            if lz < lo || lz > hi {
                continue;
            }
            let b = (((lz - lo) / width) as usize).min(ENVELOPE_BINS - 1);
            if lw > upper[b].1 {
                upper[b] = (lz, lw);
            }
            if lw < lower[b].1 {
                lower[b] = (lz, lw);
            }
        }
        let occupied: Vec<usize> = (0..ENVELOPE_BINS).filter(|&b| upper[b].1.is_finite()).collect();
        (upper, lower, occupied)
    };
    // the smallest resolved octave, widened until it holds enough distinct distances
    let mut found = None;
    for floor in [lz_min + FIT_FLOOR.ln(), lz_min] {
        let mut hi = (floor + 2f64.ln()).min(lr);
        loop {
            let (upper, lower, occupied) = bin(floor, hi);
            if occupied.len() >= MIN_FIT_BINS {
                found = Some((upper, lower, occupied));
                break;
            }
            if hi >= lr {
                break;
            }
            hi = (hi + 2f64.ln()).min(lr);
        }
        if found.is_some() {
            break;
        }
    }
    let (upper, lower, chosen) = found.ok_or(Error::InsufficientPairs(r))?;
    let up: Vec<(f64, f64)> = chosen.iter().map(|&b| upper[b]).collect();
    let lo: Vec<(f64, f64)> = chosen.iter().map(|&b| lower[b]).collect();
    let slope = |v: &[(f64, f64)], which: &str| -> Result<f64> {
        ols(v)
            .map(|f| f.slope)
            .filter(|s| *s > 0.0 && s.is_finite())
            .ok_or_else(|| Error::DegenerateMap(format!("{which} envelope has no positive slope")))
    };
    let theta2 = slope(&up, "upper")?;
    let theta1 = slope(&lo, "lower")?;
    let c = pts.iter().map(|&(z, w)| (w / z.powf(theta2)).max(z.powf(theta1) / w)).fold(1.0f64, f64::max);
    let range = chosen.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &k| {
        (a.min(lower[k].0.min(upper[k].0)), b.max(lower[k].0.max(upper[k].0)))
    });
    Ok(HolderFit {
        params: HolderParams::new(theta1, theta2, r, c)?,
        diagnostics: FitDiagnostics {
            pairs_used: pts.len(),
            pairs_available: cp.total,
            exhaustive: cp.exhaustive,
            bins: chosen.len(),
            fit_range: (range.0.exp(), range.1.exp()),
            d_min: lz_min.exp(),
            seed,
        },
    })
}

/// Parameters satisfied by the inverse map.
pub fn inverse_params(p: &HolderParams) -> HolderParams {
    HolderParams {
        theta1: 1.0 / p.theta2,
        theta2: 1.0 / p.theta1,
        r: p.r.powf(p.theta1) / p.c,
        c: p.c.powf(1.0 / p.theta1).max(p.c.powf(1.0 / p.theta2)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{invert, make_identity, make_radial_stretch, make_sqrt_radial};
    use crate::space::{build_cantor, build_grid, snowflake, SampledSpace};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn snowflake_identity(base: SampledSpace, eps: f64) -> SampledMap {
        let sf = Arc::new(snowflake(&base, eps).unwrap());
        make_identity(Arc::new(base), sf).unwrap()
    }

    #[test]
    fn snowflake_identity_passes_exact_params() {
        let m = snowflake_identity(build_grid(2, 1.0, 21, &[]).unwrap(), 0.5);
        let p = HolderParams::new(0.5, 0.5, 0.7, 1.0).unwrap();
        let rep = check_local_biholder(&m, &p, 5000, 1).unwrap();
        assert!(rep.verdict);
        assert_eq!(rep.violation_count, 0);
    }

    #[test]
    fn snowflake_identity_fit() {
        let m = snowflake_identity(build_cantor(1.0 / 3.0, 6, 1).unwrap(), 0.5);
        let fit = fit_local_biholder(&m, 0.5, 100_000, 3).unwrap();
        assert!((fit.params.theta1 - 0.5).abs() < 0.02, "{:?}", fit.params);
        assert!((fit.params.theta2 - 0.5).abs() < 0.02, "{:?}", fit.params);
        assert!((fit.params.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_fit_is_isometric() {
        let g = Arc::new(build_grid(2, 1.0, 25, &[]).unwrap());
        let m = make_identity(g.clone(), g).unwrap();
        let fit = fit_local_biholder(&m, 0.8, 50_000, 0).unwrap();
        assert!((fit.params.theta1 - 1.0).abs() < 1e-9);
        assert!((fit.params.theta2 - 1.0).abs() < 1e-9);
        assert!((fit.params.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sqrt_radial_fit_recovers_exponents() {
        let g = Arc::new(build_grid(2, 4.0, 81, &[]).unwrap());
        let m = make_sqrt_radial(g).unwrap();
        let fit = fit_local_biholder(&m, 2.0, 4_000_000, 11).unwrap();
        assert!((0.9..=1.1).contains(&fit.params.theta1), "{:?}", fit);
        assert!((0.45..=0.55).contains(&fit.params.theta2), "{:?}", fit);
        let rep = check_local_biholder(&m, &HolderParams::new(1.0, 0.5, 2.0, 2.0).unwrap(), usize::MAX, 5).unwrap();
        assert!(rep.verdict, "{:?}", &rep.violations[..rep.violations.len().min(3)]);
    }

    #[test]
    fn radial_stretch_breaks_constant_from_smaller_window() {
        let near = Arc::new(build_grid(2, 10.0, 101, &[]).unwrap());
        let tuned = fit_local_biholder(&make_radial_stretch(near).unwrap(), 1.0, 200_000, 2).unwrap();
        let far = Arc::new(build_grid(2, 100.0, 401, &[]).unwrap());
        let rep = check_local_biholder(&make_radial_stretch(far.clone()).unwrap(), &tuned.params, 200_000, 2).unwrap();
        assert!(!rep.verdict);
        let worst = rep
            .violations
            .iter()
            .map(|v| far.coords(far.index_of(&v.x).unwrap()).iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        assert!(worst > 50.0, "violations stay near the origin: {worst}");
    }

    #[test]
    fn integer_lattice_has_no_close_pairs() {
        let z = Arc::new(build_grid(1, 5.0, 11, &[]).unwrap());
        let m = make_identity(z.clone(), z).unwrap();
        let p = HolderParams::new(1.0, 1.0, 0.9, 1.0).unwrap();
        assert!(matches!(check_local_biholder(&m, &p, 100, 0), Err(Error::InsufficientPairs(_))));
    }

    #[test]
    fn violations_serialize_with_short_keys() {
        let v = Violation { x: "a".into(), y: "b".into(), d_z: 1.0, d_w: 2.0, bound: 1.5 };
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"x":"a","y":"b","dZ":1.0,"dW":2.0,"bound":1.5}"#);
    }

    #[test]
    fn inverse_params_examples() {
        let p = inverse_params(&HolderParams::new(2.0, 0.5, 1.0, 4.0).unwrap());
        assert_eq!((p.theta1, p.theta2), (2.0, 0.5));
        assert!((p.r - 0.25).abs() < 1e-12 && (p.c - 16.0).abs() < 1e-12);
        let id = HolderParams::new(1.0, 1.0, 0.7, 1.0).unwrap();
        assert_eq!(inverse_params(&id), id);
    }

    #[test]
    fn inverse_round_trip_on_snowflake() {
        let m = snowflake_identity(build_cantor(1.0 / 3.0, 6, 1).unwrap(), 0.5);
        let fwd = fit_local_biholder(&m, 0.5, 100_000, 1).unwrap().params;
        let predicted = inverse_params(&fwd);
        let back = fit_local_biholder(&invert(&m).unwrap(), predicted.r, 100_000, 1).unwrap().params;
        assert!((back.theta1 / predicted.theta1 - 1.0).abs() < 0.1);
        assert!((back.theta2 / predicted.theta2 - 1.0).abs() < 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn inverse_check_passes_when_forward_passes(eps in 0.3f64..1.0, r in 0.05f64..0.9, c in 1.0f64..3.0) {
            let m = snowflake_identity(build_grid(1, 1.0, 41, &[]).unwrap(), eps);
            let p = HolderParams::new(eps, eps, r, c).unwrap();
            let fwd = check_local_biholder(&m, &p, usize::MAX, 0).unwrap();
            prop_assert!(fwd.verdict);
            let q = inverse_params(&p);
            match check_local_biholder(&invert(&m).unwrap(), &q, usize::MAX, 0) {
                Ok(rep) => prop_assert!(rep.verdict),
                Err(Error::InsufficientPairs(_)) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn inverse_params_involution_on_exponents(t1 in 0.1f64..5.0, t2 in 0.1f64..5.0, r in 0.1f64..10.0, c in 1.0f64..10.0) {
            let q = inverse_params(&inverse_params(&HolderParams::new(t1, t2, r, c).unwrap()));
            prop_assert!((q.theta1 - t1).abs() < 1e-12 * t1.max(1.0));
            prop_assert!((q.theta2 - t2).abs() < 1e-12 * t2.max(1.0));
            prop_assert!(q.c >= 1.0);
        }
    }
}
