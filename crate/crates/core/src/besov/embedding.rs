use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{HolderParams, SampledMap};

use super::{
    besov_seminorm_family, check_p, compose, discrete_besov_family, lp_norm, BesovParams, DiscretizationParams,
    SampledFunction, SeminormMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissible {
    /// `Q_Z >= theta1 Q_W`
    pub feasible: bool,
    /// `theta2 s + (theta2 Q_W - Q_Z) / p`
    pub s_prime_max: f64,
    /// No positive smoothness is admissible.
    pub vacuous: bool,
}

/// Largest target smoothness reachable by composition with a locally
/// `(theta1, theta2)`-biHölder map between `Q_Z`- and `Q_W`-regular spaces.
pub fn admissible_smoothness(q_z: f64, q_w: f64, theta1: f64, theta2: f64, s: f64, p: f64) -> Admissible {
    let s_prime_max = theta2 * s + (theta2 * q_w - q_z) / p;
    Admissible { feasible: q_z >= theta1 * q_w, s_prime_max, vacuous: s_prime_max <= 0.0 }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn check_family(map: &SampledMap, family: &[SampledFunction]) -> Result<()> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if let Some(cod) = map.codomain() {
        if family.iter().any(|u| !Arc::ptr_eq(cod, u.space()) && !cod.same_points(u.space())) {
            return Err(Error::Mismatch("family does not live on the map's codomain".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpEmbedding {
    pub p: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// `||u o f||_p / ||u||_p` over a family on the codomain.
pub fn lp_embedding_check(map: &SampledMap, family: &[SampledFunction], p: f64) -> Result<LpEmbedding> {
    check_p(p)?;
    check_family(map, family)?;
    let ratios =
        family.iter().map(|u| Ok(ratio(lp_norm(&compose(map, u)?, p)?, lp_norm(u, p)?))).collect::<Result<Vec<_>>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LpEmbedding { p, ratios, max_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    /// Refuses target smoothness above the admissible bound.
    Verify,
    /// Allows it and marks the report.
    Explore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSetup {
    pub s: f64,
    pub s_prime: f64,
    pub p: f64,
    /// Exponents and radius of the map; the coefficient is not used.
    pub holder: HolderParams,
    pub q_z: f64,
    pub q_w: f64,
    pub mode: StudyMode,
    /// Shared ladder; by default each side gets [`DiscretizationParams::for_space`] at `holder.r`.
    pub disc: Option<DiscretizationParams>,
    /// Also compare the homogeneous seminorms.
    pub seminorm: Option<SeminormMode>,
    pub seed: u64,
    /// Wall time makes reports differ between runs, so it is opt-in.
    pub record_timing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub index: usize,
    /// `||u||` in `B^s(W)`
    pub norm_w: f64,
    /// `||u o f||` in `B^s'(Z)`
    pub norm_z: f64,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seminorm_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seminorm_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seminorm_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub rows: Vec<EmbeddingRow>,
    pub sup_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seminorm_sup_ratio: Option<f64>,
    pub s: f64,
    pub s_prime: f64,
    pub p: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub r: f64,
    pub q_z: f64,
    pub q_w: f64,
    pub admissible: Admissible,
    /// `s_prime <= s_prime_max`
    pub within_bound: bool,
    pub mode: StudyMode,
    pub disc_w: DiscretizationParams,
    pub disc_z: DiscretizationParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seminorm_mode: Option<SeminormMode>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

/// Compares `||u o f||_{B^s'(Z)}` with `||u||_{B^s(W)}` over a family on the
/// codomain using the multiscale norm, optionally alongside the seminorms.
pub fn embedding_ratio_study(
    map: &SampledMap,
    family: &[SampledFunction],
    setup: &EmbeddingSetup,
) -> Result<EmbeddingReport> {
    let started = Instant::now();
    let w_params = BesovParams::new(setup.s, setup.p)?;
    let z_params = BesovParams::new(setup.s_prime, setup.p)?;
    let h = &setup.holder;
    let admissible = admissible_smoothness(setup.q_z, setup.q_w, h.theta1, h.theta2, setup.s, setup.p);
    let within_bound = setup.s_prime <= admissible.s_prime_max * (1.0 + 1e-12) + 1e-12;
    if setup.mode == StudyMode::Verify && !within_bound {
        return Err(Error::InvalidParameter {
            name: "s_prime",
            reason: format!("{} exceeds the admissible {}", setup.s_prime, admissible.s_prime_max),
        });
    }
    let codomain =
        map.codomain().ok_or_else(|| Error::UnsupportedMode("embedding study needs a sampled codomain".into()))?;
    check_family(map, family)?;
    let pulled = family.iter().map(|u| compose(map, u)).collect::<Result<Vec<_>>>()?;
    let (disc_w, disc_z) = match setup.disc {
        Some(d) => (d, d),
        None => (DiscretizationParams::for_space(codomain, h.r)?, DiscretizationParams::for_space(map.domain(), h.r)?),
    };
    let us: Vec<&SampledFunction> = family.iter().collect();
    let vs: Vec<&SampledFunction> = pulled.iter().collect();
    let on_w = discrete_besov_family(&us, &w_params, &disc_w)?;
    let on_z = discrete_besov_family(&vs, &z_params, &disc_z)?;
    let (semi_w, semi_z) = match setup.seminorm {
        Some(mode) => (
            Some(besov_seminorm_family(&us, &w_params, mode, setup.seed)?),
            Some(besov_seminorm_family(&vs, &z_params, mode, setup.seed)?),
        ),
        None => (None, None),
    };
    let rows: Vec<EmbeddingRow> = (0..family.len())
        .map(|k| {
            let (sw, sz) = (semi_w.as_ref().map(|v| v[k]), semi_z.as_ref().map(|v| v[k]));
            EmbeddingRow {
                index: k,
                norm_w: on_w[k].value,
                norm_z: on_z[k].value,
                ratio: ratio(on_z[k].value, on_w[k].value),
                seminorm_w: sw,
                seminorm_z: sz,
                seminorm_ratio: sw.zip(sz).map(|(w, z)| ratio(z, w)),
            }
        })
        .collect();
    let sup_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let seminorm_sup_ratio = setup.seminorm.map(|_| rows.iter().filter_map(|r| r.seminorm_ratio).fold(0.0, f64::max));
    Ok(EmbeddingReport {
        rows,
        sup_ratio,
        seminorm_sup_ratio,
        s: setup.s,
        s_prime: setup.s_prime,
        p: setup.p,
        theta1: h.theta1,
        theta2: h.theta2,
        r: h.r,
        q_z: setup.q_z,
        q_w: setup.q_w,
        admissible,
        within_bound,
        mode: setup.mode,
        disc_w,
        disc_z,
        seminorm_mode: setup.seminorm,
        seed: setup.seed,
        wall_time_secs: setup.record_timing.then(|| started.elapsed().as_secs_f64()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{gen_bumps, random_functions};
    use crate::mapping::{make_identity, make_sqrt_radial};
    use crate::space::{build_cantor, build_grid, snowflake};
    use proptest::prelude::*;

    fn setup(s: f64, s_prime: f64, theta: (f64, f64), q: (f64, f64), mode: StudyMode) -> EmbeddingSetup {
        EmbeddingSetup {
            s,
            s_prime,
            p: 2.0,
            holder: HolderParams::new(theta.0, theta.1, 1.0, 1.0).unwrap(),
            q_z: q.0,
            q_w: q.1,
            mode,
            disc: None,
            seminorm: Some(SeminormMode::Exact),
            seed: 0,
            record_timing: false,
        }
    }

    #[test]
    fn admissible_examples() {
        let a = admissible_smoothness(2.0, 2.0, 1.0, 1.0, 0.7, 3.0);
        assert!(a.feasible && (a.s_prime_max - 0.7).abs() < 1e-15);
        let b = admissible_smoothness(2.0, 2.0, 1.0, 0.5, 3.0, 2.0);
        assert!((b.s_prime_max - 1.0).abs() < 1e-15);
        let c = admissible_smoothness(2.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(c.s_prime_max == 0.0 && c.vacuous);
    }

    #[test]
    fn identity_ratios_are_one() {
        let g = Arc::new(build_grid(1, 2.0, 41, &[]).unwrap());
        let m = make_identity(g.clone(), g.clone()).unwrap();
        let fam = gen_bumps(&g, 4, (0.3, 1.0), 2).unwrap();
        let rep = embedding_ratio_study(&m, &fam, &setup(0.6, 0.6, (1.0, 1.0), (1.0, 1.0), StudyMode::Verify)).unwrap();
        for row in &rep.rows {
            assert_eq!(row.ratio, 1.0);
            assert_eq!(row.seminorm_ratio, Some(1.0));
        }
        let lp = lp_embedding_check(&m, &fam, 2.0).unwrap();
        assert!(lp.ratios.iter().all(|&r| r == 1.0));
        assert!(matches!(lp_embedding_check(&m, &[], 2.0), Err(Error::EmptyFamily)));
    }

    #[test]
    fn snowflake_seminorm_ratio_is_one() {
        let c = build_cantor(1.0 / 3.0, 5, 1).unwrap();
        let w = Arc::new(snowflake(&c, 0.5).unwrap());
        let m = make_identity(Arc::new(c), w.clone()).unwrap();
        let fam = random_functions(&w, 4, 1);
        let q = 2f64.ln() / 3f64.ln();
        let st = setup(0.8, 0.4, (0.5, 0.5), (q, 2.0 * q), StudyMode::Explore);
        let rep = embedding_ratio_study(&m, &fam, &st).unwrap();
        assert!((rep.seminorm_sup_ratio.unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(lp_embedding_check(&m, &fam, 2.0).unwrap().max_ratio, 1.0);
    }

    #[test]
    fn verify_refuses_above_bound() {
        let g = Arc::new(build_grid(1, 2.0, 21, &[]).unwrap());
        let m = make_identity(g.clone(), g.clone()).unwrap();
        let fam = gen_bumps(&g, 1, (0.5, 0.5), 0).unwrap();
        let st = setup(0.5, 0.6, (1.0, 1.0), (1.0, 1.0), StudyMode::Verify);
        assert!(matches!(embedding_ratio_study(&m, &fam, &st), Err(Error::InvalidParameter { name: "s_prime", .. })));
        let st = EmbeddingSetup { mode: StudyMode::Explore, ..st };
        assert!(!embedding_ratio_study(&m, &fam, &st).unwrap().within_bound);
    }

    #[test]
    fn reports_are_reproducible() {
        let g = Arc::new(build_grid(2, 2.0, 21, &[]).unwrap());
        let m = make_sqrt_radial(g.clone()).unwrap();
        let fam = gen_bumps(&g, 3, (0.3, 1.0), 4).unwrap();
        let st = EmbeddingSetup {
            seminorm: Some(SeminormMode::Budget(5000)),
            ..setup(1.2, 0.1, (1.0, 0.5), (2.0, 2.0), StudyMode::Verify)
        };
        let a = serde_json::to_string(&embedding_ratio_study(&m, &fam, &st).unwrap()).unwrap();
        let b = serde_json::to_string(&embedding_ratio_study(&m, &fam, &st).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("wall_time"));
    }

    proptest! {
        #[test]
        fn admissible_is_monotone(
            qz in 0.1f64..5.0, qw in 0.1f64..5.0, t1 in 0.1f64..3.0, t2 in 0.1f64..3.0,
            s in 0.1f64..3.0, p in 1.0f64..5.0, bump in 0.0f64..2.0,
        ) {
            let base = admissible_smoothness(qz, qw, t1, t2, s, p).s_prime_max;
            prop_assert!(admissible_smoothness(qz, qw, t1, t2, s + bump, p).s_prime_max >= base);
            prop_assert!(admissible_smoothness(qz, qw, t1, t2 + bump, s, p).s_prime_max >= base);
            prop_assert!(admissible_smoothness(qz + bump, qw, t1, t2, s, p).s_prime_max <= base);
        }
    }
}
