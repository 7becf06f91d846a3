use std::collections::BTreeMap;

use anyhow::bail;

use crate::besov::StudyMode;

use super::config::*;

pub const PRESETS: &[&str] =
    &["example51", "example52", "snowflake-identity", "remark53", "prop14-roundtrip", "lemma31-equivalence"];

/// Command-line overrides applied when building a preset.
#[derive(Debug, Clone, Copy, Default)]
pub struct PresetOptions {
    pub seed: Option<u64>,
    /// Per-axis resolution of the primary grid; related grids scale with it.
    pub resolution: Option<usize>,
    pub exact: bool,
}

struct Builder {
    config: RunConfig,
}

impl Builder {
    fn new(seed: u64, sampling: Sampling) -> Self {
        Builder {
            config: RunConfig {
                schema: SCHEMA,
                seed,
                out_dir: None,
                sampling,
                record_timing: false,
                spaces: BTreeMap::new(),
                maps: BTreeMap::new(),
                families: BTreeMap::new(),
                analyses: Vec::new(),
            },
        }
    }

    fn space(&mut self, name: &str, spec: SpaceSpec) -> &mut Self {
        self.config.spaces.insert(name.into(), spec);
        self
    }

    fn map(&mut self, name: &str, spec: MapSpec) -> &mut Self {
        self.config.maps.insert(name.into(), spec);
        self
    }

    fn family(&mut self, name: &str, spec: FamilySpec) -> &mut Self {
        self.config.families.insert(name.into(), spec);
        self
    }

    fn verify(&mut self, name: &str, kind: AnalysisKind) -> &mut Self {
        self.config.analyses.push(AnalysisSpec { name: name.into(), mode: StudyMode::Verify, kind });
        self
    }

    fn explore(&mut self, name: &str, kind: AnalysisKind) -> &mut Self {
        self.config.analyses.push(AnalysisSpec { name: name.into(), mode: StudyMode::Explore, kind });
        self
    }
}

fn grid(dim: usize, half_width: f64, resolution: usize, offset: Vec<f64>) -> SpaceSpec {
    SpaceSpec::Grid { dim, half_width, resolution, offset }
}

/// Resolution of a window `k` times wider at the same spacing.
fn widen(resolution: usize, k: usize) -> usize {
    (resolution - 1) * k + 1
}

/// A fully populated deterministic config for a named scenario.
pub fn preset(name: &str, opts: PresetOptions) -> anyhow::Result<RunConfig> {
    let seed = opts.seed.unwrap_or(0);
    let res = |default: usize| -> anyhow::Result<usize> {
        let r = opts.resolution.unwrap_or(default);
        if r < 2 {
            bail!("resolution {r} is below 2");
        }
        Ok(r)
    };
    let sampling = |budget: usize| if opts.exact { Sampling::Exact } else { Sampling::Budget(budget) };
    let mut b;
    match name {
        "example51" => {
            let n_res = res(61)?;
            b = Builder::new(seed, sampling(200_000));
            for n in 1..=10 {
                let (space, map) = (format!("window_{n}"), format!("stretch_{n}"));
                b.space(&space, grid(2, 2.0, n_res, vec![n as f64, 0.0]))
                    .map(&map, MapSpec::RadialStretch { domain: space });
                let bounds = UbBounds { b_min: Some((2 * n + 1) as f64), ..UbBounds::default() };
                b.verify(&format!("growth_n{n:02}"), ub(&map, 1.0, Some(vec![vec![n as f64, 0.0]]), bounds));
            }
            let mut nested = Vec::new();
            for (k, hw) in [(1, 4.0), (2, 8.0), (4, 16.0)] {
                let (space, map) = (format!("nested_{hw}"), format!("nested_stretch_{hw}"));
                b.space(&space, grid(2, hw, widen(n_res, k), Vec::new()))
                    .map(&map, MapSpec::RadialStretch { domain: space });
                nested.push(map);
            }
            b.verify(
                "nested_windows",
                AnalysisKind::NestedUniformBoundedness {
                    maps: nested,
                    r: 1.0,
                    n_centers: 100,
                    growth_factor: crate::mapping::DEFAULT_GROWTH_FACTOR,
                    expect_verdict: Some(false),
                },
            );
        }
        "example52" => {
            b = Builder::new(seed, sampling(4_000_000));
            b.space("window", grid(2, 4.0, res(81)?, Vec::new()))
                .map("sqrt_radial", MapSpec::SqrtRadial { domain: "window".into() });
            let bounds = UbBounds { a_min: Some(2.0), b_min: None, b_max: Some(6.0), verdict: Some(true) };
            b.verify("bounds", ub("sqrt_radial", 2.0, None, bounds))
                .verify(
                    "holder_fit",
                    AnalysisKind::HolderFit {
                        map: "sqrt_radial".into(),
                        r: 2.0,
                        n_pairs: None,
                        theta1_range: Some((0.9, 1.1)),
                        theta2_range: Some((0.45, 0.55)),
                    },
                )
                .explore(
                    "qs_fit",
                    AnalysisKind::QsFit { map: "sqrt_radial".into(), theta_grid: qs_grid(), n_triples: 2000 },
                )
                .verify(
                    "qs_to_holder",
                    AnalysisKind::QsToHolder {
                        map: "sqrt_radial".into(),
                        r: 2.0,
                        kappa: None,
                        kappa_grid: vec![1.5, 2.0, 3.0, 4.0, 8.0, 16.0],
                        theta_grid: qs_grid(),
                        n_centers: 200,
                        n_triples: 2000,
                        n_pairs: None,
                    },
                );
        }
        "snowflake-identity" => {
            b = Builder::new(seed, Sampling::Exact);
            let depth = opts.resolution.map(|r| (r.max(2) as f64).log2().round() as usize).unwrap_or(8);
            let q = 2f64.ln() / 3f64.ln();
            b.space("cantor", SpaceSpec::Cantor { ratio: 1.0 / 3.0, depth, dim: 1 });
            for (label, eps, s) in [("half", 0.5, 0.8), ("third", 1.0 / 3.0, 0.9)] {
                let (space, map, fam) =
                    (format!("snowflake_{label}"), format!("identity_{label}"), format!("random_{label}"));
                b.space(&space, SpaceSpec::Snowflake { base: "cantor".into(), epsilon: eps })
                    .map(&map, MapSpec::Identity { domain: "cantor".into(), codomain: space.clone() })
                    .family(&fam, FamilySpec::Random { space, count: 10, seed: None })
                    .verify(
                        &format!("embedding_{label}"),
                        AnalysisKind::Embedding {
                            map,
                            family: fam,
                            points: vec![SmoothnessPoint { s, p: 2.0, s_prime: Some(eps * s) }],
                            holder: Exponents { theta1: eps, theta2: eps, r: 1.0 },
                            q_z: q,
                            q_w: q / eps,
                            disc: None,
                            seminorm: true,
                            max_sup_ratio: None,
                            expect_seminorm_ratio: Some(1.0),
                            tolerance: 1e-10,
                        },
                    );
            }
        }
        "remark53" => {
            b = Builder::new(seed, sampling(200_000));
            b.space("window", grid(2, 4.0, res(81)?, Vec::new()))
                .map("sqrt_radial", MapSpec::SqrtRadial { domain: "window".into() })
                .family(
                    "bumps",
                    FamilySpec::Bumps { space: "window".into(), count: 20, width_range: (0.5, 2.0), seed: None },
                );
            let points = [1.2, 1.6, 2.0]
                .iter()
                .flat_map(|&s| [2.0, 4.0].map(|p| SmoothnessPoint { s, p, s_prime: None }))
                .collect();
            b.verify(
                "boundary_grid",
                AnalysisKind::Embedding {
                    map: "sqrt_radial".into(),
                    family: "bumps".into(),
                    points,
                    holder: Exponents { theta1: 1.0, theta2: 0.5, r: 2.0 },
                    q_z: 2.0,
                    q_w: 2.0,
                    disc: None,
                    seminorm: false,
                    max_sup_ratio: None,
                    expect_seminorm_ratio: None,
                    tolerance: 1e-10,
                },
            );
        }
        "prop14-roundtrip" => {
            b = Builder::new(seed, sampling(2_000_000));
            let depth = opts.resolution.map(|r| (r.max(2) as f64).log2().round() as usize).unwrap_or(8);
            b.space("cantor", SpaceSpec::Cantor { ratio: 1.0 / 3.0, depth, dim: 1 })
                .space("snowflake", SpaceSpec::Snowflake { base: "cantor".into(), epsilon: 0.5 })
                .map("identity", MapSpec::Identity { domain: "cantor".into(), codomain: "snowflake".into() })
                .verify(
                    "roundtrip",
                    AnalysisKind::HolderRoundtrip { map: "identity".into(), r: 0.5, n_pairs: None, tolerance: 0.1 },
                );
        }
        "lemma31-equivalence" => {
            b = Builder::new(seed, Sampling::Exact);
            let mid = res(201)?;
            let mut families = Vec::new();
            for r in [mid / 2 + 1, mid, widen(mid, 2)] {
                let (space, fam) = (format!("line_{r}"), format!("bumps_{r}"));
                b.space(&space, grid(1, 1.0, r, Vec::new()))
                    .family(&fam, FamilySpec::Bumps { space, count: 20, width_range: (0.125, 0.5), seed: None });
                families.push(fam);
            }
            b.verify(
                "scale_part_vs_seminorm",
                AnalysisKind::Equivalence { families, s: 0.5, p: 2.0, r: None, max_k_variation: Some(2.0) },
            );
        }
        other => bail!("unknown preset `{other}` (known: {})", PRESETS.join(", ")),
    }
    Ok(b.config)
}

#[derive(Default)]
struct UbBounds {
    a_min: Option<f64>,
    b_min: Option<f64>,
    b_max: Option<f64>,
    verdict: Option<bool>,
}

fn ub(map: &str, r: f64, centers: Option<Vec<Vec<f64>>>, bounds: UbBounds) -> AnalysisKind {
    AnalysisKind::UniformBoundedness {
        map: map.into(),
        r,
        n_centers: 200,
        centers,
        ratio_cap: crate::mapping::DEFAULT_RATIO_CAP,
        a_min: bounds.a_min,
        b_min: bounds.b_min,
        b_max: bounds.b_max,
        expect_verdict: bounds.verdict,
        tolerance: 0.05,
    }
}

fn qs_grid() -> Vec<f64> {
    (0..=40).map(|k| 1.0 + 0.05 * k as f64).collect()
}
