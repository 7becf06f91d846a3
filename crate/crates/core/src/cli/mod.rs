//! Batch front end: a JSON [`RunConfig`] names spaces, maps, function
//! families and analyses; [`run`] writes one JSON report per analysis.
//! Verify-mode analyses that miss a declared bound fail the run.

mod config;
mod presets;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use serde_json::{json, Value};

use crate::besov::{
    admissible_smoothness, besov_seminorm_family, discrete_besov_family, embedding_ratio_study, gen_bumps,
    lp_embedding_check, random_functions, read_function_csv, BesovParams, DiscretizationParams, EmbeddingSetup,
    SampledFunction, SeminormMode, StudyMode,
};
use crate::mapping::{
    check_local_biholder, check_uniform_boundedness, check_uniform_boundedness_at, fit_local_biholder, fit_power_qs,
    inverse_params, invert, make_identity, make_radial_stretch, make_scaling, make_sqrt_radial,
    nested_uniform_boundedness, qs_ratio_audit, qs_to_holder_constants, read_map_csv, HolderParams, SampledMap,
};
use crate::space::io::read_point_cloud;
use crate::space::{build_cantor, build_grid, check_uniform_perfectness, estimate_regularity, snowflake, SampledSpace};

pub use config::{
    AnalysisKind, AnalysisSpec, Exponents, FamilySpec, MapSpec, RunConfig, Sampling, SmoothnessPoint, SpaceSpec, SCHEMA,
};
pub use presets::{preset, PresetOptions, PRESETS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
}

fn check(label: String, passed: bool) -> Check {
    Check { label, passed }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub name: String,
    pub analysis: String,
    pub mode: StudyMode,
    pub seed: u64,
    pub sampling: Sampling,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub result: Value,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<(PathBuf, AnalysisReport)>,
}

impl RunSummary {
    /// No verify-mode analysis failed.
    pub fn success(&self) -> bool {
        self.reports.iter().all(|(_, r)| r.mode == StudyMode::Explore || r.passed)
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(config)
}

fn validate(config: &RunConfig) -> anyhow::Result<()> {
    if config.schema != SCHEMA {
        bail!("unsupported schema {} (expected {SCHEMA})", config.schema);
    }
    let mut seen = HashMap::new();
    for (k, a) in config.analyses.iter().enumerate() {
        if a.name.is_empty() || a.name.contains(['/', '\\']) || a.name.starts_with('.') {
            bail!("analysis {k}: `{}` is not a valid report name", a.name);
        }
        if let Some(prev) = seen.insert(a.name.as_str(), k) {
            bail!("analyses {prev} and {k} share the name `{}`", a.name);
        }
    }
    Ok(())
}

/// Builds everything the config names and runs its analyses, writing
/// `<out_dir>/<name>.json` for each. Relative CSV paths resolve against
/// `base_dir`.
pub fn run(config: &RunConfig, base_dir: &Path, out_dir: &Path) -> anyhow::Result<RunSummary> {
    validate(config)?;
    let mut ctx = Workspace::new(config, base_dir);
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut reports = Vec::with_capacity(config.analyses.len());
    for spec in &config.analyses {
        let report = ctx.analyse(spec).with_context(|| format!("analysis `{}`", spec.name))?;
        let path = out_dir.join(format!("{}.json", spec.name));
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        reports.push((path, report));
    }
    Ok(RunSummary { reports })
}

struct Workspace<'a> {
    config: &'a RunConfig,
    base_dir: PathBuf,
    spaces: HashMap<String, Arc<SampledSpace>>,
    maps: HashMap<String, Arc<SampledMap>>,
    families: HashMap<String, Arc<Vec<SampledFunction>>>,
}

impl<'a> Workspace<'a> {
    fn new(config: &'a RunConfig, base_dir: &Path) -> Self {
        Workspace {
            config,
            base_dir: base_dir.to_path_buf(),
            spaces: HashMap::new(),
            maps: HashMap::new(),
            families: HashMap::new(),
        }
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn space(&mut self, name: &str) -> anyhow::Result<Arc<SampledSpace>> {
        self.space_at(name, 0)
    }

    fn space_at(&mut self, name: &str, depth: usize) -> anyhow::Result<Arc<SampledSpace>> {
        if let Some(s) = self.spaces.get(name) {
            return Ok(s.clone());
        }
        let spec = self.config.spaces.get(name).ok_or_else(|| anyhow!("unknown space `{name}`"))?;
        if depth > self.config.spaces.len() {
            bail!("space `{name}` refers to itself");
        }
        let built = match spec {
            SpaceSpec::Grid { dim, half_width, resolution, offset } => {
                build_grid(*dim, *half_width, *resolution, offset)
            }
            SpaceSpec::Cantor { ratio, depth, dim } => build_cantor(*ratio, *depth, *dim),
            SpaceSpec::Snowflake { base, epsilon } => {
                let base = self.space_at(base, depth + 1)?;
                snowflake(&base, *epsilon)
            }
            SpaceSpec::Csv { path, metric_path } => {
                let metric = metric_path.as_ref().map(|p| self.path(p));
                read_point_cloud(&self.path(path), metric.as_deref())
            }
        };
        let space = Arc::new(built.with_context(|| format!("building space `{name}`"))?);
        self.spaces.insert(name.to_string(), space.clone());
        Ok(space)
    }

    fn map(&mut self, name: &str) -> anyhow::Result<Arc<SampledMap>> {
        self.map_at(name, 0)
    }

    fn map_at(&mut self, name: &str, depth: usize) -> anyhow::Result<Arc<SampledMap>> {
        if let Some(m) = self.maps.get(name) {
            return Ok(m.clone());
        }
        let spec = self.config.maps.get(name).ok_or_else(|| anyhow!("unknown map `{name}`"))?;
        if depth > self.config.maps.len() {
            bail!("map `{name}` refers to itself");
        }
        let built = match spec {
            MapSpec::RadialStretch { domain } => make_radial_stretch(self.space(domain)?),
            MapSpec::SqrtRadial { domain } => make_sqrt_radial(self.space(domain)?),
            MapSpec::Scaling { domain, factor } => make_scaling(self.space(domain)?, *factor),
            MapSpec::Identity { domain, codomain } => make_identity(self.space(domain)?, self.space(codomain)?),
            MapSpec::Csv { path, domain, codomain } => {
                read_map_csv(&self.path(path), self.space(domain)?, self.space(codomain)?)
            }
            MapSpec::Inverse { of } => invert(&*self.map_at(of, depth + 1)?),
        };
        let map = Arc::new(built.with_context(|| format!("building map `{name}`"))?);
        self.maps.insert(name.to_string(), map.clone());
        Ok(map)
    }

    fn family(&mut self, name: &str) -> anyhow::Result<Arc<Vec<SampledFunction>>> {
        if let Some(f) = self.families.get(name) {
            return Ok(f.clone());
        }
        let spec = self.config.families.get(name).ok_or_else(|| anyhow!("unknown family `{name}`"))?;
        let seed = self.config.seed;
        let built = match spec {
            FamilySpec::Bumps { space, count, width_range, seed: s } => {
                gen_bumps(&self.space(space)?, *count, *width_range, s.unwrap_or(seed))
            }
            FamilySpec::Random { space, count, seed: s } => {
                Ok(random_functions(&self.space(space)?, *count, s.unwrap_or(seed)))
            }
            FamilySpec::Csv { space, paths } => {
                let space = self.space(space)?;
                paths.iter().map(|p| read_function_csv(&self.path(p), space.clone())).collect()
            }
        };
        let family = Arc::new(built.with_context(|| format!("building family `{name}`"))?);
        self.families.insert(name.to_string(), family.clone());
        Ok(family)
    }

    fn analyse(&mut self, spec: &AnalysisSpec) -> anyhow::Result<AnalysisReport> {
        let (label, result, checks) = self.dispatch(&spec.kind, spec.mode)?;
        Ok(AnalysisReport {
            schema: SCHEMA,
            name: spec.name.clone(),
            analysis: label.to_string(),
            mode: spec.mode,
            seed: self.config.seed,
            sampling: self.config.sampling,
            passed: checks.iter().all(|c| c.passed),
            checks,
            result,
        })
    }

    fn dispatch(&mut self, kind: &AnalysisKind, mode: StudyMode) -> anyhow::Result<(&'static str, Value, Vec<Check>)> {
        let seed = self.config.seed;
        let sampling = self.config.sampling;
        let pairs = |n: &Option<usize>| n.unwrap_or(sampling.pairs());
        Ok(match kind {
            AnalysisKind::Regularity { space, n_centers, n_radii, expect_q, tolerance } => {
                let rep = estimate_regularity(&*self.space(space)?, *n_centers, *n_radii, seed)?;
                let mut checks = Vec::new();
                if let Some(q) = expect_q {
                    let ok = (rep.q_hat - q).abs() <= *tolerance;
                    checks.push(check(format!("|Q_hat - {q}| <= {tolerance} (Q_hat = {})", rep.q_hat), ok));
                }
                ("regularity", serde_json::to_value(rep)?, checks)
            }
            AnalysisKind::Perfectness { space, kappa_grid, n_probes } => {
                let rep = check_uniform_perfectness(&*self.space(space)?, kappa_grid, *n_probes, seed)?;
                let checks =
                    vec![check(format!("perfect at some tested kappa (kappa_hat = {:?})", rep.kappa_hat), rep.verdict)];
                ("perfectness", serde_json::to_value(rep)?, checks)
            }
            AnalysisKind::UniformBoundedness {
                map,
                r,
                n_centers,
                centers,
                ratio_cap,
                a_min,
                b_min,
                b_max,
                expect_verdict,
                tolerance,
            } => {
                let map = self.map(map)?;
                let rep = match centers {
                    Some(points) => {
                        let idx =
                            points.iter().map(|x| map.domain().nearest_point(x)).collect::<crate::Result<Vec<_>>>()?;
                        check_uniform_boundedness_at(&map, *r, &idx, *ratio_cap)?
                    }
                    None => check_uniform_boundedness(&map, *r, *n_centers, seed)?,
                };
                let mut checks = Vec::new();
                if let Some(lo) = a_min {
                    let bound = lo * (1.0 - tolerance);
                    checks.push(check(format!("a >= {bound} (a = {})", rep.a), rep.a >= bound));
                }
                if let Some(lo) = b_min {
                    let bound = lo * (1.0 - tolerance);
                    checks.push(check(format!("b >= {bound} (b = {})", rep.b), rep.b >= bound));
                }
                if let Some(hi) = b_max {
                    let bound = hi * (1.0 + tolerance);
                    checks.push(check(format!("b <= {bound} (b = {})", rep.b), rep.b <= bound));
                }
                if let Some(v) = expect_verdict {
                    checks.push(check(format!("verdict is {v}"), rep.verdict == *v));
                }
                ("uniform_boundedness", serde_json::to_value(rep)?, checks)
            }
            AnalysisKind::NestedUniformBoundedness { maps, r, n_centers, growth_factor, expect_verdict } => {
                let maps =
                    maps.iter().map(|m| self.map(m).map(|m| (*m).clone())).collect::<anyhow::Result<Vec<_>>>()?;
                let rep = nested_uniform_boundedness(&maps, *r, *n_centers, seed, *growth_factor)?;
                let checks = expect_verdict
                    .map(|v| check(format!("nested verdict is {v}"), rep.verdict == v))
                    .into_iter()
                    .collect();
                ("nested_uniform_boundedness", serde_json::to_value(rep)?, checks)
            }
            AnalysisKind::HolderFit { map, r, n_pairs, theta1_range, theta2_range } => {
                let fit = fit_local_biholder(&*self.map(map)?, *r, pairs(n_pairs), seed)?;
                let mut checks = Vec::new();
                for (name, value, range) in
                    [("theta1", fit.params.theta1, theta1_range), ("theta2", fit.params.theta2, theta2_range)]
                {
                    if let Some((lo, hi)) = range {
                        let ok = (*lo..=*hi).contains(&value);
                        checks.push(check(format!("{name} in [{lo}, {hi}] ({name} = {value})"), ok));
                    }
                }
                ("holder_fit", serde_json::to_value(fit)?, checks)
            }
            AnalysisKind::HolderCheck { map, params, n_pairs } => {
                let rep = check_local_biholder(&*self.map(map)?, params, pairs(n_pairs), seed)?;
                let checks = vec![check(format!("{} violations", rep.violation_count), rep.verdict)];
                ("holder_check", serde_json::to_value(rep)?, checks)
            }
            AnalysisKind::HolderRoundtrip { map, r, n_pairs, tolerance } => {
                let forward_map = self.map(map)?;
                let backward_map = invert(&forward_map)?;
                let forward = fit_local_biholder(&forward_map, *r, pairs(n_pairs), seed)?;
                let predicted = inverse_params(&forward.params);
                let backward = fit_local_biholder(&backward_map, predicted.r, pairs(n_pairs), seed)?;
                let mut checks = Vec::new();
                for (name, want, got) in [
                    ("theta1", predicted.theta1, backward.params.theta1),
                    ("theta2", predicted.theta2, backward.params.theta2),
                ] {
                    let ok = (got - want).abs() <= tolerance * want.abs();
                    checks.push(check(format!("inverse {name} {got} within {tolerance} of {want}"), ok));
                }
                let result = json!({ "forward": forward, "predicted_inverse": predicted, "inverse": backward });
                ("holder_roundtrip", result, checks)
            }
            AnalysisKind::QsFit { map, theta_grid, n_triples } => {
                let fit = fit_power_qs(&*self.map(map)?, theta_grid, *n_triples, seed)?;
                ("qs_fit", serde_json::to_value(fit)?, Vec::new())
            }
            AnalysisKind::QsAudit { map, params, n_triples } => {
                let rep = qs_ratio_audit(&*self.map(map)?, params, *n_triples, seed)?;
                let checks = vec![check(format!("{} violations", rep.violations), rep.violations == 0)];
                ("qs_audit", serde_json::to_value(rep)?, checks)
            }
            AnalysisKind::QsToHolder { map, r, kappa, kappa_grid, theta_grid, n_centers, n_triples, n_pairs } => {
                let map = self.map(map)?;
                let ub = check_uniform_boundedness(&map, *r, *n_centers, seed)?;
                let qs = fit_power_qs(&map, theta_grid, *n_triples, seed)?;
                let (kappa, perfectness) = match kappa {
                    Some(k) => (*k, None),
                    None => {
                        let rep = check_uniform_perfectness(map.domain(), kappa_grid, 500, seed)?;
                        let k = rep.kappa_hat.ok_or_else(|| anyhow!("no tested kappa makes the domain perfect"))?;
                        (k, Some(rep))
                    }
                };
                let constants = qs_to_holder_constants(&qs.params, kappa, *r, ub.a, ub.b)?;
                let held = check_local_biholder(&map, &constants.params, pairs(n_pairs), seed)?;
                let checks =
                    vec![check(format!("derived parameters hold ({} violations)", held.violation_count), held.verdict)];
                let result = json!({
                    "uniform_boundedness": ub,
                    "qs_fit": qs,
                    "kappa": kappa,
                    "perfectness": perfectness,
                    "constants": constants,
                    "check": held,
                });
                ("qs_to_holder", result, checks)
            }
            AnalysisKind::LpEmbedding { map, family, p, max_ratio } => {
                let rep = lp_embedding_check(&*self.map(map)?, &self.family(family)?, *p)?;
                let mut checks =
                    vec![check(format!("ratios finite (max {})", rep.max_ratio), rep.max_ratio.is_finite())];
                if let Some(m) = max_ratio {
                    checks.push(check(format!("max ratio <= {m}"), rep.max_ratio <= *m));
                }
                ("lp_embedding", serde_json::to_value(rep)?, checks)
            }
            AnalysisKind::Embedding {
                map,
                family,
                points,
                holder,
                q_z,
                q_w,
                disc,
                seminorm,
                max_sup_ratio,
                expect_seminorm_ratio,
                tolerance,
            } => {
                let map = self.map(map)?;
                let family = self.family(family)?;
                let holder_params = HolderParams::new(holder.theta1, holder.theta2, holder.r, 1.0)?;
                let mut reports = Vec::with_capacity(points.len());
                let mut checks = Vec::new();
                for pt in points {
                    let s_prime = pt.s_prime.unwrap_or_else(|| {
                        admissible_smoothness(*q_z, *q_w, holder.theta1, holder.theta2, pt.s, pt.p).s_prime_max
                    });
                    let setup = EmbeddingSetup {
                        s: pt.s,
                        s_prime,
                        p: pt.p,
                        holder: holder_params,
                        q_z: *q_z,
                        q_w: *q_w,
                        mode,
                        disc: *disc,
                        seminorm: seminorm.then(|| sampling.seminorm()),
                        seed,
                        record_timing: self.config.record_timing,
                    };
                    let rep = embedding_ratio_study(&map, &family, &setup)?;
                    let at = format!("(s, s', p) = ({}, {s_prime}, {})", pt.s, pt.p);
                    checks.push(check(format!("{at}: sup ratio {} finite", rep.sup_ratio), rep.sup_ratio.is_finite()));
                    if let Some(m) = max_sup_ratio {
                        checks.push(check(format!("{at}: sup ratio <= {m}"), rep.sup_ratio <= *m));
                    }
                    if let (Some(want), Some(got)) = (expect_seminorm_ratio, rep.seminorm_sup_ratio) {
                        let ok = (got - want).abs() <= tolerance * want.abs();
                        checks.push(check(format!("{at}: seminorm sup ratio {got} within {tolerance} of {want}"), ok));
                    }
                    reports.push(rep);
                }
                ("embedding", serde_json::to_value(reports)?, checks)
            }
            AnalysisKind::Equivalence { families, s, p, r, max_k_variation } => {
                let params = BesovParams::new(*s, *p)?;
                let mut rows = Vec::with_capacity(families.len());
                let mut ks = Vec::with_capacity(families.len());
                for name in families {
                    let fam = self.family(name)?;
                    let space = fam.first().ok_or_else(|| anyhow!("family `{name}` is empty"))?.space().clone();
                    let disc = DiscretizationParams::for_space(&space, r.unwrap_or_else(|| space.diam_sample()))?;
                    let refs: Vec<&SampledFunction> = fam.iter().collect();
                    let multiscale = discrete_besov_family(&refs, &params, &disc)?;
                    let exact = besov_seminorm_family(&refs, &params, sampling.seminorm(), seed)?;
                    let ratios: Vec<f64> = multiscale.iter().zip(&exact).map(|(d, e)| d.scale_norm / e).collect();
                    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = ratios.iter().copied().fold(0.0, f64::max);
                    let k = hi.max(1.0 / lo);
                    ks.push(k);
                    rows.push(json!({
                        "family": name,
                        "points": space.len(),
                        "disc": disc,
                        "ratios": ratios,
                        "min_ratio": lo,
                        "max_ratio": hi,
                        "k": k,
                    }));
                }
                let variation =
                    ks.iter().copied().fold(0.0, f64::max) / ks.iter().copied().fold(f64::INFINITY, f64::min);
                let mut checks =
                    vec![check(format!("band constants finite ({ks:?})"), ks.iter().all(|k| k.is_finite()))];
                if let Some(m) = max_k_variation {
                    checks.push(check(format!("K varies by {variation} < {m}"), variation < *m));
                }
                let mode: SeminormMode = sampling.seminorm();
                ("equivalence", json!({ "rows": rows, "k_variation": variation, "seminorm_mode": mode }), checks)
            }
        })
    }
}

/// One status line per analysis.
pub fn summary_lines(summary: &RunSummary) -> Vec<String> {
    summary
        .reports
        .iter()
        .map(|(path, r)| {
            let status = match (r.mode, r.passed) {
                (StudyMode::Verify, true) => "pass",
                (StudyMode::Verify, false) => "FAIL",
                (StudyMode::Explore, true) => "ok",
                (StudyMode::Explore, false) => "note",
            };
            format!("{status:<5} {:<32} {}", r.name, path.display())
        })
        .collect()
}
