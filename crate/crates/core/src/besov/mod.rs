//! `L^p` and Besov norms of functions sampled on a [`SampledSpace`], the
//! composition operator and the embedding study built on them.

mod discrete;
mod embedding;
mod seminorm;

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::mapping::SampledMap;
use crate::space::{euclid, Metric, SampledSpace};
use crate::stats::{log_uniform, CompensatedSum};

pub use discrete::{discrete_besov, discrete_besov_family, DiscreteBesov, DiscretizationParams, ScaleTerm};
pub use embedding::{
    admissible_smoothness, embedding_ratio_study, lp_embedding_check, Admissible, EmbeddingReport, EmbeddingRow,
    EmbeddingSetup, LpEmbedding, StudyMode,
};
pub use seminorm::{besov_energy_family, besov_seminorm, besov_seminorm_family, SeminormMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        ensure_positive("s", s)?;
        check_p(p)?;
        Ok(BesovParams { s, p })
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter { name: "p", reason: format!("integrability must be >= 1, got {p}") });
    }
    Ok(())
}

/// Cubic-spline kernel on `q >= 0`: 1 at the origin, `C^2`, zero from `q = 2`.
pub fn cubic_spline(q: f64) -> f64 {
    if q < 1.0 {
        1.0 - 1.5 * q * q + 0.75 * q * q * q
    } else if q < 2.0 {
        0.25 * (2.0 - q).powi(3)
    } else {
        0.0
    }
}

/// Radial bump supported on the open ball of radius `width` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
}

impl Bump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        cubic_spline(2.0 * euclid(x, &self.center) / self.width)
    }
}

#[derive(Debug, Clone)]
pub struct SampledFunction {
    space: Arc<SampledSpace>,
    values: Vec<f64>,
    profile: Option<Bump>,
}

impl SampledFunction {
    pub fn new(space: Arc<SampledSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Mismatch(format!("{} values for {} points", values.len(), space.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(i));
        }
        Ok(SampledFunction { space, values, profile: None })
    }

    /// A bump sampled on a euclidean space, keeping its closed form so it can
    /// be evaluated off the sample.
    pub fn bump(space: Arc<SampledSpace>, center: &[f64], width: f64) -> Result<Self> {
        ensure_positive("width", width)?;
        if center.len() != space.dim() {
            return Err(Error::Dimension { expected: space.dim(), found: center.len() });
        }
        if !matches!(space.metric(), Metric::Euclidean) {
            return Err(Error::UnsupportedMode("bumps need a euclidean space".into()));
        }
        let spacing = space.min_positive_distance();
        if width < spacing {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: format!("width {width} is below the sample spacing {spacing}"),
            });
        }
        let bump = Bump { center: center.to_vec(), width };
        let values = (0..space.len()).map(|i| bump.eval(space.coords(i))).collect();
        Ok(SampledFunction { space, values, profile: Some(bump) })
    }

    pub fn space(&self) -> &Arc<SampledSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn profile(&self) -> Option<&Bump> {
        self.profile.as_ref()
    }

    /// Value at arbitrary coordinates, available for closed-form functions.
    pub fn evaluate_at(&self, x: &[f64]) -> Option<f64> {
        self.profile.as_ref().map(|b| b.eval(x))
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        SampledFunction::new(self.space.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self> {
        if !Arc::ptr_eq(&self.space, &other.space) && !self.space.same_points(&other.space) {
            return Err(Error::Mismatch("functions live on different spaces".into()));
        }
        SampledFunction::new(self.space.clone(), self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }
}

/// `(sum_x |u(x)|^p w(x))^(1/p)`
pub fn lp_norm(u: &SampledFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    let mut acc = CompensatedSum::default();
    for (v, w) in u.values.iter().zip(u.space.weights()) {
        acc.add(v.abs().powf(p) * w);
    }
    Ok(acc.value().powf(1.0 / p))
}

/// `n` bumps with widths log-uniform in `width_range` and centers uniform
/// over the part of the window at distance at least the width from its
/// boundary; on windowless spaces the centers are random sample points.
pub fn gen_bumps(
    space: &Arc<SampledSpace>,
    n: usize,
    width_range: (f64, f64),
    seed: u64,
) -> Result<Vec<SampledFunction>> {
    let (lo, hi) = width_range;
    ensure_positive("width", lo)?;
    if hi < lo {
        return Err(Error::InvalidParameter { name: "width_range", reason: format!("empty range [{lo}, {hi}]") });
    }
    if let Some(w) = space.window() {
        if hi > w.half_width {
            return Err(Error::WindowTooSmall(hi));
        }
    }
    let mut rng = crate::stats::rng(seed);
    (0..n)
        .map(|_| {
            let width = if hi > lo { log_uniform(&mut rng, lo, hi) } else { lo };
            let center: Vec<f64> = match space.window() {
                Some(w) => {
                    let room = w.half_width - width;
                    w.center.iter().map(|&c| c + rng.gen_range(-room..=room)).collect()
                }
                None => space.coords(rng.gen_range(0..space.len())).to_vec(),
            };
            SampledFunction::bump(space.clone(), &center, width)
        })
        .collect()
}

/// Independent uniform values in `[-1, 1]`.
pub fn random_functions(space: &Arc<SampledSpace>, n: usize, seed: u64) -> Vec<SampledFunction> {
    let mut rng = crate::stats::rng(seed);
    (0..n)
        .map(|_| SampledFunction {
            space: space.clone(),
            values: (0..space.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
            profile: None,
        })
        .collect()
}

/// `u o f` on the domain of `f`.
pub fn compose(map: &SampledMap, u: &SampledFunction) -> Result<SampledFunction> {
    let n = map.len();
    let mut values = Vec::with_capacity(n);
    if map.is_bijection() {
        let cod = map.codomain().expect("bijection has a codomain");
        if !Arc::ptr_eq(cod, u.space()) && !cod.same_points(u.space()) {
            return Err(Error::Mismatch("function does not live on the map's codomain".into()));
        }
        for i in 0..n {
            values.push(u.values[map.image_index(i).expect("bijection")]);
        }
    } else {
        for i in 0..n {
            let y = map.image_coords(i).ok_or(Error::Evaluation(i))?;
            let v = match u.evaluate_at(y) {
                Some(v) => v,
                None => sampled_value_at(u, y).ok_or(Error::Evaluation(i))?,
            };
            values.push(v);
        }
    }
    SampledFunction::new(map.domain().clone(), values)
}

/// Value at a sample point with exactly these coordinates, up to rounding.
fn sampled_value_at(u: &SampledFunction, y: &[f64]) -> Option<f64> {
    let j = u.space.nearest_point(y).ok()?;
    let tol = 1e-9 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    (euclid(u.space.coords(j), y) <= tol).then(|| u.values[j])
}

/// Reads a function from a CSV with header `id,value`.
pub fn read_function_csv(path: &Path, space: Arc<SampledSpace>) -> Result<SampledFunction> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "value" {
        return Err(Error::Config(format!("{}: expected header `id,value`", path.display())));
    }
    let mut values = vec![f64::NAN; space.len()];
    for record in reader.records() {
        let record = record?;
        let i = space
            .index_of(&record[0])
            .ok_or_else(|| Error::Resolution { kind: "point", name: record[0].to_string() })?;
        values[i] = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{}: cannot parse `{}`", path.display(), &record[1])))?;
    }
    SampledFunction::new(space, values)
}

pub fn write_function_csv(u: &SampledFunction, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "value"])?;
    for (id, v) in u.space.ids().iter().zip(&u.values) {
        w.write_record([id.as_str(), &format!("{v:?}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{make_identity, make_sqrt_radial};
    use crate::space::{build_cantor, build_grid, snowflake};

    fn grid(dim: usize, hw: f64, res: usize) -> Arc<SampledSpace> {
        Arc::new(build_grid(dim, hw, res, &[]).unwrap())
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid(2, 1.0, 21);
        let zero = SampledFunction::new(g.clone(), vec![0.0; g.len()]).unwrap();
        assert_eq!(lp_norm(&zero, 2.0).unwrap(), 0.0);
        let one = SampledFunction::new(g.clone(), vec![1.0; g.len()]).unwrap();
        assert!((lp_norm(&one, 2.0).unwrap() - 2.0).abs() < 1e-12);
        let two = grid(1, 0.5, 2);
        let u = SampledFunction::new(two, vec![0.0, 1.0]).unwrap();
        assert_eq!(lp_norm(&u, 1.0).unwrap(), 0.5);
        assert!(lp_norm(&u, 0.5).is_err());
    }

    #[test]
    fn spline_profile() {
        assert_eq!(cubic_spline(0.0), 1.0);
        assert_eq!(cubic_spline(2.0), 0.0);
        assert!((cubic_spline(1.0) - 0.25).abs() < 1e-15);
        // C^1 at the knot
        let h = 1e-6;
        let left = (cubic_spline(1.0) - cubic_spline(1.0 - h)) / h;
        let right = (cubic_spline(1.0 + h) - cubic_spline(1.0)) / h;
        assert!((left - right).abs() < 1e-4);
    }

    #[test]
    fn centered_bump_is_supported_in_its_ball() {
        let g = grid(2, 2.0, 41);
        let width = g.diam_sample() / 4.0;
        let u = SampledFunction::bump(g.clone(), &[0.0, 0.0], width).unwrap();
        for i in 0..g.len() {
            let v = u.value(i);
            assert!((0.0..=1.0).contains(&v));
            if euclid(g.coords(i), &[0.0, 0.0]) >= width {
                assert_eq!(v, 0.0);
            }
        }
        assert!(matches!(SampledFunction::bump(g, &[0.0, 0.0], 0.05), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn bump_family_guards() {
        let g = grid(2, 1.0, 21);
        assert!(matches!(gen_bumps(&g, 3, (0.2, 1.5), 0), Err(Error::WindowTooSmall(_))));
        let fam = gen_bumps(&g, 5, (0.2, 0.5), 0).unwrap();
        assert_eq!(fam.len(), 5);
        for u in &fam {
            let b = u.profile().unwrap();
            assert!(b.center.iter().all(|c| c.abs() <= 1.0 - b.width + 1e-12));
        }
    }

    #[test]
    fn compose_with_identities_keeps_values() {
        let c = build_cantor(1.0 / 3.0, 4, 1).unwrap();
        let sf = Arc::new(snowflake(&c, 0.5).unwrap());
        let c = Arc::new(c);
        let u = random_functions(&sf, 1, 3).pop().unwrap();
        let v = compose(&make_identity(c.clone(), sf.clone()).unwrap(), &u).unwrap();
        assert_eq!(v.values(), u.values());
        assert_eq!(lp_norm(&v, 2.0).unwrap(), lp_norm(&u, 2.0).unwrap());
        let w = random_functions(&c, 1, 4).pop().unwrap();
        assert_eq!(compose(&make_identity(c.clone(), c).unwrap(), &w).unwrap().values(), w.values());
    }

    #[test]
    fn compose_with_sqrt_radial_precomposes_bump() {
        let g = grid(2, 2.0, 65);
        let u = SampledFunction::bump(g.clone(), &[0.0, 0.0], 0.5).unwrap();
        let v = compose(&make_sqrt_radial(g.clone()).unwrap(), &u).unwrap();
        let x = g.nearest_point(&[0.0625, 0.0]).unwrap();
        assert_eq!(g.coords(x), &[0.0625, 0.0]);
        assert!((v.value(x) - u.evaluate_at(&[0.25, 0.0]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn compose_without_closed_form_needs_sample_hits() {
        let g = grid(2, 2.0, 17);
        let u = random_functions(&g, 1, 0).pop().unwrap();
        let m = make_sqrt_radial(g).unwrap();
        assert!(matches!(compose(&m, &u), Err(Error::Evaluation(_))));
    }

    #[test]
    fn function_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid(1, 1.0, 7);
        let u = random_functions(&g, 1, 1).pop().unwrap();
        let p = dir.path().join("u.csv");
        write_function_csv(&u, &p).unwrap();
        assert_eq!(read_function_csv(&p, g.clone()).unwrap().values(), u.values());
        std::fs::write(&p, "id,value\n0,1\n").unwrap();
        assert!(read_function_csv(&p, g).is_err());
    }
}
