//! Sampled homeomorphisms and the analyzers that test them.
//!
//! A [`SampledMap`] is either a bijection between two sampled spaces, or an
//! analytic map whose images are computed from a closed form and compared with
//! the euclidean metric of the target. Analytic mode lets the radial stretch be
//! measured far from the origin without sampling its huge image.

mod holder;
mod pairs;
mod qs;
mod ub;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{euclid, Metric, SampledSpace};

pub use holder::{
    check_local_biholder, fit_local_biholder, inverse_params, FitDiagnostics, HolderCheck, HolderFit, HolderParams,
    Violation,
};
pub use qs::{eta, fit_power_qs, qs_ratio_audit, QsAudit, QsFit, QsParams, QS_RATIO_RANGE};
pub use ub::{
    check_uniform_boundedness, check_uniform_boundedness_at, nested_uniform_boundedness, qs_to_holder_constants,
    transfer_ub, NestedUbReport, QsHolderConstants, UbReport, DEFAULT_GROWTH_FACTOR, DEFAULT_RATIO_CAP,
};

/// Closed-form maps of the plane (or of any euclidean sample for `Scaling`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnalyticKind {
    /// `x -> |x| x`
    RadialStretch,
    /// `x -> x |x|^(-1/2)` inside the unit disk, identity outside, `0 -> 0`
    SqrtRadial,
    /// `x -> factor * x`
    Scaling { factor: f64 },
}

impl AnalyticKind {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match *self {
            AnalyticKind::RadialStretch => x.iter().map(|v| norm * v).collect(),
            AnalyticKind::SqrtRadial => {
                if norm == 0.0 || norm >= 1.0 {
                    x.to_vec()
                } else {
                    let scale = norm.sqrt() / norm;
                    x.iter().map(|v| v * scale).collect()
                }
            }
            AnalyticKind::Scaling { factor } => x.iter().map(|v| factor * v).collect(),
        }
    }
}

#[derive(Debug, Clone)]
enum Image {
    Bijection(Vec<usize>),
    Analytic { kind: AnalyticKind, coords: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SampledMap {
    name: String,
    domain: Arc<SampledSpace>,
    codomain: Option<Arc<SampledSpace>>,
    image: Image,
}

impl SampledMap {
    /// Bijection mode: `assignment[i]` is the codomain index of `f(i)`.
    pub fn from_assignment(
        name: impl Into<String>,
        domain: Arc<SampledSpace>,
        codomain: Arc<SampledSpace>,
        assignment: Vec<usize>,
    ) -> Result<Self> {
        if domain.len() != codomain.len() || assignment.len() != domain.len() {
            return Err(Error::Mismatch(format!(
                "bijection needs equal sizes: domain {}, codomain {}, assignment {}",
                domain.len(),
                codomain.len(),
                assignment.len()
            )));
        }
        let mut hit = vec![false; codomain.len()];
        for &j in &assignment {
            if j >= codomain.len() {
                return Err(Error::MissingPoint(j));
            }
            if std::mem::replace(&mut hit[j], true) {
                return Err(Error::Mismatch(format!("codomain point {j} is hit twice")));
            }
        }
        Ok(SampledMap { name: name.into(), domain, codomain: Some(codomain), image: Image::Bijection(assignment) })
    }

    /// Analytic mode over a euclidean domain.
    pub fn analytic(
        name: impl Into<String>,
        domain: Arc<SampledSpace>,
        kind: AnalyticKind,
        codomain: Option<Arc<SampledSpace>>,
    ) -> Result<Self> {
        if !matches!(domain.metric(), Metric::Euclidean) {
            return Err(Error::UnsupportedMode("analytic maps need a euclidean domain".into()));
        }
        let mut coords = Vec::with_capacity(domain.all_coords().len());
        for i in 0..domain.len() {
            coords.extend(kind.apply(domain.coords(i)));
        }
        Ok(SampledMap { name: name.into(), domain, codomain, image: Image::Analytic { kind, coords } })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Arc<SampledSpace> {
        &self.domain
    }

    /// Sampled target space, when one exists.
    pub fn codomain(&self) -> Option<&Arc<SampledSpace>> {
        self.codomain.as_ref()
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        matches!(self.image, Image::Bijection(_))
    }

    pub fn analytic_kind(&self) -> Option<AnalyticKind> {
        match &self.image {
            Image::Analytic { kind, .. } => Some(*kind),
            Image::Bijection(_) => None,
        }
    }

    /// Codomain index of `f(i)` in bijection mode.
    pub fn image_index(&self, i: usize) -> Option<usize> {
        match &self.image {
            Image::Bijection(a) => a.get(i).copied(),
            Image::Analytic { .. } => None,
        }
    }

    /// Ambient coordinates of `f(i)`.
    pub fn image_coords(&self, i: usize) -> Option<&[f64]> {
        match &self.image {
            Image::Analytic { coords, .. } => {
                let d = self.domain.dim();
                coords.get(i * d..(i + 1) * d)
            }
            Image::Bijection(a) => {
                let cod = self.codomain.as_ref()?;
                (cod.dim() > 0).then(|| cod.coords(a[i]))
            }
        }
    }

    /// `d_W(f(i), f(j))`.
    #[inline]
    pub fn image_dist(&self, i: usize, j: usize) -> f64 {
        match &self.image {
            Image::Bijection(a) => self.codomain.as_ref().expect("bijection has a codomain").dist(a[i], a[j]),
            Image::Analytic { coords, .. } => {
                if i == j {
                    return 0.0;
                }
                let d = self.domain.dim();
                euclid(&coords[i * d..(i + 1) * d], &coords[j * d..(j + 1) * d])
            }
        }
    }

    /// Post-composes an analytic map with `y -> factor * y`.
    pub fn scale_codomain(&self, factor: f64) -> Result<SampledMap> {
        crate::error::ensure_positive("factor", factor)?;
        match &self.image {
            Image::Analytic { kind, coords } => Ok(SampledMap {
                name: format!("{factor}*{}", self.name),
                domain: self.domain.clone(),
                codomain: None,
                image: Image::Analytic { kind: *kind, coords: coords.iter().map(|c| c * factor).collect() },
            }),
            Image::Bijection(_) => Err(Error::UnsupportedMode("codomain scaling needs an analytic map".into())),
        }
    }

    /// Diameter of `f(subset)`.
    pub fn image_diam(&self, subset: &[usize]) -> Result<f64> {
        if subset.is_empty() {
            return Err(Error::EmptySet);
        }
        match &self.image {
            Image::Bijection(a) => {
                let imgs: Vec<usize> = subset.iter().map(|&i| a[i]).collect();
                self.codomain.as_ref().expect("bijection has a codomain").diam_of(&imgs)
            }
            Image::Analytic { .. } => {
                let mut best = 0.0f64;
                for (k, &i) in subset.iter().enumerate() {
                    for &j in &subset[k + 1..] {
                        best = best.max(self.image_dist(i, j));
                    }
                }
                Ok(best)
            }
        }
    }
}

fn require_planar_grid(window: &SampledSpace) -> Result<()> {
    if window.dim() != 2 {
        return Err(Error::Dimension { expected: 2, found: window.dim() });
    }
    if !matches!(window.metric(), Metric::Euclidean) {
        return Err(Error::UnsupportedMode("plane maps need a euclidean sample".into()));
    }
    Ok(())
}

/// `f(x) = |x| x` on a planar window.
pub fn make_radial_stretch(window: Arc<SampledSpace>) -> Result<SampledMap> {
    require_planar_grid(&window)?;
    SampledMap::analytic("radial_stretch", window, AnalyticKind::RadialStretch, None)
}

/// `f(x) = x |x|^(-1/2)` for `0 < |x| < 1`, identity elsewhere. When the
/// window is centered at the origin and contains the unit disk, `f` maps it
/// onto itself and the window doubles as the sampled codomain.
pub fn make_sqrt_radial(window: Arc<SampledSpace>) -> Result<SampledMap> {
    require_planar_grid(&window)?;
    let self_map = window.window().is_some_and(|w| w.center.iter().all(|&c| c == 0.0) && w.half_width >= 1.0);
    let codomain = self_map.then(|| window.clone());
    SampledMap::analytic("sqrt_radial", window, AnalyticKind::SqrtRadial, codomain)
}

/// `x -> factor * x`, sampled analytically.
pub fn make_scaling(space: Arc<SampledSpace>, factor: f64) -> Result<SampledMap> {
    crate::error::ensure_positive("factor", factor)?;
    SampledMap::analytic("scaling", space, AnalyticKind::Scaling { factor }, None)
}

/// Identity assignment onto a codomain carrying the same points, e.g. a
/// snowflake of the domain.
pub fn make_identity(space: Arc<SampledSpace>, codomain: Arc<SampledSpace>) -> Result<SampledMap> {
    if !space.same_points(&codomain) {
        return Err(Error::Mismatch("identity needs identical point sets".into()));
    }
    let n = space.len();
    SampledMap::from_assignment("identity", space, codomain, (0..n).collect())
}

/// Swaps domain and codomain of a bijection.
pub fn invert(map: &SampledMap) -> Result<SampledMap> {
    match &map.image {
        Image::Bijection(a) => {
            let mut inv = vec![0; a.len()];
            for (i, &j) in a.iter().enumerate() {
                inv[j] = i;
            }
            Ok(SampledMap {
                name: format!("inverse({})", map.name),
                domain: map.codomain.clone().expect("bijection has a codomain"),
                codomain: Some(map.domain.clone()),
                image: Image::Bijection(inv),
            })
        }
        Image::Analytic { .. } => {
            Err(Error::UnsupportedMode("cannot invert an analytic map without a sampled codomain".into()))
        }
    }
}

/// Reads a bijection from a CSV with header `id,image_id`.
pub fn read_map_csv(path: &Path, domain: Arc<SampledSpace>, codomain: Arc<SampledSpace>) -> Result<SampledMap> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "image_id" {
        return Err(Error::Config(format!("{}: expected header `id,image_id`", path.display())));
    }
    let mut assignment = vec![usize::MAX; domain.len()];
    for record in reader.records() {
        let record = record?;
        let i = domain
            .index_of(&record[0])
            .ok_or_else(|| Error::Resolution { kind: "domain point", name: record[0].to_string() })?;
        let j = codomain
            .index_of(&record[1])
            .ok_or_else(|| Error::Resolution { kind: "codomain point", name: record[1].to_string() })?;
        assignment[i] = j;
    }
    if let Some(i) = assignment.iter().position(|&j| j == usize::MAX) {
        return Err(Error::Mismatch(format!("domain point `{}` has no image", domain.ids()[i])));
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    SampledMap::from_assignment(name, domain, codomain, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_grid, snowflake};

    #[test]
    fn radial_stretch_values() {
        let k = AnalyticKind::RadialStretch;
        assert_eq!(k.apply(&[1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(k.apply(&[2.0, 0.0]), vec![4.0, 0.0]);
    }

    #[test]
    fn radial_stretch_ball_image_grows() {
        let g = Arc::new(build_grid(2, 2.0, 61, &[3.0, 0.0]).unwrap());
        let f = make_radial_stretch(g.clone()).unwrap();
        let c = g.nearest_point(&[3.0, 0.0]).unwrap();
        let ball = g.ball(c, 1.0).unwrap();
        assert!(f.image_diam(&ball).unwrap() >= 7.0);
    }

    #[test]
    fn sqrt_radial_values() {
        let k = AnalyticKind::SqrtRadial;
        assert_eq!(k.apply(&[0.0, 0.0]), vec![0.0, 0.0]);
        let v = k.apply(&[0.25, 0.0]);
        assert!((v[0] - 0.5).abs() < 1e-15 && v[1] == 0.0);
        assert_eq!(k.apply(&[2.0, 0.0]), vec![2.0, 0.0]);
        assert_eq!(k.apply(&[0.0, -1.0]), vec![0.0, -1.0]);
    }

    #[test]
    fn plane_maps_need_two_dimensions() {
        let line = Arc::new(build_grid(1, 1.0, 5, &[]).unwrap());
        assert!(matches!(make_radial_stretch(line.clone()), Err(Error::Dimension { .. })));
        assert!(matches!(make_sqrt_radial(line), Err(Error::Dimension { .. })));
    }

    #[test]
    fn sqrt_radial_codomain_is_window_when_disk_fits() {
        let g = Arc::new(build_grid(2, 4.0, 9, &[]).unwrap());
        assert!(make_sqrt_radial(g).unwrap().codomain().is_some());
        let small = Arc::new(build_grid(2, 0.5, 9, &[]).unwrap());
        assert!(make_sqrt_radial(small).unwrap().codomain().is_none());
    }

    #[test]
    fn identity_preserves_and_snowflakes_distances() {
        let g = Arc::new(build_grid(1, 1.0, 11, &[]).unwrap());
        let id = make_identity(g.clone(), g.clone()).unwrap();
        let sf = make_identity(g.clone(), Arc::new(snowflake(&g, 0.5).unwrap())).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert_eq!(id.image_dist(i, j), g.dist(i, j));
                assert_eq!(sf.image_dist(i, j), g.dist(i, j).powf(0.5));
            }
        }
        let other = Arc::new(build_grid(1, 2.0, 11, &[]).unwrap());
        assert!(matches!(make_identity(g, other), Err(Error::Mismatch(_))));
    }

    #[test]
    fn invert_round_trips() {
        let g = Arc::new(build_grid(1, 1.0, 6, &[]).unwrap());
        let h = Arc::new(snowflake(&g, 0.5).unwrap());
        let m = SampledMap::from_assignment("perm", g.clone(), h, vec![2, 0, 1, 5, 4, 3]).unwrap();
        let back = invert(&invert(&m).unwrap()).unwrap();
        for i in 0..m.len() {
            assert_eq!(back.image_index(i), m.image_index(i));
        }
        let id = make_identity(g.clone(), g.clone()).unwrap();
        let inv = invert(&id).unwrap();
        assert!((0..g.len()).all(|i| inv.image_index(i) == Some(i)));
        let plane = Arc::new(build_grid(2, 1.0, 5, &[]).unwrap());
        assert!(matches!(invert(&make_radial_stretch(plane).unwrap()), Err(Error::UnsupportedMode(_))));
    }

    #[test]
    fn assignment_must_be_injective() {
        let g = Arc::new(build_grid(1, 1.0, 3, &[]).unwrap());
        assert!(SampledMap::from_assignment("bad", g.clone(), g.clone(), vec![0, 0, 1]).is_err());
        assert!(SampledMap::from_assignment("bad", g.clone(), g, vec![0, 1, 7]).is_err());
    }

    #[test]
    fn map_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Arc::new(build_grid(1, 1.0, 4, &[]).unwrap());
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "id,image_id\n0,3\n1,2\n2,1\n3,0\n").unwrap();
        let m = read_map_csv(&p, g.clone(), g.clone()).unwrap();
        assert_eq!(m.image_index(0), Some(3));
        std::fs::write(&p, "id,image_id\n0,3\n").unwrap();
        assert!(read_map_csv(&p, g.clone(), g).is_err());
    }
}
