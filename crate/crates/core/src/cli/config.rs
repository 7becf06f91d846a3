use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::besov::{DiscretizationParams, SeminormMode, StudyMode};
use crate::mapping::{HolderParams, QsParams, DEFAULT_GROWTH_FACTOR, DEFAULT_RATIO_CAP};

pub const SCHEMA: u32 = 1;

/// A batch run: named spaces, maps and function families, and the analyses
/// to perform on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub sampling: Sampling,
    /// Adds wall time to embedding reports, which then differ between runs.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub spaces: BTreeMap<String, SpaceSpec>,
    #[serde(default)]
    pub maps: BTreeMap<String, MapSpec>,
    #[serde(default)]
    pub families: BTreeMap<String, FamilySpec>,
    pub analyses: Vec<AnalysisSpec>,
}

/// Pair and triple budgets shared by the analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Exact,
    Budget(usize),
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Budget(200_000)
    }
}

impl Sampling {
    pub fn pairs(self) -> usize {
        match self {
            Sampling::Exact => usize::MAX,
            Sampling::Budget(n) => n,
        }
    }

    pub fn seminorm(self) -> SeminormMode {
        match self {
            Sampling::Exact => SeminormMode::Exact,
            Sampling::Budget(n) => SeminormMode::Budget(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Grid {
        dim: usize,
        half_width: f64,
        resolution: usize,
        #[serde(default)]
        offset: Vec<f64>,
    },
    Cantor {
        ratio: f64,
        depth: usize,
        dim: usize,
    },
    Snowflake {
        base: String,
        epsilon: f64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        metric_path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    RadialStretch { domain: String },
    SqrtRadial { domain: String },
    Scaling { domain: String, factor: f64 },
    Identity { domain: String, codomain: String },
    Csv { path: PathBuf, domain: String, codomain: String },
    Inverse { of: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Bumps {
        space: String,
        count: usize,
        width_range: (f64, f64),
        #[serde(default)]
        seed: Option<u64>,
    },
    Random {
        space: String,
        count: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Csv {
        space: String,
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    /// Also the report file stem.
    pub name: String,
    #[serde(default = "default_mode")]
    pub mode: StudyMode,
    #[serde(flatten)]
    pub kind: AnalysisKind,
}

fn default_mode() -> StudyMode {
    StudyMode::Explore
}

/// Relative slack on bounds that come from continuum arguments.
fn default_tolerance() -> f64 {
    0.05
}

fn default_ratio_cap() -> f64 {
    DEFAULT_RATIO_CAP
}

fn default_growth() -> f64 {
    DEFAULT_GROWTH_FACTOR
}

fn default_centers() -> usize {
    200
}

fn default_triples() -> usize {
    2000
}

fn default_theta_grid() -> Vec<f64> {
    (0..=40).map(|k| 1.0 + 0.05 * k as f64).collect()
}

fn default_kappa_grid() -> Vec<f64> {
    vec![1.5, 2.0, 3.0, 4.0, 8.0, 16.0]
}

fn default_probes() -> usize {
    500
}

/// Exponents and radius of a map without a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub theta1: f64,
    pub theta2: f64,
    pub r: f64,
}

/// One `(s, p)` pair; `s_prime` defaults to the admissible maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothnessPoint {
    pub s: f64,
    pub p: f64,
    #[serde(default)]
    pub s_prime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "analysis", rename_all = "snake_case")]
pub enum AnalysisKind {
    Regularity {
        space: String,
        #[serde(default = "default_centers")]
        n_centers: usize,
        #[serde(default = "n_radii")]
        n_radii: usize,
        #[serde(default)]
        expect_q: Option<f64>,
        /// Absolute.
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    Perfectness {
        space: String,
        #[serde(default = "default_kappa_grid")]
        kappa_grid: Vec<f64>,
        #[serde(default = "default_probes")]
        n_probes: usize,
    },
    UniformBoundedness {
        map: String,
        r: f64,
        #[serde(default = "default_centers")]
        n_centers: usize,
        /// Explicit centers, snapped to the nearest sample point.
        #[serde(default)]
        centers: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_ratio_cap")]
        ratio_cap: f64,
        #[serde(default)]
        a_min: Option<f64>,
        #[serde(default)]
        b_min: Option<f64>,
        #[serde(default)]
        b_max: Option<f64>,
        #[serde(default)]
        expect_verdict: Option<bool>,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    NestedUniformBoundedness {
        maps: Vec<String>,
        r: f64,
        #[serde(default = "default_centers")]
        n_centers: usize,
        #[serde(default = "default_growth")]
        growth_factor: f64,
        #[serde(default)]
        expect_verdict: Option<bool>,
    },
    HolderFit {
        map: String,
        r: f64,
        #[serde(default)]
        n_pairs: Option<usize>,
        #[serde(default)]
        theta1_range: Option<(f64, f64)>,
        #[serde(default)]
        theta2_range: Option<(f64, f64)>,
    },
    HolderCheck {
        map: String,
        params: HolderParams,
        #[serde(default)]
        n_pairs: Option<usize>,
    },
    /// Fits the map and its inverse and compares the inverse fit with the
    /// parameters predicted from the forward one.
    HolderRoundtrip {
        map: String,
        r: f64,
        #[serde(default)]
        n_pairs: Option<usize>,
        /// Relative, on the exponents.
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    QsFit {
        map: String,
        #[serde(default = "default_theta_grid")]
        theta_grid: Vec<f64>,
        #[serde(default = "default_triples")]
        n_triples: usize,
    },
    QsAudit {
        map: String,
        params: QsParams,
        #[serde(default = "default_triples")]
        n_triples: usize,
    },
    /// Measures uniform bounds, a power gauge and the perfectness constant,
    /// derives biHölder parameters from them and checks those on the map.
    QsToHolder {
        map: String,
        r: f64,
        #[serde(default)]
        kappa: Option<f64>,
        #[serde(default = "default_kappa_grid")]
        kappa_grid: Vec<f64>,
        #[serde(default = "default_theta_grid")]
        theta_grid: Vec<f64>,
        #[serde(default = "default_centers")]
        n_centers: usize,
        #[serde(default = "default_triples")]
        n_triples: usize,
        #[serde(default)]
        n_pairs: Option<usize>,
    },
    LpEmbedding {
        map: String,
        family: String,
        p: f64,
        #[serde(default)]
        max_ratio: Option<f64>,
    },
    Embedding {
        map: String,
        family: String,
        points: Vec<SmoothnessPoint>,
        holder: Exponents,
        q_z: f64,
        q_w: f64,
        #[serde(default)]
        disc: Option<DiscretizationParams>,
        #[serde(default)]
        seminorm: bool,
        #[serde(default)]
        max_sup_ratio: Option<f64>,
        #[serde(default)]
        expect_seminorm_ratio: Option<f64>,
        /// Relative, on the seminorm ratio.
        #[serde(default = "seminorm_tolerance")]
        tolerance: f64,
    },
    /// Multiscale scale part against the exact seminorm, one row per family.
    Equivalence {
        families: Vec<String>,
        s: f64,
        p: f64,
        /// Largest scale bound; the sample diameter by default.
        #[serde(default)]
        r: Option<f64>,
        #[serde(default)]
        max_k_variation: Option<f64>,
    },
}

fn n_radii() -> usize {
    16
}

fn seminorm_tolerance() -> f64 {
    1e-10
}
