use thiserror::Error;

/// Errors raised by builders, analyzers and the batch runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid resolution {0}: need at least 2 points per axis")]
    InvalidResolution(usize),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("snowflake exponent {0} outside (0, 1]")]
    InvalidExponent(f64),
    #[error("point budget exceeded: {requested} points requested, limit is {limit}")]
    BudgetExceeded { requested: u128, limit: usize },
    #[error("unknown point {0}")]
    MissingPoint(usize),
    #[error("subset is empty")]
    EmptySet,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("no sampled point in the annulus [{lower}, {upper}) around point {center}")]
    WitnessNotFound { center: usize, lower: f64, upper: f64 },
    #[error("invalid radius {radius}: {reason}")]
    InvalidRadius { radius: f64, reason: String },
    #[error("expected a {expected}-dimensional space, got dimension {found}")]
    Dimension { expected: usize, found: usize },
    #[error("point sets do not match: {0}")]
    Mismatch(String),
    #[error("no sampled pair closer than r = {0}")]
    InsufficientPairs(f64),
    #[error("degenerate map: {0}")]
    DegenerateMap(String),
    #[error("codomain distance vanishes on distinct points {0} and {1}")]
    NonInjective(usize, usize),
    #[error("no admissible centers at distance >= {0} from the window boundary")]
    WindowTooSmall(f64),
    #[error("unsupported map mode: {0}")]
    UnsupportedMode(String),
    #[error("duplicate points {0} and {1} at distance zero")]
    DuplicatePoint(usize, usize),
    #[error("every scale lies below the sample resolution {0}")]
    EmptyScale(f64),
    #[error("cannot evaluate function at image of point {0}")]
    Evaluation(usize),
    #[error("function family is empty")]
    EmptyFamily,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("cannot resolve {kind} `{name}`")]
    Resolution { kind: &'static str, name: String },
    #[error("analysis `{name}` failed: {source}")]
    Analysis {
        name: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("expected a finite positive value, got {value}") })
    }
}
