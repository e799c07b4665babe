use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single violated admissibility condition on the channel/wave parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationFailure {
    #[error("wave direction: Fcal must be negative (got {0})")]
    WaveDirection(f64),
    #[error("ellipticity: -sigma = {neg_sigma} exceeds kappa*m_tilde*A = {bound}")]
    Ellipticity { neg_sigma: f64, bound: f64 },
    #[error("depth ordering: need 0 < mu < d (mu = {mu}, d = {d})")]
    DepthOrdering { mu: f64, d: f64 },
    #[error("bathymetry decay: nu must be positive (got {0})")]
    Decay(f64),
    #[error("amplitude bound: Mcal must be positive (got {0})")]
    AmplitudeBound(f64),
    #[error("analyticity width: rho must lie in (0, 1/2] (got {0})")]
    Width(f64),
    #[error("majorant threshold: L(mu) = {0} exceeds 1/2")]
    MajorantThreshold(f64),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("validation failed: {}", join(.0))]
    Validation(Vec<ValidationFailure>),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("bathymetry error: {0}")]
    Bathymetry(String),
    #[error("solver refused: {0}")]
    Solver(String),
    #[error("mode ({m}, {n}) at order {order}: {source}")]
    Mode {
        m: i32,
        n: i32,
        order: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("hierarchy diverged: contraction ratios {ratios:?}")]
    Divergence { ratios: Vec<f64> },
    #[error("symmetry violation: {0}")]
    Symmetry(String),
    #[error("normal form error: {0}")]
    NormalForm(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(items: &[ValidationFailure]) -> String {
    items
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
