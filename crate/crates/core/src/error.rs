use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("angle {theta} outside the potential domain (-pi, pi)")]
    Domain { theta: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("closure residual ({cos:.3e}, {sin:.3e}) exceeds tolerance {tol:.3e}")]
    ConstraintViolation { cos: f64, sin: f64, tol: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("unsupported winding number {0} (only 1 is supported)")]
    UnsupportedWinding(i64),
    #[error("fold-back at link {index}: increment of exactly pi has no branch")]
    Branch { index: usize },
    #[error("not admissible: {0}")]
    Admissibility(String),
    #[error("inflation singular at s = {s}: 1 + h theta' <= 0 for h = {h}")]
    InflationSingular { s: f64, h: f64 },
    #[error("chord root not bracketed after parameter {start} (step {index})")]
    Marching { index: usize, start: f64 },
    #[error("inscription bracket has no sign change: overshoot(lo) = {lo}, overshoot(hi) = {hi}")]
    InscriptionBracket { lo: f64, hi: f64 },
    #[error("overshoot is not monotone in h near h = {h}")]
    NonMonotoneDefect { h: f64 },
    #[error("structure error: {0}")]
    Structure(String),
    #[error("variant construction failed: {0}")]
    VariantConstruction(String),
    #[error("H1 budget {delta:.3e} unachievable; best distance {achieved:.3e}")]
    Budget { achieved: f64, delta: f64 },
    #[error("closure projection failed; residual {residual:.3e}")]
    Projection { residual: f64 },
    #[error("line search failed: {0}")]
    Step(String),
    #[error("constraint drift {residual:.3e} after feasibility projection")]
    ProjectionDrift { residual: f64 },
    #[error("unknown potential '{0}'")]
    UnknownPotential(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
