use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("function evaluated to a non-finite value at x = {x}")]
    NonFiniteEvaluation { x: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error(
        "iteration diverged at step {iteration} (energy {energy}); reduce the step size \
         (currently {step:e}, stable steps are below ~0.3 h^2)"
    )]
    Divergence {
        iteration: usize,
        energy: f64,
        step: f64,
    },

    #[error(
        "shrinkage threshold {threshold:e} removed the whole profile at iteration {iteration}; \
         reduce the step size or widen the grid"
    )]
    DegenerateThreshold { iteration: usize, threshold: f64 },

    #[error("energy increased persistently (relative {relative:e}) up to iteration {iteration}")]
    EnergyIncrease { iteration: usize, relative: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}
