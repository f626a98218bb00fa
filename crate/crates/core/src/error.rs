use thiserror::Error;

/// Errors produced by the analytic pipeline and the simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("{stage}: no convergence after {iterations} iterations ({detail})")]
    NoConvergence {
        stage: String,
        iterations: usize,
        detail: String,
    },

    #[error("{stage}: fixed-point map is not bracketed on [{lo}, {hi}] (g(lo)={g_lo:e}, g(hi)={g_hi:e})")]
    NotBracketed {
        stage: String,
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error(
        "quadrature failed on [{a}, {b}]: estimated error {error:e} after {intervals} subintervals"
    )]
    Quadrature {
        a: f64,
        b: f64,
        error: f64,
        intervals: usize,
    },

    #[error("state space has more than {cap} states")]
    StateSpaceTooLarge { cap: usize },

    #[error("demand grid resolution {resolution} is too coarse for demand {demand}")]
    GridTooCoarse { resolution: f64, demand: f64 },

    #[error("no sign change of {what} on [{lo}, {hi}]")]
    NoSignChange { what: String, lo: f64, hi: f64 },

    #[error("too few {class} samples ({count}) to form an estimate")]
    InsufficientSamples { class: String, count: u64 },

    #[error("energy efficiency undefined: activity factor is zero")]
    UndefinedEfficiency,

    #[error("warm-up too short: occupancy drift t-statistic {t_stat:.2} after discarding {warmup_fraction}")]
    NonStationary { t_stat: f64, warmup_fraction: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParameter { .. } => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, field: &str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(field, reason()))
    }
}
