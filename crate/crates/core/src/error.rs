use thiserror::Error;

/// Errors raised by model construction, numerical kernels, and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain of its family.
    #[error("parameter domain violated: {constraint} (got {detail})")]
    Domain {
        constraint: &'static str,
        detail: String,
    },

    /// The model does not provide the requested quantity (e.g. a density).
    #[error("{model} does not provide {what}")]
    Capability { model: String, what: &'static str },

    /// The hazard rate is undefined because G(t) = 1.
    #[error("hazard undefined at t = {t}: G(t) = 1")]
    UndefinedHazard { t: f64 },

    /// The root finder was given an interval without a sign change.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// Adaptive quadrature hit its depth limit.
    #[error("quadrature did not converge; worst subinterval [{a}, {b}] with error estimate {estimate:e}")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    /// Any other numerical failure, with a diagnostic.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The truncated pmf left more mass than the tolerance allows.
    #[error("truncation mass {mass:e} at n_max = {n_max} exceeds {tolerance:e}; increase n_max")]
    Truncation {
        mass: f64,
        n_max: usize,
        tolerance: f64,
    },

    /// The busy-period series was cut off while its terms were still large.
    #[error("series truncated after {terms} terms with last term {last_term:e} > {tolerance:e}; use more terms or a shorter horizon")]
    SeriesTruncation {
        terms: usize,
        last_term: f64,
        tolerance: f64,
    },

    /// Grid functions or curves do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A simulated busy period exceeded the safety horizon.
    #[error("busy period exceeded safety horizon {horizon} in replication {replication}")]
    Runaway { horizon: f64, replication: u64 },
}

impl Error {
    pub(crate) fn domain(constraint: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            constraint,
            detail: detail.into(),
        }
    }

    /// True for errors caused by invalid input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::Capability { .. } | Error::Shape(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
