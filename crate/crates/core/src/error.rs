use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter failed validation. `field` names the offending key.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    /// A function was evaluated outside its domain (e.g. negative time).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    /// The comparator never fired within the search horizon.
    #[error("no comparator crossing within {t_max:e} s{}", cycle.map(|n| format!(" (cycle {n})")).unwrap_or_default())]
    NoCrossing { t_max: f64, cycle: Option<u64> },

    #[error("infeasible operating point: {0}")]
    Infeasible(String),

    /// The filtered sense is not increasing at the crossing.
    #[error("non-monotone crossing: loop slope {slope:e} <= 0")]
    NonMonotone { slope: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid { .. } | Error::Parse(_) | Error::Io(_))
    }

    pub(crate) fn at_cycle(self, n: u64) -> Self {
        match self {
            Error::NoCrossing { t_max, .. } => Error::NoCrossing {
                t_max,
                cycle: Some(n),
            },
            other => other,
        }
    }
}
