use thiserror::Error;

/// Errors produced by the analytic and simulation routines.
///
/// Every variant maps onto a stable machine-readable code and a process exit
/// code so that command-line callers can branch on failure class.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violated its domain (negative rate, probability outside
    /// `[0, 1]`, ...).
    #[error("invalid `{field}`: {reason}")]
    Domain { field: String, reason: String },

    /// The queue is saturated: utilization reached `1 - STABILITY_MARGIN`.
    #[error("unstable queue{}: utilization {rho} >= 1", route.as_ref().map(|r| format!(" ({r} route)")).unwrap_or_default())]
    Unstable { rho: f64, route: Option<String> },

    /// No parameter choice can satisfy the requested condition.
    #[error("infeasible: {reason}")]
    Infeasible { reason: String },

    /// The equilibrium scan found no sign change of `theta - Phi(theta)`.
    /// Carries the scanned `(theta, g(theta))` pairs.
    #[error("no fixed point found on the feasible interval ({} scanned points)", scanned.len())]
    NoRoot { scanned: Vec<(f64, f64)> },

    /// The congestion cost is identically zero, so the fixed point sits at
    /// the `theta = 0` boundary where review effort is unbounded.
    #[error("degenerate equilibrium: {reason}")]
    Degenerate { reason: String },

    /// Quadrature did not reach the requested accuracy.
    #[error("quadrature did not converge (error estimate {estimate:e})")]
    Quadrature { estimate: f64 },

    /// Two algebraically equivalent routes disagreed.
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    /// Configuration could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn infeasible(reason: impl Into<String>) -> Self {
        Error::Infeasible {
            reason: reason.into(),
        }
    }

    /// Stable identifier for machine consumption.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "validation",
            Error::Parse { .. } => "parse",
            Error::Unstable { .. } => "unstable",
            Error::Infeasible { .. } => "infeasible",
            Error::NoRoot { .. } => "no_root",
            Error::Degenerate { .. } => "degenerate",
            Error::Quadrature { .. } => "quadrature",
            Error::Inconsistent(_) => "inconsistent",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 2 validation, 3 instability/infeasibility,
    /// 4 solver failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. } | Error::Parse { .. } => 2,
            Error::Unstable { .. } | Error::Infeasible { .. } => 3,
            Error::NoRoot { .. } | Error::Degenerate { .. } | Error::Quadrature { .. } => 4,
            Error::Inconsistent(_) | Error::Io(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(field: &str, value: f64) -> Result<()> {
    ensure_finite(field, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(field: &str, value: f64) -> Result<()> {
    ensure_finite(field, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be >= 0, got {value}")))
    }
}

pub(crate) fn ensure_unit(field: &str, value: f64) -> Result<()> {
    ensure_finite(field, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must lie in [0, 1], got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::domain("lambda", "bad").exit_code(), 2);
        assert_eq!(
            Error::Unstable {
                rho: 1.2,
                route: None
            }
            .exit_code(),
            3
        );
        assert_eq!(Error::infeasible("x").exit_code(), 3);
        assert_eq!(Error::NoRoot { scanned: vec![] }.exit_code(), 4);
    }

    #[test]
    fn unstable_message_names_route() {
        let e = Error::Unstable {
            rho: 1.02,
            route: Some("ai".into()),
        };
        assert!(e.to_string().contains("ai route"));
    }
}
