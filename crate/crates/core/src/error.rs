use thiserror::Error;

/// Errors raised by the library.
///
/// The variants fall into two broad families which the command-line driver maps onto
/// distinct exit codes: caller mistakes (structural, precondition, domain, argument,
/// configuration) and numerical trouble (ill-conditioning, non-convergence).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("structural error: {0}")]
    Structure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error at {node}: {detail}")]
    Domain { node: String, detail: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ill-conditioned computation at {context}: reciprocal condition {rcond:.3e}")]
    IllConditioned { context: String, rcond: f64 },

    #[error("no convergence in {context}: achieved {achieved:.3e}")]
    Convergence { context: String, achieved: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Coarse classification used for exit codes and triage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Precondition,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Structure(_)
            | Error::Precondition(_)
            | Error::Domain { .. }
            | Error::Argument(_)
            | Error::Config(_) => ErrorClass::Precondition,
            Error::IllConditioned { .. } | Error::Convergence { .. } | Error::Numerical(_) => {
                ErrorClass::Numerical
            }
        }
    }

    pub(crate) fn domain(node: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Domain {
            node: node.into(),
            detail: detail.into(),
        }
    }

    /// Prefix the context of numerical errors, e.g. with a recursion level.
    pub fn with_context(self, prefix: &str) -> Self {
        match self {
            Error::IllConditioned { context, rcond } => Error::IllConditioned {
                context: format!("{prefix}: {context}"),
                rcond,
            },
            Error::Convergence { context, achieved } => Error::Convergence {
                context: format!("{prefix}: {context}"),
                achieved,
            },
            Error::Numerical(msg) => Error::Numerical(format!("{prefix}: {msg}")),
            Error::Domain { node, detail } => Error::Domain {
                node: format!("{prefix}: {node}"),
                detail,
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
