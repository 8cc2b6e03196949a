use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{routine} did not converge (a = {a}, b = {b}, p = {p})")]
    NonConvergence {
        routine: &'static str,
        a: f64,
        b: f64,
        p: f64,
    },

    #[error("special-function failure in block [{start}, {end}) of a path of size {m}: {source}")]
    Coupling {
        m: usize,
        start: usize,
        end: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty supremum domain: {0}")]
    EmptyDomain(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
