use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate dialogue id `{0}`")]
    DuplicateDialogue(String),

    #[error("catalog is empty")]
    EmptyCatalog,

    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("invalid dialogue `{id}`: {reason}")]
    InvalidDialogue { id: String, reason: String },

    #[error("dialogue `{0}` has no episode indices; use the accept-boundary policy")]
    MissingEpisodes(String),

    #[error("invalid threshold policy: {0}")]
    InvalidPolicy(String),

    #[error("run references unknown dialogue turns: {}", .0.join(", "))]
    UnknownRunEntries(Vec<String>),

    #[error("invalid run: {0}")]
    InvalidRun(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("synthetic pool is empty")]
    EmptyPool,

    #[error("invalid synthetic pool: {0}")]
    InvalidPool(String),

    #[error("plan references unknown dialogue `{0}`")]
    UnknownPlanDialogue(String),

    #[error("plan invariant violated: {0}")]
    PlanInvariant(String),

    #[error("template error: {0}")]
    Template(String),

    #[error(transparent)]
    Backend(#[from] crate::synthgen::BackendError),

    #[error("no synthetic dialogue was accepted ({0} items attempted)")]
    NoDialoguesAccepted(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
