use std::path::PathBuf;

use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::corpus::CorpusError;
use crate::metrics::MetricsError;
use crate::promptgen::PromptError;
use crate::sampler::SamplerError;
use crate::taxonomy::TaxonomyError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error. Module errors convert into it; the CLI maps it to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("backend failure budget exceeded: {failed} of {requested} requests failed")]
    FailureBudget { failed: u64, requested: u64 },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 1 usage/config, 2 data validation, 3 backend failure budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Sampler(SamplerError::InvalidConfig(_)) => 1,
            Error::FailureBudget { .. } => 3,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e.into()),
        })
    }
}
