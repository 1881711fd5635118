//! Command-level errors and their exit codes.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::ann::AnnError;
use crate::corpus::CorpusError;
use crate::features::VocabularyError;
use crate::ingest::IngestError;
use crate::keywords::KeywordError;
use crate::model::ModelError;
use crate::obfuscate::ObfuscationError;
use crate::search::{EvalError, SearchError};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or insufficient input data.
    #[error("{0}")]
    Data(String),
    /// A bug or broken invariant.
    #[error("{0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    kind: &'a str,
    exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    /// One-line JSON rendering for the diagnostic stream.
    pub fn to_line(&self) -> String {
        let message = self.to_string().replace('\n', " ");
        serde_json::to_string(&ErrorLine {
            error: &message,
            kind: self.kind(),
            exit_code: self.exit_code(),
        })
        .expect("error line serializes")
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(IngestError, CorpusError, ModelError, SearchError, KeywordError, ObfuscationError, AnnError, VocabularyError);

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::MetricInvariant { .. } => CliError::Internal(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}
