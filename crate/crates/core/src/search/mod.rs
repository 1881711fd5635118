//! Cosine search over indexed apps and the k-fold evaluation protocol.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod eval;
pub mod index;
pub mod metrics;

pub use eval::{kfold_evaluate, split_folds, CorpusSplit, EvalConfig, EvalError, EvaluationReport, SystemMetrics};
pub use index::{best, build_index, cosine, search, Hit, RankedResult, SearchIndex};
pub use metrics::{mrr, summarize_ranks, top_at_k, RankSummary};

use crate::model::{ModelError, TrainedModel};

/// The three compared retrieval systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    /// Learned network output compared against projected originals.
    Macneto,
    /// Principal component projection of both sides.
    PurePca,
    /// Raw instruction distributions.
    Naive,
}

impl System {
    pub const ALL: [System; 3] = [System::Macneto, System::PurePca, System::Naive];

    pub fn name(self) -> &'static str {
        match self {
            System::Macneto => "macneto",
            System::PurePca => "pure_pca",
            System::Naive => "naive",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "macneto" => Ok(System::Macneto),
            "pure_pca" | "pure-pca" | "pca" => Ok(System::PurePca),
            "naive" => Ok(System::Naive),
            other => Err(format!("unknown system `{other}` (expected macneto, pure-pca or naive)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("cannot build an index over zero apps")]
    EmptyCorpus,
    #[error("app `{0}` appears twice in the index")]
    DuplicateAppId(String),
    #[error("vector has length {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector for `{0}` contains a non-finite value")]
    NonFinite(String),
}

/// Infers the query's principal component vector with the model's network
/// and ranks the index against it.
pub fn query_macneto(
    model: &TrainedModel,
    index: &SearchIndex,
    features: &[f64],
    n: usize,
) -> Result<RankedResult, ModelError> {
    model.query(index, features, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_names() {
        for s in System::ALL {
            assert_eq!(s.name().parse::<System>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert_eq!("pure-pca".parse::<System>().unwrap(), System::PurePca);
        assert!("other".parse::<System>().is_err());
    }
}
