//! Fitting, applying and persisting the per-system search models.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ann::{self, AnnError, NetworkParams, TrainingConfig, TrainingSample};
use crate::features::{FeatureOptions, InstructionVocabulary};
use crate::pca::{fit_pca, PcaError, PcaModel};
use crate::search::{build_index, RankedResult, SearchError, SearchIndex, System};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("only {available} training apps but {required} principal components were requested")]
    InsufficientFold { available: usize, required: usize },
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Ann(#[from] AnnError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("model format_version {found} is not supported (expected {MODEL_FORMAT_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("model was built for vocabulary {model} but the active vocabulary is {active}")]
    VocabularyMismatch { model: String, active: String },
    #[error("model file is malformed: {0}")]
    Malformed(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("feature vector has length {actual}, model expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Everything that shapes a trained model besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Number of principal components kept.
    pub components: usize,
    pub training: TrainingConfig,
    pub features: FeatureOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            components: 32,
            training: TrainingConfig::default(),
            features: FeatureOptions::default(),
        }
    }
}

/// Feature vectors of one app and its obfuscated counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub app_id: String,
    pub original: Vec<f64>,
    pub obfuscated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub corpus_fingerprint: String,
    pub training_pairs: usize,
    pub input_dim: usize,
    pub output_activation: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub vocabulary_fingerprint: String,
    pub system: System,
    pub config: PipelineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkParams>,
    #[serde(default)]
    pub loss_history: Vec<f64>,
    pub metadata: ModelMetadata,
}

/// Order-sensitive digest of the training pairs.
pub fn corpus_fingerprint(pairs: &[PairFeatures]) -> String {
    let mut hasher = Sha256::new();
    for p in pairs {
        hasher.update((p.app_id.len() as u64).to_le_bytes());
        hasher.update(p.app_id.as_bytes());
        for v in p.original.iter().chain(&p.obfuscated) {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(&hasher.finalize()[..16])
}

/// Both members of every pair get the original's projection as target.
pub fn build_samples(
    pairs: &[PairFeatures],
    pca: &PcaModel,
    config: &TrainingConfig,
) -> Result<Vec<TrainingSample>, ModelError> {
    let mut samples = Vec::with_capacity(2 * pairs.len());
    for p in pairs {
        let target = pca.project(&p.original)?;
        for input in [&p.original, &p.obfuscated] {
            samples.push(TrainingSample {
                input: config.input_scaling.apply(input),
                target: target.clone(),
            });
        }
    }
    Ok(samples)
}

fn check_dims(pairs: &[PairFeatures]) -> Result<usize, ModelError> {
    let n = pairs.first().map_or(0, |p| p.original.len());
    for p in pairs {
        for v in [&p.original, &p.obfuscated] {
            if v.len() != n {
                return Err(ModelError::DimensionMismatch {
                    expected: n,
                    actual: v.len(),
                });
            }
        }
    }
    Ok(n)
}

/// Fits the model for one system on training pairs.
pub fn fit_model(
    pairs: &[PairFeatures],
    system: System,
    config: &PipelineConfig,
    vocabulary_fingerprint: &str,
) -> Result<TrainedModel, ModelError> {
    let input_dim = check_dims(pairs)?;
    if system != System::Naive && pairs.len() < config.components {
        return Err(ModelError::InsufficientFold {
            available: pairs.len(),
            required: config.components,
        });
    }
    let mut warnings = Vec::new();
    let mut pca = None;
    let mut network = None;
    let mut loss_history = Vec::new();
    match system {
        System::Naive => {}
        System::PurePca => {
            let rows: Vec<Vec<f64>> = pairs
                .iter()
                .flat_map(|p| [p.original.clone(), p.obfuscated.clone()])
                .collect();
            pca = Some(fit_pca(&rows, config.components)?);
        }
        System::Macneto => {
            let rows: Vec<Vec<f64>> = pairs.iter().map(|p| p.original.clone()).collect();
            let model = fit_pca(&rows, config.components)?;
            let samples = build_samples(pairs, &model, &config.training)?;
            let outcome = ann::train(&samples, &config.training)?;
            network = Some(outcome.params);
            loss_history = outcome.loss_history;
            pca = Some(model);
        }
    }
    if let Some(p) = &pca {
        warnings.extend(p.warnings.iter().cloned());
    }
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        vocabulary_fingerprint: vocabulary_fingerprint.to_string(),
        system,
        config: config.clone(),
        pca,
        network,
        loss_history,
        metadata: ModelMetadata {
            seed: config.training.seed,
            corpus_fingerprint: corpus_fingerprint(pairs),
            training_pairs: pairs.len(),
            input_dim,
            output_activation: "linear".into(),
            warnings,
        },
    })
}

impl TrainedModel {
    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.metadata.input_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.metadata.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn pca(&self) -> Result<&PcaModel, ModelError> {
        self.pca
            .as_ref()
            .ok_or_else(|| ModelError::Malformed(format!("{} model has no principal components", self.system)))
    }

    /// Vector stored in the search index for an un-obfuscated app.
    pub fn embed_indexed(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(features)?;
        match self.system {
            System::Naive => Ok(features.to_vec()),
            System::PurePca | System::Macneto => Ok(self.pca()?.project(features)?),
        }
    }

    /// Vector used to query the index for a possibly obfuscated app.
    pub fn embed_query(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(features)?;
        match self.system {
            System::Naive => Ok(features.to_vec()),
            System::PurePca => Ok(self.pca()?.project(features)?),
            System::Macneto => {
                let network = self
                    .network
                    .as_ref()
                    .ok_or_else(|| ModelError::Malformed("macneto model has no network".into()))?;
                Ok(network.forward(&self.config.training.input_scaling.apply(features)))
            }
        }
    }

    /// Indexes un-obfuscated apps in this model's vector space.
    pub fn build_index(&self, apps: &[(String, Vec<f64>)]) -> Result<SearchIndex, ModelError> {
        let entries = apps
            .iter()
            .map(|(id, f)| Ok((id.clone(), self.embed_indexed(f)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(build_index(entries, self.system)?)
    }

    pub fn query(&self, index: &SearchIndex, features: &[f64], n: usize) -> Result<RankedResult, ModelError> {
        Ok(index.search(&self.embed_query(features)?, n)?)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        text
    }

    /// Parses a model, failing closed on unknown versions and on a
    /// vocabulary other than `vocab`.
    pub fn from_json(text: &str, vocab: &InstructionVocabulary) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelError::Malformed("missing format_version".into()))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(ModelError::UnsupportedVersion { found: version });
        }
        let model: TrainedModel =
            serde_json::from_value(value).map_err(|e| ModelError::Malformed(e.to_string()))?;
        if model.vocabulary_fingerprint != vocab.fingerprint() {
            return Err(ModelError::VocabularyMismatch {
                model: model.vocabulary_fingerprint,
                active: vocab.fingerprint().to_string(),
            });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json()).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path, vocab: &InstructionVocabulary) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairs(count: usize, n: usize) -> Vec<PairFeatures> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        (0..count)
            .map(|i| {
                let original: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
                let obfuscated = original.iter().map(|v| v + rng.random_range(0..3) as f64).collect();
                PairFeatures {
                    app_id: format!("app{i:02}"),
                    original,
                    obfuscated,
                }
            })
            .collect()
    }

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            components: 4,
            training: TrainingConfig {
                epochs: 5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn insufficient_apps() {
        let err = fit_model(&pairs(3, 6), System::Macneto, &small_config(), "v").unwrap_err();
        assert!(matches!(err, ModelError::InsufficientFold { available: 3, required: 4 }));
        assert!(fit_model(&pairs(3, 6), System::Naive, &small_config(), "v").is_ok());
    }

    #[test]
    fn macneto_model_round_trips() {
        let vocab = InstructionVocabulary::default_vocabulary();
        let data = pairs(10, 8);
        let model = fit_model(&data, System::Macneto, &small_config(), vocab.fingerprint()).unwrap();
        assert_eq!(model.loss_history.len(), 5);
        assert!(model.loss_history.iter().all(|l| l.is_finite()));
        let back = TrainedModel::from_json(&model.to_json(), &vocab).unwrap();
        assert_eq!(back, model);
        assert_eq!(model.embed_query(&data[0].original).unwrap().len(), 4);
    }

    #[test]
    fn load_fails_closed() {
        let vocab = InstructionVocabulary::default_vocabulary();
        let model = fit_model(&pairs(5, 6), System::Naive, &small_config(), "other").unwrap();
        assert!(matches!(
            TrainedModel::from_json(&model.to_json(), &vocab),
            Err(ModelError::VocabularyMismatch { .. })
        ));
        let bumped = model.to_json().replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(
            TrainedModel::from_json(&bumped, &vocab),
            Err(ModelError::UnsupportedVersion { found: 2 })
        ));
    }

    #[test]
    fn samples_share_targets() {
        let data = pairs(6, 5);
        let rows: Vec<Vec<f64>> = data.iter().map(|p| p.original.clone()).collect();
        let pca = fit_pca(&rows, 3).unwrap();
        let samples = build_samples(&data, &pca, &TrainingConfig::default()).unwrap();
        assert_eq!(samples.len(), 12);
        for pair in samples.chunks(2) {
            assert_eq!(pair[0].target, pair[1].target);
        }
    }

    #[test]
    fn naive_query_of_indexed_app_is_exact() {
        let data = pairs(6, 5);
        let model = fit_model(&data, System::Naive, &small_config(), "v").unwrap();
        let apps: Vec<(String, Vec<f64>)> = data.iter().map(|p| (p.app_id.clone(), p.original.clone())).collect();
        let index = model.build_index(&apps).unwrap();
        let r = model.query(&index, &data[2].original, 3).unwrap();
        assert_eq!(r.hits[0].app_id, "app02");
        assert!((r.hits[0].similarity - 1.0).abs() < 1e-12);
    }
}
