//! Pairing loaded apps with their obfuscated counterparts and writing
//! generated corpora to disk.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::features::{FeatureOptions, InstructionVocabulary};
use crate::ingest::{write_textual_app, AppModel, CorpusManifest, IngestError, ManifestEntry};
use crate::model::PairFeatures;
use crate::synth::SynthPair;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("app `{app}` pairs with `{target}`, which is not in the corpus")]
    MissingOriginal { app: String, target: String },
    #[error("app `{0}` has more than one obfuscated counterpart")]
    DuplicatePair(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// `(original, obfuscated)` index pairs in corpus order of the obfuscated app.
pub fn pair_indices(apps: &[AppModel]) -> Result<Vec<(usize, usize)>, CorpusError> {
    let by_id: HashMap<&str, usize> = apps.iter().enumerate().map(|(i, a)| (a.app_id.as_str(), i)).collect();
    let mut seen = HashMap::new();
    let mut pairs = Vec::new();
    for (i, app) in apps.iter().enumerate() {
        let Some(target) = &app.pair_of else { continue };
        let &orig = by_id.get(target.as_str()).ok_or_else(|| CorpusError::MissingOriginal {
            app: app.app_id.clone(),
            target: target.clone(),
        })?;
        if seen.insert(orig, i).is_some() {
            return Err(CorpusError::DuplicatePair(target.clone()));
        }
        pairs.push((orig, i));
    }
    Ok(pairs)
}

/// Feature vectors for every pair, keyed by the original's id.
pub fn pair_features(
    apps: &[AppModel],
    options: &FeatureOptions,
    vocab: &InstructionVocabulary,
) -> Result<Vec<PairFeatures>, CorpusError> {
    let pairs = pair_indices(apps)?;
    Ok(pairs
        .par_iter()
        .map(|&(o, b)| PairFeatures {
            app_id: apps[o].app_id.clone(),
            original: options.extract(&apps[o], vocab),
            obfuscated: options.extract(&apps[b], vocab),
        })
        .collect())
}

/// Features computed directly from generated pairs.
pub fn synth_features(pairs: &[SynthPair], options: &FeatureOptions, vocab: &InstructionVocabulary) -> Vec<PairFeatures> {
    pairs
        .par_iter()
        .map(|p| PairFeatures {
            app_id: p.original.app_id.clone(),
            original: options.extract(&p.original, vocab),
            obfuscated: options.extract(&p.obfuscated, vocab),
        })
        .collect()
}

fn write(path: &Path, text: &str) -> Result<(), IngestError> {
    fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes every app as a textual record under `dir/apps`, descriptions under
/// `dir/descriptions`, and a `manifest.json` that links the pairs. Returns
/// the manifest path.
pub fn write_synth_corpus(
    pairs: &[SynthPair],
    dir: &Path,
    corpus_id: &str,
    vocab: &InstructionVocabulary,
) -> Result<PathBuf, IngestError> {
    for sub in ["apps", "descriptions"] {
        let path = dir.join(sub);
        fs::create_dir_all(&path).map_err(|source| IngestError::Io { path, source })?;
    }
    let mut manifest = CorpusManifest::new(corpus_id);
    for p in pairs {
        for app in [&p.original, &p.obfuscated] {
            let source_path = PathBuf::from("apps").join(format!("{}.txt", app.app_id));
            write(&dir.join(&source_path), &write_textual_app(app, vocab))?;
            let description_path = match &app.description {
                Some(d) => {
                    let path = PathBuf::from("descriptions").join(format!("{}.txt", app.app_id));
                    write(&dir.join(&path), d)?;
                    Some(path)
                }
                None => None,
            };
            manifest.apps.push(ManifestEntry {
                app_id: app.app_id.clone(),
                source_path,
                description_path,
                pair_of: app.pair_of.clone(),
            });
        }
    }
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_corpus, Provenance};
    use crate::synth::{generate_corpus, SynthConfig};

    #[test]
    fn round_trip_through_disk() {
        let vocab = InstructionVocabulary::default_vocabulary();
        let pairs = generate_corpus(4, &SynthConfig::default(), &vocab).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_synth_corpus(&pairs, dir.path(), "t", &vocab).unwrap();
        let apps = load_corpus(&manifest, &vocab).unwrap();
        assert_eq!(apps.len(), 8);
        let opts = FeatureOptions::default();
        let from_disk = pair_features(&apps, &opts, &vocab).unwrap();
        assert_eq!(from_disk, synth_features(&pairs, &opts, &vocab));
        assert_eq!(apps[0].description, pairs[0].original.description);
    }

    #[test]
    fn missing_and_duplicate_pairs() {
        let mut a = AppModel::new("a", Provenance::Synthetic);
        let mut b = AppModel::new("b", Provenance::Synthetic);
        b.pair_of = Some("x".into());
        assert!(matches!(pair_indices(&[a.clone(), b.clone()]), Err(CorpusError::MissingOriginal { .. })));
        b.pair_of = Some("a".into());
        let mut c = b.clone();
        c.app_id = "c".into();
        assert_eq!(pair_indices(&[a.clone(), b.clone()]).unwrap(), [(0, 1)]);
        assert!(matches!(pair_indices(&[a.clone(), b, c]), Err(CorpusError::DuplicatePair(_))));
        a.pair_of = None;
        assert!(pair_indices(&[a]).unwrap().is_empty());
    }
}
