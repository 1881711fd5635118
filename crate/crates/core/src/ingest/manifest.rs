use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{AppModel, ClassModel, Provenance};
use super::{classfile, textual, IngestError};
use crate::features::InstructionVocabulary;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub app_id: String,
    pub source_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus_id: String,
    pub format_version: u32,
    pub apps: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn new(corpus_id: impl Into<String>) -> Self {
        CorpusManifest {
            corpus_id: corpus_id.into(),
            format_version: MANIFEST_FORMAT_VERSION,
            apps: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: CorpusManifest = serde_json::from_str(&text)
            .map_err(|e| IngestError::Manifest(format!("{}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<(), IngestError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Checks version, id uniqueness and pair links.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return Err(IngestError::Manifest(format!(
                "unsupported format_version {} (expected {MANIFEST_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mut ids = HashSet::new();
        for entry in &self.apps {
            if entry.app_id.is_empty() {
                return Err(IngestError::Manifest("empty app_id".into()));
            }
            if !ids.insert(entry.app_id.as_str()) {
                return Err(IngestError::Manifest(format!(
                    "duplicate app_id `{}`",
                    entry.app_id
                )));
            }
        }
        for entry in &self.apps {
            if let Some(p) = &entry.pair_of {
                if !ids.contains(p.as_str()) || p == &entry.app_id {
                    return Err(IngestError::Manifest(format!(
                        "app `{}` has pair_of `{p}`, which is not another app in the manifest",
                        entry.app_id
                    )));
                }
            }
        }
        Ok(())
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads every `.class` file below `dir`, in path order.
pub fn load_class_directory(app_id: &str, dir: &Path) -> Result<AppModel, IngestError> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| x == "class"))
        .collect();
    files.sort();
    let classes = files
        .iter()
        .map(|p| parse_class_path(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(app_from_classes(app_id, classes))
}

fn parse_class_path(path: &Path) -> Result<ClassModel, IngestError> {
    let bytes = read_bytes(path)?;
    classfile::parse_class_file(&bytes).map_err(|e| IngestError::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

pub fn app_from_classes(app_id: &str, classes: Vec<ClassModel>) -> AppModel {
    let mut app = AppModel::new(app_id, Provenance::ClassFiles);
    app.classes = classes;
    app
}

/// Loads one app from a path: a `.class` file, a directory of class files,
/// or a textual record.
pub fn load_app_source(
    app_id: &str,
    path: &Path,
    vocab: &InstructionVocabulary,
) -> Result<AppModel, IngestError> {
    if path.is_dir() {
        return load_class_directory(app_id, path);
    }
    let bytes = read_bytes(path)?;
    if bytes.starts_with(&[0xCA, 0xFE, 0xBA, 0xBE]) {
        let class = classfile::parse_class_file(&bytes)?;
        return Ok(app_from_classes(app_id, vec![class]));
    }
    let text = String::from_utf8(bytes).map_err(|_| IngestError::Syntax {
        line: 0,
        message: format!("{} is neither a class file nor UTF-8 text", path.display()),
    })?;
    let app = textual::load_textual_app(&text, vocab)?;
    if app.app_id != app_id {
        return Err(IngestError::Manifest(format!(
            "{} declares app `{}` but the manifest names it `{app_id}`",
            path.display(),
            app.app_id
        )));
    }
    Ok(app)
}

/// Loads every app named by the manifest, in manifest order.
pub fn load_corpus(
    manifest_path: &Path,
    vocab: &InstructionVocabulary,
) -> Result<Vec<AppModel>, IngestError> {
    let manifest = CorpusManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    load_manifest_apps(&manifest, base, vocab)
}

pub fn load_manifest_apps(
    manifest: &CorpusManifest,
    base: &Path,
    vocab: &InstructionVocabulary,
) -> Result<Vec<AppModel>, IngestError> {
    manifest.validate()?;
    manifest
        .apps
        .par_iter()
        .map(|entry| {
            load_entry(entry, base, vocab).map_err(|e| IngestError::InApp {
                app_id: entry.app_id.clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

fn load_entry(
    entry: &ManifestEntry,
    base: &Path,
    vocab: &InstructionVocabulary,
) -> Result<AppModel, IngestError> {
    let mut app = load_app_source(&entry.app_id, &base.join(&entry.source_path), vocab)?;
    if let Some(d) = &entry.description_path {
        let path = base.join(d);
        app.description = Some(fs::read_to_string(&path).map_err(|source| IngestError::Io {
            path,
            source,
        })?);
    }
    match (&app.pair_of, &entry.pair_of) {
        (Some(a), Some(b)) if a != b => {
            return Err(IngestError::Manifest(format!(
                "record pairs with `{a}` but manifest pairs with `{b}`"
            )))
        }
        (_, Some(b)) => app.pair_of = Some(b.clone()),
        _ => {}
    }
    Ok(app)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, pair: Option<&str>) -> ManifestEntry {
        ManifestEntry {
            app_id: id.into(),
            source_path: format!("{id}.txt").into(),
            description_path: None,
            pair_of: pair.map(str::to_string),
        }
    }

    #[test]
    fn dangling_pair_names_the_app() {
        let mut m = CorpusManifest::new("c");
        m.apps.push(entry("x", Some("y")));
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("`x`"), "{err}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut m = CorpusManifest::new("c");
        m.apps.push(entry("x", None));
        m.apps.push(entry("x", None));
        assert!(m.validate().is_err());
    }

    #[test]
    fn wrong_version_rejected() {
        let mut m = CorpusManifest::new("c");
        m.format_version = 2;
        assert!(m.validate().is_err());
    }
}
