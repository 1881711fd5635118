//! Ingestion of JVM class files and textual app records into [`AppModel`]s.

use std::path::PathBuf;

use thiserror::Error;

pub mod classfile;
pub mod manifest;
pub mod model;
pub mod opcodes;
pub mod textual;

pub use classfile::parse_class_file;
pub use manifest::{load_corpus, CorpusManifest, ManifestEntry};
pub use model::{AppModel, CallKind, CallSite, ClassModel, MethodModel, Provenance};
pub use opcodes::RawOpcode;
pub use textual::{load_textual_app, write_textual_app};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed class file at byte {offset}: {reason}")]
    MalformedClassFile { offset: usize, reason: String },
    #[error("line {line}: unknown mnemonic `{token}`")]
    UnknownMnemonic { line: usize, token: String },
    #[error("line {line}: duplicate method {class}.{name}{descriptor}")]
    DuplicateMethod {
        line: usize,
        class: String,
        name: String,
        descriptor: String,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("app `{app_id}`: {source}")]
    InApp {
        app_id: String,
        #[source]
        source: Box<IngestError>,
    },
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
