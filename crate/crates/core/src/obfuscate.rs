//! Seeded obfuscation transforms that turn an app into a labeled
//! obfuscated counterpart: identifier renaming, junk code insertion and
//! string-decryption helper injection.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{method_id, InstructionDistribution, InstructionVocabulary, MethodRef};
use crate::ingest::model::access;
use crate::ingest::opcodes::{self, from_mnemonic};
use crate::ingest::textual::parse_method_blocks;
use crate::ingest::{AppModel, CallKind, CallSite, IngestError, MethodModel, RawOpcode};
use crate::seed::rng_for;

static DEFAULT_JUNK_SEGMENTS: &str = include_str!("../data/junk_segments.txt");

/// Name and descriptor of the injected string helper.
pub const DECRYPT_NAME: &str = "decrypt";
pub const DECRYPT_DESCRIPTOR: &str = "([C)[C";

/// Opcode pattern of the injected helper: an xor loop over a char array.
pub const DECRYPT_PATTERN: [&str; 20] = [
    "aload_0", "arraylength", "istore_1", "iconst_0", "istore_2", "goto", "aload_0", "iload_2",
    "dup2", "caload", "bipush", "ixor", "i2c", "castore", "iinc", "iload_2", "iload_1",
    "if_icmplt", "aload_0", "areturn",
];

const KEPT_METHOD_NAMES: [&str; 3] = ["<init>", "<clinit>", "main"];

#[derive(Debug, Error)]
pub enum ObfuscationError {
    #[error("junk_intensity {0} is outside [0, 1]")]
    Intensity(f64),
    #[error("junk vocabulary is empty but junk_intensity is {0}")]
    EmptyVocabulary(f64),
    #[error("junk segment `{name}`: {reason}")]
    BadSegment { name: String, reason: String },
    #[error("junk vocabulary: {0}")]
    Parse(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunkSegment {
    pub name: String,
    pub opcodes: Vec<String>,
}

impl JunkSegment {
    pub fn raw_opcodes(&self) -> Result<Vec<RawOpcode>, ObfuscationError> {
        let bad = |reason: String| ObfuscationError::BadSegment {
            name: self.name.clone(),
            reason,
        };
        if self.opcodes.is_empty() {
            return Err(bad("no opcodes".into()));
        }
        self.opcodes
            .iter()
            .map(|m| match from_mnemonic(m) {
                Some(op) if opcodes::is_invoke(op) => Err(bad(format!("`{m}` is a call"))),
                Some(op) => Ok(op),
                None => Err(bad(format!("unknown mnemonic `{m}`"))),
            })
            .collect()
    }

    fn as_method(&self) -> Result<MethodModel, ObfuscationError> {
        let mut m = MethodModel::new(self.name.clone(), "()V");
        m.opcodes = self.raw_opcodes()?;
        Ok(m)
    }
}

/// Parses junk segments written as bare `method` blocks. Segments may not
/// contain calls or string constants.
pub fn parse_junk_vocabulary(text: &str) -> Result<Vec<JunkSegment>, ObfuscationError> {
    let no_api = InstructionVocabulary::parse("").expect("empty vocabulary parses");
    parse_method_blocks(text, &no_api)?
        .into_iter()
        .map(|m| {
            if !m.call_sites.is_empty() || m.string_constant_count > 0 {
                return Err(ObfuscationError::BadSegment {
                    name: m.name,
                    reason: "segments may only contain plain opcodes".into(),
                });
            }
            let segment = JunkSegment {
                opcodes: m
                    .opcodes
                    .iter()
                    .map(|&op| opcodes::mnemonic(op).expect("parsed opcode").to_string())
                    .collect(),
                name: m.name,
            };
            segment.raw_opcodes()?;
            Ok(segment)
        })
        .collect()
}

/// The eight shipped no-op segments.
pub fn default_junk_vocabulary() -> Vec<JunkSegment> {
    parse_junk_vocabulary(DEFAULT_JUNK_SEGMENTS).expect("shipped junk segments are well formed")
}

fn default_true() -> bool {
    true
}

fn default_intensity() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObfuscationConfig {
    #[serde(default = "default_true")]
    pub rename: bool,
    /// Expected fraction of methods that receive one junk segment.
    #[serde(default = "default_intensity")]
    pub junk_intensity: f64,
    #[serde(default = "default_junk_vocabulary")]
    pub junk_vocabulary: Vec<JunkSegment>,
    #[serde(default = "default_true")]
    pub inject_string_decrypt: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ObfuscationConfig {
    fn default() -> Self {
        ObfuscationConfig {
            rename: true,
            junk_intensity: default_intensity(),
            junk_vocabulary: default_junk_vocabulary(),
            inject_string_decrypt: true,
            seed: 0,
        }
    }
}

impl ObfuscationConfig {
    /// Every transform switched off.
    pub fn disabled() -> Self {
        ObfuscationConfig {
            rename: false,
            junk_intensity: 0.0,
            inject_string_decrypt: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ObfuscationError> {
        if !(0.0..=1.0).contains(&self.junk_intensity) {
            return Err(ObfuscationError::Intensity(self.junk_intensity));
        }
        if self.junk_intensity > 0.0 && self.junk_vocabulary.is_empty() {
            return Err(ObfuscationError::EmptyVocabulary(self.junk_intensity));
        }
        for s in &self.junk_vocabulary {
            s.raw_opcodes()?;
        }
        Ok(())
    }
}

/// The bijection applied by [`rename_identifiers`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameMap {
    pub classes: BTreeMap<String, String>,
    pub methods: BTreeMap<String, String>,
}

impl RenameMap {
    pub fn class<'a>(&'a self, name: &'a str) -> &'a str {
        self.classes.get(name).map(String::as_str).unwrap_or(name)
    }

    /// Rewrites every `L<class>;` reference in a descriptor.
    pub fn rewrite_descriptor(&self, descriptor: &str) -> String {
        let mut out = String::with_capacity(descriptor.len());
        let mut rest = descriptor;
        while let Some(start) = rest.find('L') {
            out.push_str(&rest[..=start]);
            rest = &rest[start + 1..];
            match rest.find(';') {
                Some(end) => {
                    out.push_str(self.class(&rest[..end]));
                    rest = &rest[end..];
                }
                None => break,
            }
        }
        out.push_str(rest);
        out
    }

    fn owner(&self, owner: &str) -> String {
        if owner.starts_with('[') {
            self.rewrite_descriptor(owner)
        } else {
            self.class(owner).to_string()
        }
    }

    fn method_name(&self, owner: &str, name: &str) -> String {
        match (self.classes.contains_key(owner), self.methods.get(name)) {
            (true, Some(new)) => new.clone(),
            _ => name.to_string(),
        }
    }

    /// Maps a method reference of the original app to the renamed app.
    pub fn method_ref(&self, r: &MethodRef) -> MethodRef {
        MethodRef {
            class: self.class(&r.class).to_string(),
            name: self.method_name(&r.class, &r.name),
            descriptor: self.rewrite_descriptor(&r.descriptor),
        }
    }
}

/// `A, B, ..., Z, AA, AB, ...` over the given alphabet.
fn short_name(mut index: usize, first: u8) -> String {
    let mut bytes = Vec::new();
    loop {
        bytes.push(first + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    bytes.reverse();
    String::from_utf8(bytes).expect("ascii")
}

fn fresh_names(count: usize, first: u8, taken: &HashSet<String>, reject: impl Fn(&str) -> bool) -> Vec<String> {
    (0..)
        .map(|i| short_name(i, first))
        .filter(|n| !taken.contains(n) && !reject(n))
        .take(count)
        .collect()
}

/// Seeded bijective renaming of app class and method names. Classes whose
/// name falls under an API prefix are bundled library code and keep their
/// names, so API call counts are untouched. Constructors, static
/// initializers and `main` keep their names as well.
pub fn rename_identifiers(app: &AppModel, seed: u64, vocab: &InstructionVocabulary) -> (AppModel, RenameMap) {
    let mut taken: HashSet<String> = HashSet::new();
    let mut method_names_taken: HashSet<String> = HashSet::new();
    for class in &app.classes {
        taken.insert(class.class_name.clone());
        taken.extend(class.super_name.iter().cloned());
        taken.extend(class.interfaces.iter().cloned());
        for m in &class.methods {
            method_names_taken.insert(m.name.clone());
            for site in &m.call_sites {
                taken.insert(site.owner.clone());
                method_names_taken.insert(site.name.clone());
            }
        }
    }

    let renamed_classes: BTreeSet<&str> = app
        .classes
        .iter()
        .map(|c| c.class_name.as_str())
        .filter(|c| vocab.api_slot(c).is_none())
        .collect();
    let kept_method_names: HashSet<&str> = app
        .classes
        .iter()
        .filter(|c| !renamed_classes.contains(c.class_name.as_str()))
        .flat_map(|c| c.methods.iter().map(|m| m.name.as_str()))
        .chain(KEPT_METHOD_NAMES)
        .collect();
    let renamed_methods: BTreeSet<&str> = app
        .classes
        .iter()
        .filter(|c| renamed_classes.contains(c.class_name.as_str()))
        .flat_map(|c| c.methods.iter().map(|m| m.name.as_str()))
        .filter(|n| !kept_method_names.contains(n))
        .collect();

    let mut rng = rng_for(seed, &["rename", &app.app_id]);
    let mut class_order: Vec<&str> = renamed_classes.into_iter().collect();
    class_order.shuffle(&mut rng);
    let mut method_order: Vec<&str> = renamed_methods.into_iter().collect();
    method_order.shuffle(&mut rng);

    let class_names = fresh_names(class_order.len(), b'A', &taken, |n| vocab.api_slot(n).is_some());
    let method_names = fresh_names(method_order.len(), b'a', &method_names_taken, |_| false);
    let map = RenameMap {
        classes: class_order
            .iter()
            .zip(class_names)
            .map(|(a, b)| (a.to_string(), b))
            .collect(),
        methods: method_order
            .iter()
            .zip(method_names)
            .map(|(a, b)| (a.to_string(), b))
            .collect(),
    };

    let mut out = app.clone();
    for class in &mut out.classes {
        let original = class.class_name.clone();
        class.class_name = map.class(&original).to_string();
        class.super_name = class.super_name.as_deref().map(|s| map.class(s).to_string());
        for i in &mut class.interfaces {
            *i = map.class(i).to_string();
        }
        for m in &mut class.methods {
            m.name = map.method_name(&original, &m.name);
            m.descriptor = map.rewrite_descriptor(&m.descriptor);
            for site in &mut m.call_sites {
                site.name = map.method_name(&site.owner, &site.name);
                site.owner = map.owner(&site.owner);
                site.descriptor = map.rewrite_descriptor(&site.descriptor);
            }
        }
    }
    out.pair_of = Some(app.app_id.clone());
    (out, map)
}

/// One junk segment appended to one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunkInsertion {
    pub class: String,
    pub method: String,
    pub descriptor: String,
    /// Index into the configured junk vocabulary.
    pub segment: usize,
}

/// Appends one seeded-random segment to each method with probability
/// `junk_intensity`. Abstract and native methods have no code and are
/// skipped.
pub fn insert_junk(
    app: &AppModel,
    config: &ObfuscationConfig,
) -> Result<(AppModel, Vec<JunkInsertion>), ObfuscationError> {
    config.validate()?;
    let mut out = app.clone();
    let mut log = Vec::new();
    if config.junk_intensity == 0.0 {
        return Ok((out, log));
    }
    let segments = config
        .junk_vocabulary
        .iter()
        .map(JunkSegment::raw_opcodes)
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = rng_for(config.seed, &["junk", &app.app_id]);
    for class in &mut out.classes {
        for m in &mut class.methods {
            if m.access_flags & (access::ABSTRACT | access::NATIVE) != 0 {
                continue;
            }
            if rng.random::<f64>() >= config.junk_intensity {
                continue;
            }
            let segment = rng.random_range(0..segments.len());
            m.opcodes.extend_from_slice(&segments[segment]);
            log.push(JunkInsertion {
                class: class.class_name.clone(),
                method: m.name.clone(),
                descriptor: m.descriptor.clone(),
                segment,
            });
        }
    }
    Ok((out, log))
}

/// One injected helper and the number of calls routed through it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecryptInjection {
    pub class: String,
    pub method: String,
    pub calls: u32,
}

pub fn decrypt_method(name: &str) -> MethodModel {
    let mut m = MethodModel::new(name, DECRYPT_DESCRIPTOR);
    m.access_flags = access::PUBLIC | access::STATIC;
    m.opcodes = DECRYPT_PATTERN
        .iter()
        .map(|n| from_mnemonic(n).expect("decrypt pattern uses known mnemonics"))
        .collect();
    m
}

fn decrypt_call(class: &str, name: &str) -> CallSite {
    CallSite {
        owner: class.to_string(),
        name: name.to_string(),
        descriptor: DECRYPT_DESCRIPTOR.to_string(),
        kind: CallKind::Static,
    }
}

/// Adds one `decrypt` helper to each class holding string constants and
/// one static call to it per constant.
pub fn inject_string_decrypt(app: &AppModel) -> (AppModel, Vec<DecryptInjection>) {
    let mut out = app.clone();
    let mut log = Vec::new();
    for class in &mut out.classes {
        let calls: u32 = class.methods.iter().map(|m| m.string_constant_count).sum();
        if calls == 0 {
            continue;
        }
        let name = (0..)
            .map(|i| {
                if i == 0 {
                    DECRYPT_NAME.to_string()
                } else {
                    format!("{DECRYPT_NAME}{i}")
                }
            })
            .find(|n| class.find_method(n, DECRYPT_DESCRIPTOR).is_none())
            .expect("some helper name is free");
        for m in &mut class.methods {
            for _ in 0..m.string_constant_count {
                m.push_call(decrypt_call(&class.class_name, &name));
            }
        }
        class.methods.push(decrypt_method(&name));
        log.push(DecryptInjection {
            class: class.class_name.clone(),
            method: name,
            calls,
        });
    }
    (out, log)
}

/// Everything the obfuscator did to one app.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformLog {
    pub renames: Option<RenameMap>,
    pub junk: Vec<JunkInsertion>,
    pub junk_vocabulary: Vec<JunkSegment>,
    pub decrypt: Vec<DecryptInjection>,
}

impl TransformLog {
    /// Reproduces the obfuscated app's distribution from the original one,
    /// with every method counted (the default entry policy).
    pub fn replay(
        &self,
        original: &InstructionDistribution,
        vocab: &InstructionVocabulary,
    ) -> Result<InstructionDistribution, ObfuscationError> {
        let mut dist = original.clone();
        for insertion in &self.junk {
            let segment = self.junk_vocabulary.get(insertion.segment).ok_or_else(|| {
                ObfuscationError::BadSegment {
                    name: format!("#{}", insertion.segment),
                    reason: "not in the logged vocabulary".into(),
                }
            })?;
            dist += &method_id(&segment.as_method()?, vocab);
        }
        for injection in &self.decrypt {
            let mut helper = decrypt_method(&injection.method);
            for _ in 0..injection.calls {
                helper.push_call(decrypt_call(&injection.class, &injection.method));
            }
            dist += &method_id(&helper, vocab);
        }
        Ok(dist)
    }
}

/// Applies rename, then junk insertion, then helper injection, as enabled.
/// The result keeps the input's `app_id` and links back to it via `pair_of`.
pub fn obfuscate(
    app: &AppModel,
    config: &ObfuscationConfig,
    vocab: &InstructionVocabulary,
) -> Result<(AppModel, TransformLog), ObfuscationError> {
    config.validate()?;
    let mut log = TransformLog::default();
    let mut current = app.clone();
    if config.rename {
        let (renamed, map) = rename_identifiers(&current, config.seed, vocab);
        current = renamed;
        log.renames = Some(map);
    }
    if config.junk_intensity > 0.0 {
        let (junked, inserted) = insert_junk(&current, config)?;
        current = junked;
        log.junk = inserted;
        log.junk_vocabulary = config.junk_vocabulary.clone();
    }
    if config.inject_string_decrypt {
        let (injected, injections) = inject_string_decrypt(&current);
        current = injected;
        log.decrypt = injections;
    }
    current.pair_of = Some(app.app_id.clone());
    Ok((current, log))
}
