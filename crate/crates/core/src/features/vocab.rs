use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::{CallSite, RawOpcode};

static DEFAULT_API_VOCABULARY: &str = include_str!("../../data/api_vocabulary.txt");

/// The grouped opcode slots. Each group collapses the type-specific variants
/// of one operation (`iadd`, `ladd`, `fadd`, `dadd` all count as `xadd`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpcodeGroup {
    XAload,
    XAstore,
    ArrayLength,
    XAdd,
    XSub,
    XMul,
    XDiv,
    XRem,
    XNeg,
    XShift,
    XAnd,
    XOr,
    XXor,
    Iinc,
    XComp,
    IfXXX,
    XSwitch,
}

impl OpcodeGroup {
    pub const ALL: [OpcodeGroup; 17] = [
        OpcodeGroup::XAload,
        OpcodeGroup::XAstore,
        OpcodeGroup::ArrayLength,
        OpcodeGroup::XAdd,
        OpcodeGroup::XSub,
        OpcodeGroup::XMul,
        OpcodeGroup::XDiv,
        OpcodeGroup::XRem,
        OpcodeGroup::XNeg,
        OpcodeGroup::XShift,
        OpcodeGroup::XAnd,
        OpcodeGroup::XOr,
        OpcodeGroup::XXor,
        OpcodeGroup::Iinc,
        OpcodeGroup::XComp,
        OpcodeGroup::IfXXX,
        OpcodeGroup::XSwitch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpcodeGroup::XAload => "xaload",
            OpcodeGroup::XAstore => "xastore",
            OpcodeGroup::ArrayLength => "arraylength",
            OpcodeGroup::XAdd => "xadd",
            OpcodeGroup::XSub => "xsub",
            OpcodeGroup::XMul => "xmul",
            OpcodeGroup::XDiv => "xdiv",
            OpcodeGroup::XRem => "xrem",
            OpcodeGroup::XNeg => "xneg",
            OpcodeGroup::XShift => "xshift",
            OpcodeGroup::XAnd => "xand",
            OpcodeGroup::XOr => "xor",
            OpcodeGroup::XXor => "x_xor",
            OpcodeGroup::Iinc => "iinc",
            OpcodeGroup::XComp => "xcomp",
            OpcodeGroup::IfXXX => "ifXXX",
            OpcodeGroup::XSwitch => "xswitch",
        }
    }

    /// Slot index of this group; groups always occupy the first slots.
    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn of(op: RawOpcode) -> Option<OpcodeGroup> {
        let g = match op {
            0x2E..=0x35 => OpcodeGroup::XAload,
            0x4F..=0x56 => OpcodeGroup::XAstore,
            0xBE => OpcodeGroup::ArrayLength,
            0x60..=0x63 => OpcodeGroup::XAdd,
            0x64..=0x67 => OpcodeGroup::XSub,
            0x68..=0x6B => OpcodeGroup::XMul,
            0x6C..=0x6F => OpcodeGroup::XDiv,
            0x70..=0x73 => OpcodeGroup::XRem,
            0x74..=0x77 => OpcodeGroup::XNeg,
            0x78..=0x7D => OpcodeGroup::XShift,
            0x7E | 0x7F => OpcodeGroup::XAnd,
            0x80 | 0x81 => OpcodeGroup::XOr,
            0x82 | 0x83 => OpcodeGroup::XXor,
            0x84 => OpcodeGroup::Iinc,
            0x94..=0x98 => OpcodeGroup::XComp,
            0x99..=0xA6 | 0xC6 | 0xC7 => OpcodeGroup::IfXXX,
            0xAA | 0xAB => OpcodeGroup::XSwitch,
            _ => return None,
        };
        Some(g)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabularyError {
    #[error("vocabulary line {line}: expected `<prefix> <slot_name>`")]
    MalformedLine { line: usize },
    #[error("vocabulary line {line}: prefix `{prefix}` listed twice")]
    DuplicatePrefix { line: usize, prefix: String },
    #[error("vocabulary line {line}: slot `{slot}` collides with an opcode group")]
    ReservedSlot { line: usize, slot: String },
}

/// One instruction as seen by the abstraction step.
#[derive(Debug, Clone, Copy)]
pub enum Instruction<'a> {
    Opcode(RawOpcode),
    Call(&'a CallSite),
}

/// The tracked instruction set: opcode groups followed by API slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionVocabulary {
    slot_names: Vec<String>,
    api_map: HashMap<String, usize>,
    fingerprint: String,
}

impl InstructionVocabulary {
    /// The shipped vocabulary: 17 opcode groups and 235 API slots.
    pub fn default_vocabulary() -> Self {
        Self::parse(DEFAULT_API_VOCABULARY).expect("shipped vocabulary is well formed")
    }

    /// Parses an API vocabulary file (`<prefix> <slot_name>` per line, `#`
    /// comments). Several prefixes may share one slot name.
    pub fn parse(text: &str) -> Result<Self, VocabularyError> {
        let mut slot_names: Vec<String> =
            OpcodeGroup::ALL.iter().map(|g| g.name().to_string()).collect();
        let mut slot_index: HashMap<String, usize> = slot_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut api_map = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut words = content.split_whitespace();
            let (Some(prefix), Some(slot), None) = (words.next(), words.next(), words.next()) else {
                return Err(VocabularyError::MalformedLine { line });
            };
            if OpcodeGroup::ALL.iter().any(|g| g.name() == slot) {
                return Err(VocabularyError::ReservedSlot {
                    line,
                    slot: slot.to_string(),
                });
            }
            let next = slot_names.len();
            let index = *slot_index.entry(slot.to_string()).or_insert(next);
            if index == next {
                slot_names.push(slot.to_string());
            }
            let prefix = prefix.trim_end_matches('/').to_string();
            if api_map.insert(prefix.clone(), index).is_some() {
                return Err(VocabularyError::DuplicatePrefix { line, prefix });
            }
        }
        let fingerprint = Self::compute_fingerprint(&slot_names, &api_map);
        Ok(InstructionVocabulary {
            slot_names,
            api_map,
            fingerprint,
        })
    }

    fn compute_fingerprint(slot_names: &[String], api_map: &HashMap<String, usize>) -> String {
        let mut hasher = Sha256::new();
        for name in slot_names {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        let mut prefixes: Vec<_> = api_map.iter().collect();
        prefixes.sort();
        for (prefix, slot) in prefixes {
            hasher.update(format!("{prefix}={slot}\n").as_bytes());
        }
        hex::encode(&hasher.finalize()[..16])
    }

    pub fn total_slots(&self) -> usize {
        self.slot_names.len()
    }

    pub fn api_slot_count(&self) -> usize {
        self.slot_names.len() - OpcodeGroup::ALL.len()
    }

    pub fn prefix_count(&self) -> usize {
        self.api_map.len()
    }

    pub fn slot_names(&self) -> &[String] {
        &self.slot_names
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slot_names.iter().position(|n| n == name)
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Longest-prefix match of a class owner against the API map. A prefix
    /// matches the owner itself or anything nested below it (`/` or `$`).
    pub fn api_slot(&self, owner: &str) -> Option<usize> {
        if owner.is_empty() {
            return None;
        }
        let mut candidate = owner;
        loop {
            if let Some(&slot) = self.api_map.get(candidate) {
                return Some(slot);
            }
            match candidate.rfind(['/', '$']) {
                Some(i) => candidate = &candidate[..i],
                None => return None,
            }
        }
    }

    pub fn slot_for_opcode(&self, op: RawOpcode) -> Option<usize> {
        OpcodeGroup::of(op).map(OpcodeGroup::slot)
    }

    pub fn slot_for_call(&self, site: &CallSite) -> Option<usize> {
        self.api_slot(&site.owner)
    }
}

/// Maps one instruction to its tracked slot, or `None` if it is untracked.
pub fn abstract_opcode(instr: Instruction<'_>, vocab: &InstructionVocabulary) -> Option<usize> {
    match instr {
        Instruction::Opcode(op) => vocab.slot_for_opcode(op),
        Instruction::Call(site) => vocab.slot_for_call(site),
    }
}

impl fmt::Display for OpcodeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{opcodes::from_mnemonic, CallKind};

    fn call(owner: &str) -> CallSite {
        CallSite {
            owner: owner.into(),
            name: "m".into(),
            descriptor: "()V".into(),
            kind: CallKind::Virtual,
        }
    }

    #[test]
    fn default_vocabulary_has_252_slots() {
        let v = InstructionVocabulary::default_vocabulary();
        assert_eq!(v.total_slots(), 252);
        assert_eq!(v.api_slot_count(), 235);
        assert_eq!(v.prefix_count(), 235);
        let mut names = v.slot_names().to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 252);
    }

    #[test]
    fn add_variants_share_a_slot() {
        let v = InstructionVocabulary::default_vocabulary();
        let iadd = v.slot_for_opcode(from_mnemonic("iadd").unwrap());
        let fadd = v.slot_for_opcode(from_mnemonic("fadd").unwrap());
        assert_eq!(iadd, Some(OpcodeGroup::XAdd.slot()));
        assert_eq!(iadd, fadd);
        assert_eq!(v.slot_for_opcode(from_mnemonic("aload_0").unwrap()), None);
        assert_eq!(v.slot_for_opcode(from_mnemonic("ifnull").unwrap()), Some(OpcodeGroup::IfXXX.slot()));
        assert_eq!(v.slot_for_opcode(from_mnemonic("lookupswitch").unwrap()), Some(OpcodeGroup::XSwitch.slot()));
    }

    #[test]
    fn every_defined_opcode_maps_to_at_most_one_group() {
        let grouped = (0u8..=0xC9).filter(|op| OpcodeGroup::of(*op).is_some()).count();
        // 8 loads + 8 stores + arraylength + 4*6 arithmetic + 6 shifts + 2*3 bitwise + iinc
        // + 5 compares + 16 conditional jumps + 2 switches
        assert_eq!(grouped, 8 + 8 + 1 + 24 + 6 + 6 + 1 + 5 + 16 + 2);
    }

    #[test]
    fn prefix_matching() {
        let v = InstructionVocabulary::parse("java/io io\njava/io/File file\n").unwrap();
        let io = v.slot_index("io").unwrap();
        let file = v.slot_index("file").unwrap();
        assert_eq!(v.slot_for_call(&call("java/io/BufferedReader")), Some(io));
        assert_eq!(v.slot_for_call(&call("java/io/File")), Some(file));
        assert_eq!(v.slot_for_call(&call("java/io/File$1")), Some(file));
        // a prefix only matches on a path boundary
        assert_eq!(v.slot_for_call(&call("java/io/FileReader")), Some(io));
        assert_eq!(v.slot_for_call(&call("java/iox/Thing")), None);
        assert_eq!(v.slot_for_call(&call("")), None);
    }

    #[test]
    fn shared_slot_names_and_errors() {
        let v = InstructionVocabulary::parse("a/b net # comment\nc/d net\n").unwrap();
        assert_eq!(v.total_slots(), 18);
        assert_eq!(
            InstructionVocabulary::parse("a/b xadd"),
            Err(VocabularyError::ReservedSlot { line: 1, slot: "xadd".into() })
        );
        assert!(matches!(
            InstructionVocabulary::parse("a/b x\na/b y"),
            Err(VocabularyError::DuplicatePrefix { line: 2, .. })
        ));
        assert!(matches!(
            InstructionVocabulary::parse("lonely"),
            Err(VocabularyError::MalformedLine { line: 1 })
        ));
    }

    #[test]
    fn fingerprint_tracks_contents() {
        let a = InstructionVocabulary::parse("a/b x\n").unwrap();
        let b = InstructionVocabulary::parse("a/b y\n").unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), InstructionVocabulary::parse("a/b x").unwrap().fingerprint());
    }
}
