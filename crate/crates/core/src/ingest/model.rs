use serde::{Deserialize, Serialize};

use super::opcodes::{self, RawOpcode};

/// Method access flags as found in the class file `access_flags` item.
pub mod access {
    pub const PUBLIC: u16 = 0x0001;
    pub const PRIVATE: u16 = 0x0002;
    pub const PROTECTED: u16 = 0x0004;
    pub const STATIC: u16 = 0x0008;
    pub const FINAL: u16 = 0x0010;
    pub const SYNCHRONIZED: u16 = 0x0020;
    pub const BRIDGE: u16 = 0x0040;
    pub const VARARGS: u16 = 0x0080;
    pub const NATIVE: u16 = 0x0100;
    pub const ABSTRACT: u16 = 0x0400;
    pub const STRICT: u16 = 0x0800;
    pub const SYNTHETIC: u16 = 0x1000;

    pub const NAMED: [(&str, u16); 12] = [
        ("public", PUBLIC),
        ("private", PRIVATE),
        ("protected", PROTECTED),
        ("static", STATIC),
        ("final", FINAL),
        ("synchronized", SYNCHRONIZED),
        ("bridge", BRIDGE),
        ("varargs", VARARGS),
        ("native", NATIVE),
        ("abstract", ABSTRACT),
        ("strict", STRICT),
        ("synthetic", SYNTHETIC),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClassFiles,
    Textual,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Virtual,
    Static,
    Special,
    Interface,
    Dynamic,
}

impl CallKind {
    pub fn from_opcode(op: RawOpcode) -> Option<Self> {
        match op {
            opcodes::INVOKEVIRTUAL => Some(CallKind::Virtual),
            opcodes::INVOKESPECIAL => Some(CallKind::Special),
            opcodes::INVOKESTATIC => Some(CallKind::Static),
            opcodes::INVOKEINTERFACE => Some(CallKind::Interface),
            opcodes::INVOKEDYNAMIC => Some(CallKind::Dynamic),
            _ => None,
        }
    }

    pub fn opcode(self) -> RawOpcode {
        match self {
            CallKind::Virtual => opcodes::INVOKEVIRTUAL,
            CallKind::Special => opcodes::INVOKESPECIAL,
            CallKind::Static => opcodes::INVOKESTATIC,
            CallKind::Interface => opcodes::INVOKEINTERFACE,
            CallKind::Dynamic => opcodes::INVOKEDYNAMIC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallSite {
    pub owner: String,
    pub name: String,
    pub descriptor: String,
    pub kind: CallKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodModel {
    pub name: String,
    pub descriptor: String,
    pub access_flags: u16,
    pub opcodes: Vec<RawOpcode>,
    pub call_sites: Vec<CallSite>,
    pub string_constant_count: u32,
}

impl MethodModel {
    pub fn new(name: impl Into<String>, descriptor: impl Into<String>) -> Self {
        MethodModel {
            name: name.into(),
            descriptor: descriptor.into(),
            access_flags: access::PUBLIC,
            opcodes: Vec::new(),
            call_sites: Vec::new(),
            string_constant_count: 0,
        }
    }

    /// Appends a non-invoke opcode.
    pub fn push_opcode(&mut self, op: RawOpcode) {
        debug_assert!(!opcodes::is_invoke(op));
        self.opcodes.push(op);
    }

    /// Appends an invoke instruction together with its call site.
    pub fn push_call(&mut self, site: CallSite) {
        self.opcodes.push(site.kind.opcode());
        self.call_sites.push(site);
    }

    /// Pairs every opcode with the call site it carries, if any.
    pub fn instructions(&self) -> impl Iterator<Item = (RawOpcode, Option<&CallSite>)> + '_ {
        let mut sites = self.call_sites.iter();
        self.opcodes.iter().map(move |&op| {
            if opcodes::is_invoke(op) {
                (op, sites.next())
            } else {
                (op, None)
            }
        })
    }

    /// Checks that `call_sites` lines up with the invoke opcodes.
    pub fn call_sites_consistent(&self) -> bool {
        let invokes: Vec<_> = self
            .opcodes
            .iter()
            .filter(|op| opcodes::is_invoke(**op))
            .copied()
            .collect();
        invokes.len() == self.call_sites.len()
            && invokes
                .iter()
                .zip(&self.call_sites)
                .all(|(op, site)| site.kind.opcode() == *op)
    }

    pub fn is_public(&self) -> bool {
        self.access_flags & access::PUBLIC != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassModel {
    pub class_name: String,
    pub super_name: Option<String>,
    pub interfaces: Vec<String>,
    pub methods: Vec<MethodModel>,
}

impl ClassModel {
    pub fn new(name: impl Into<String>) -> Self {
        ClassModel {
            class_name: name.into(),
            super_name: Some("java/lang/Object".to_string()),
            interfaces: Vec::new(),
            methods: Vec::new(),
        }
    }

    pub fn find_method(&self, name: &str, descriptor: &str) -> Option<&MethodModel> {
        self.methods
            .iter()
            .find(|m| m.name == name && m.descriptor == descriptor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppModel {
    pub app_id: String,
    pub classes: Vec<ClassModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub provenance: Provenance,
    /// Set on obfuscated apps: the id of the original they were derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_of: Option<String>,
}

impl AppModel {
    pub fn new(app_id: impl Into<String>, provenance: Provenance) -> Self {
        AppModel {
            app_id: app_id.into(),
            classes: Vec::new(),
            description: None,
            provenance,
            pair_of: None,
        }
    }

    pub fn find_class(&self, name: &str) -> Option<&ClassModel> {
        self.classes.iter().find(|c| c.class_name == name)
    }

    pub fn methods(&self) -> impl Iterator<Item = (&ClassModel, &MethodModel)> {
        self.classes
            .iter()
            .flat_map(|c| c.methods.iter().map(move |m| (c, m)))
    }

    pub fn method_count(&self) -> usize {
        self.classes.iter().map(|c| c.methods.len()).sum()
    }
}
