//! Class file reader.
//!
//! Reads the subset of the class file format needed for instruction
//! fingerprinting: the constant pool, access flags, super types, methods and
//! their `Code` attribute. Everything else (fields, StackMapTable,
//! annotations, class attributes) is bounds-checked and skipped.

use super::model::{CallKind, CallSite, ClassModel, MethodModel};
use super::opcodes;
use super::IngestError;

const MAGIC: u32 = 0xCAFE_BABE;

#[derive(Debug, Clone)]
enum Constant {
    Unusable,
    Utf8(String),
    Class(u16),
    String,
    NameAndType(u16, u16),
    MethodRef(u16, u16),
    InterfaceMethodRef(u16, u16),
    InvokeDynamic(u16),
    Other,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn malformed<T>(offset: usize, reason: impl Into<String>) -> Result<T, IngestError> {
    Err(IngestError::MalformedClassFile {
        offset,
        reason: reason.into(),
    })
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IngestError> {
        let end = match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => end,
            _ => return malformed(self.pos, format!("truncated {what}")),
        };
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u1(&mut self, what: &str) -> Result<u8, IngestError> {
        Ok(self.take(1, what)?[0])
    }

    fn u2(&mut self, what: &str) -> Result<u16, IngestError> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u4(&mut self, what: &str) -> Result<u32, IngestError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Pool {
    entries: Vec<Constant>,
}

impl Pool {
    fn get(&self, index: u16, offset: usize) -> Result<&Constant, IngestError> {
        match self.entries.get(index as usize) {
            Some(Constant::Unusable) | None => {
                malformed(offset, format!("invalid constant pool index {index}"))
            }
            Some(c) => Ok(c),
        }
    }

    fn utf8(&self, index: u16, offset: usize) -> Result<&str, IngestError> {
        match self.get(index, offset)? {
            Constant::Utf8(s) => Ok(s),
            _ => malformed(offset, format!("constant {index} is not Utf8")),
        }
    }

    fn class_name(&self, index: u16, offset: usize) -> Result<&str, IngestError> {
        match self.get(index, offset)? {
            Constant::Class(name) => self.utf8(*name, offset),
            _ => malformed(offset, format!("constant {index} is not a Class")),
        }
    }

    fn name_and_type(&self, index: u16, offset: usize) -> Result<(&str, &str), IngestError> {
        match self.get(index, offset)? {
            Constant::NameAndType(n, d) => Ok((self.utf8(*n, offset)?, self.utf8(*d, offset)?)),
            _ => malformed(offset, format!("constant {index} is not a NameAndType")),
        }
    }

    fn method_ref(
        &self,
        index: u16,
        kind: CallKind,
        offset: usize,
    ) -> Result<CallSite, IngestError> {
        let (class, nat) = match (self.get(index, offset)?, kind) {
            (Constant::MethodRef(c, n), CallKind::Virtual | CallKind::Static | CallKind::Special) => {
                (*c, *n)
            }
            (
                Constant::InterfaceMethodRef(c, n),
                CallKind::Interface | CallKind::Static | CallKind::Special,
            ) => (*c, *n),
            (Constant::InvokeDynamic(n), CallKind::Dynamic) => {
                let (name, descriptor) = self.name_and_type(*n, offset)?;
                return Ok(CallSite {
                    owner: String::new(),
                    name: name.to_string(),
                    descriptor: descriptor.to_string(),
                    kind,
                });
            }
            _ => {
                return malformed(
                    offset,
                    format!("constant {index} is not a valid target for {kind:?} invoke"),
                )
            }
        };
        let owner = self.class_name(class, offset)?;
        let (name, descriptor) = self.name_and_type(nat, offset)?;
        Ok(CallSite {
            owner: owner.to_string(),
            name: name.to_string(),
            descriptor: descriptor.to_string(),
            kind,
        })
    }
}

/// Decodes a modified UTF-8 string as stored in `CONSTANT_Utf8_info`.
fn decode_modified_utf8(bytes: &[u8], offset: usize) -> Result<String, IngestError> {
    if let Ok(s) = std::str::from_utf8(bytes) {
        if !s.contains('\0') {
            return Ok(s.to_string());
        }
    }
    let mut units: Vec<u16> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    let bad = |i: usize| malformed(offset + i, "invalid modified UTF-8");
    while i < bytes.len() {
        let b = bytes[i];
        if b == 0 || b >= 0xF0 {
            return bad(i);
        }
        if b < 0x80 {
            units.push(b as u16);
            i += 1;
        } else if b & 0xE0 == 0xC0 {
            let Some(&b2) = bytes.get(i + 1) else { return bad(i) };
            if b2 & 0xC0 != 0x80 {
                return bad(i);
            }
            units.push((((b & 0x1F) as u16) << 6) | (b2 & 0x3F) as u16);
            i += 2;
        } else if b & 0xF0 == 0xE0 {
            let (Some(&b2), Some(&b3)) = (bytes.get(i + 1), bytes.get(i + 2)) else {
                return bad(i);
            };
            if b2 & 0xC0 != 0x80 || b3 & 0xC0 != 0x80 {
                return bad(i);
            }
            units.push(
                (((b & 0x0F) as u16) << 12) | (((b2 & 0x3F) as u16) << 6) | (b3 & 0x3F) as u16,
            );
            i += 3;
        } else {
            return bad(i);
        }
    }
    Ok(char::decode_utf16(units)
        .map(|r| r.unwrap_or(char::REPLACEMENT_CHARACTER))
        .collect())
}

fn read_pool(r: &mut Reader<'_>) -> Result<Pool, IngestError> {
    let count = r.u2("constant pool count")?;
    if count == 0 {
        return malformed(r.pos - 2, "constant pool count is zero");
    }
    let mut entries = Vec::with_capacity(count as usize);
    entries.push(Constant::Unusable);
    while entries.len() < count as usize {
        let at = r.pos;
        let tag = r.u1("constant tag")?;
        let entry = match tag {
            1 => {
                let len = r.u2("Utf8 length")? as usize;
                let start = r.pos;
                let bytes = r.take(len, "Utf8 bytes")?;
                Constant::Utf8(decode_modified_utf8(bytes, start)?)
            }
            3 | 4 => {
                r.take(4, "numeric constant")?;
                Constant::Other
            }
            5 | 6 => {
                r.take(8, "wide numeric constant")?;
                entries.push(Constant::Other);
                if entries.len() >= count as usize {
                    return malformed(at, "8-byte constant overruns the constant pool");
                }
                Constant::Unusable
            }
            7 => Constant::Class(r.u2("Class name index")?),
            8 => {
                r.u2("String index")?;
                Constant::String
            }
            9 => {
                r.take(4, "Fieldref")?;
                Constant::Other
            }
            10 => Constant::MethodRef(r.u2("Methodref class")?, r.u2("Methodref nat")?),
            11 => Constant::InterfaceMethodRef(
                r.u2("InterfaceMethodref class")?,
                r.u2("InterfaceMethodref nat")?,
            ),
            12 => Constant::NameAndType(r.u2("NameAndType name")?, r.u2("NameAndType type")?),
            15 => {
                r.take(3, "MethodHandle")?;
                Constant::Other
            }
            16 | 19 | 20 => {
                r.take(2, "constant")?;
                Constant::Other
            }
            17 => {
                r.take(4, "Dynamic")?;
                Constant::Other
            }
            18 => {
                r.u2("InvokeDynamic bootstrap")?;
                Constant::InvokeDynamic(r.u2("InvokeDynamic nat")?)
            }
            other => return malformed(at, format!("unknown constant pool tag {other}")),
        };
        entries.push(entry);
    }
    Ok(Pool { entries })
}

fn skip_attributes(r: &mut Reader<'_>) -> Result<(), IngestError> {
    let count = r.u2("attribute count")?;
    for _ in 0..count {
        r.u2("attribute name")?;
        let len = r.u4("attribute length")? as usize;
        r.take(len, "attribute body")?;
    }
    Ok(())
}

struct DecodedCode {
    opcodes: Vec<u8>,
    call_sites: Vec<CallSite>,
    strings: u32,
}

fn decode_code(code: &[u8], base: usize, pool: &Pool) -> Result<DecodedCode, IngestError> {
    let mut out = DecodedCode {
        opcodes: Vec::new(),
        call_sites: Vec::new(),
        strings: 0,
    };
    let mut pc = 0usize;
    let operand = |pc: usize, len: usize| -> Result<&[u8], IngestError> {
        match pc.checked_add(len) {
            Some(end) if end <= code.len() => Ok(&code[pc..end]),
            _ => malformed(base + pc, "instruction operands run past end of code"),
        }
    };
    let be_i32 = |b: &[u8]| i32::from_be_bytes([b[0], b[1], b[2], b[3]]);

    while pc < code.len() {
        let at = base + pc;
        let op = code[pc];
        if !opcodes::is_defined(op) {
            return malformed(at, format!("invalid opcode 0x{op:02X}"));
        }
        match op {
            opcodes::WIDE => {
                let inner = *operand(pc + 1, 1)?.first().unwrap_or(&0);
                if !opcodes::is_wideable(inner) {
                    return malformed(at, format!("wide applied to opcode 0x{inner:02X}"));
                }
                let len = if inner == opcodes::IINC { 4 } else { 2 };
                operand(pc + 2, len)?;
                out.opcodes.push(inner);
                pc += 2 + len;
            }
            opcodes::TABLESWITCH | opcodes::LOOKUPSWITCH => {
                let start = (pc + 4) & !3;
                let header = operand(start, if op == opcodes::TABLESWITCH { 12 } else { 8 })?;
                let table_len = if op == opcodes::TABLESWITCH {
                    let low = be_i32(&header[4..8]) as i64;
                    let high = be_i32(&header[8..12]) as i64;
                    if high < low {
                        return malformed(at, "tableswitch high < low");
                    }
                    12 + (high - low + 1) * 4
                } else {
                    let pairs = be_i32(&header[4..8]) as i64;
                    if pairs < 0 {
                        return malformed(at, "lookupswitch with negative pair count");
                    }
                    8 + pairs * 8
                };
                let table_len = usize::try_from(table_len)
                    .map_err(|_| IngestError::MalformedClassFile {
                        offset: at,
                        reason: "switch table too large".into(),
                    })?;
                operand(start, table_len)?;
                out.opcodes.push(op);
                pc = start + table_len;
            }
            _ => {
                let len = opcodes::operand_len(op).unwrap_or(0);
                let args = operand(pc + 1, len)?;
                if let Some(kind) = CallKind::from_opcode(op) {
                    let index = u16::from_be_bytes([args[0], args[1]]);
                    match op {
                        opcodes::INVOKEINTERFACE if args[2] == 0 || args[3] != 0 => {
                            return malformed(at, "invokeinterface with bad count/zero bytes");
                        }
                        opcodes::INVOKEDYNAMIC if args[2] != 0 || args[3] != 0 => {
                            return malformed(at, "invokedynamic with nonzero trailing bytes");
                        }
                        _ => {}
                    }
                    out.call_sites.push(pool.method_ref(index, kind, at)?);
                } else if op == opcodes::LDC || op == opcodes::LDC_W {
                    let index = if op == opcodes::LDC {
                        args[0] as u16
                    } else {
                        u16::from_be_bytes([args[0], args[1]])
                    };
                    if let Constant::String = pool.get(index, at)? {
                        out.strings += 1;
                    }
                }
                out.opcodes.push(op);
                pc += 1 + len;
            }
        }
    }
    Ok(out)
}

fn read_method(r: &mut Reader<'_>, pool: &Pool) -> Result<MethodModel, IngestError> {
    let at = r.pos;
    let access_flags = r.u2("method access flags")?;
    let name = pool.utf8(r.u2("method name")?, at)?.to_string();
    let descriptor = pool.utf8(r.u2("method descriptor")?, at)?.to_string();
    let mut method = MethodModel {
        name,
        descriptor,
        access_flags,
        opcodes: Vec::new(),
        call_sites: Vec::new(),
        string_constant_count: 0,
    };
    let attr_count = r.u2("method attribute count")?;
    let mut seen_code = false;
    for _ in 0..attr_count {
        let attr_at = r.pos;
        let attr_name = pool.utf8(r.u2("attribute name")?, attr_at)?;
        let len = r.u4("attribute length")? as usize;
        let body_start = r.pos;
        let body = r.take(len, "attribute body")?;
        if attr_name != "Code" {
            continue;
        }
        if seen_code {
            return malformed(attr_at, "method has more than one Code attribute");
        }
        seen_code = true;
        let mut cr = Reader {
            bytes: body,
            pos: 0,
        };
        let wrap = |e: IngestError| match e {
            IngestError::MalformedClassFile { offset, reason } => IngestError::MalformedClassFile {
                offset: body_start + offset,
                reason,
            },
            other => other,
        };
        cr.u2("max_stack").map_err(wrap)?;
        cr.u2("max_locals").map_err(wrap)?;
        let code_len = cr.u4("code_length").map_err(wrap)? as usize;
        if code_len == 0 || code_len >= 65536 {
            return malformed(body_start + 4, format!("illegal code_length {code_len}"));
        }
        let code_start = body_start + cr.pos;
        let code = cr.take(code_len, "code").map_err(wrap)?;
        let decoded = decode_code(code, code_start, pool)?;
        let handlers = cr.u2("exception table length").map_err(wrap)? as usize;
        cr.take(handlers * 8, "exception table").map_err(wrap)?;
        skip_attributes(&mut cr).map_err(wrap)?;
        if cr.pos != body.len() {
            return malformed(
                body_start + cr.pos,
                format!("Code attribute length {len} disagrees with contents ({})", cr.pos),
            );
        }
        method.opcodes = decoded.opcodes;
        method.call_sites = decoded.call_sites;
        method.string_constant_count = decoded.strings;
    }
    Ok(method)
}

/// Parses a complete class file image.
pub fn parse_class_file(bytes: &[u8]) -> Result<ClassModel, IngestError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < 4 || r.u4("magic")? != MAGIC {
        return malformed(0, "bad magic (expected 0xCAFEBABE)");
    }
    r.u2("minor version")?;
    r.u2("major version")?;
    let pool = read_pool(&mut r)?;

    let at = r.pos;
    r.u2("class access flags")?;
    let class_name = pool.class_name(r.u2("this_class")?, at)?.to_string();
    let super_index = r.u2("super_class")?;
    let super_name = if super_index == 0 {
        None
    } else {
        Some(pool.class_name(super_index, at)?.to_string())
    };
    let iface_count = r.u2("interface count")?;
    let mut interfaces = Vec::with_capacity(iface_count as usize);
    for _ in 0..iface_count {
        let at = r.pos;
        interfaces.push(pool.class_name(r.u2("interface")?, at)?.to_string());
    }

    let field_count = r.u2("field count")?;
    for _ in 0..field_count {
        r.take(6, "field header")?;
        skip_attributes(&mut r)?;
    }

    let method_count = r.u2("method count")?;
    let mut methods: Vec<MethodModel> = Vec::with_capacity(method_count as usize);
    for _ in 0..method_count {
        let at = r.pos;
        let m = read_method(&mut r, &pool)?;
        if methods
            .iter()
            .any(|o| o.name == m.name && o.descriptor == m.descriptor)
        {
            return malformed(at, format!("duplicate method {}{}", m.name, m.descriptor));
        }
        methods.push(m);
    }
    skip_attributes(&mut r)?;
    if r.pos != bytes.len() {
        return malformed(r.pos, "trailing bytes after class file");
    }

    Ok(ClassModel {
        class_name,
        super_name,
        interfaces,
        methods,
    })
}
