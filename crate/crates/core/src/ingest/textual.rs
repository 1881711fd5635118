//! Line-oriented textual app format.
//!
//! ```text
//! app com.example.sorter
//! class Sorter extends java/lang/Object
//! method readAndSort ()V
//! aload_0
//! call:Sorter.readFile()Ljava/lang/String;
//! api:java/io/BufferedReader.readLine
//! strings 2
//!
//! ```
//!
//! Header lines: `app <id>`, optional `pair_of <id>`, then any number of
//! `class <name> [extends <super>] [implements <iface>...]` blocks. A
//! `method <name> <descriptor> [flag...]` line opens a method; each following
//! line is one token until a blank line (or the next header) closes it.
//! Tokens are JVM mnemonics, `api:<owner>.<name>[<descriptor>]` for calls
//! into the API vocabulary, or `call:<owner>.<name><descriptor>` for any
//! other call. Both call forms take an optional kind suffix
//! (`call-static:`, `api-interface:`, ...); the default kind is virtual.
//! `strings <n>` sets the method's string constant count. `#` starts a
//! comment line.

use std::fmt::Write as _;

use super::model::{access, AppModel, CallKind, CallSite, ClassModel, MethodModel, Provenance};
use super::opcodes;
use super::IngestError;
use crate::features::InstructionVocabulary;

const DEFAULT_API_DESCRIPTOR: &str = "()V";

fn syntax<T>(line: usize, message: impl Into<String>) -> Result<T, IngestError> {
    Err(IngestError::Syntax {
        line,
        message: message.into(),
    })
}

fn kind_from_suffix(suffix: &str) -> Option<CallKind> {
    match suffix {
        "" => Some(CallKind::Virtual),
        "-virtual" => Some(CallKind::Virtual),
        "-static" => Some(CallKind::Static),
        "-special" => Some(CallKind::Special),
        "-interface" => Some(CallKind::Interface),
        "-dynamic" => Some(CallKind::Dynamic),
        _ => None,
    }
}

fn kind_suffix(kind: CallKind) -> &'static str {
    match kind {
        CallKind::Virtual => "",
        CallKind::Static => "-static",
        CallKind::Special => "-special",
        CallKind::Interface => "-interface",
        CallKind::Dynamic => "-dynamic",
    }
}

/// Parses one method-body token into either a plain opcode or a call site.
fn parse_token(
    token: &str,
    line: usize,
    vocab: &InstructionVocabulary,
) -> Result<Result<u8, CallSite>, IngestError> {
    let unknown = || IngestError::UnknownMnemonic {
        line,
        token: token.to_string(),
    };
    let Some((head, target)) = token.split_once(':') else {
        let op = opcodes::from_mnemonic(token).ok_or_else(unknown)?;
        if opcodes::is_invoke(op) {
            return syntax(line, format!("`{token}` needs a call target; use call:/api: tokens"));
        }
        return Ok(Ok(op));
    };
    let (is_api, suffix) = if let Some(s) = head.strip_prefix("api") {
        (true, s)
    } else if let Some(s) = head.strip_prefix("call") {
        (false, s)
    } else {
        return Err(unknown());
    };
    let kind = kind_from_suffix(suffix).ok_or_else(unknown)?;
    let (path, descriptor) = match target.find('(') {
        Some(i) => (&target[..i], &target[i..]),
        None if is_api => (target, DEFAULT_API_DESCRIPTOR),
        None => return syntax(line, format!("call target `{target}` lacks a descriptor")),
    };
    let Some((owner, name)) = path.rsplit_once('.') else {
        return syntax(line, format!("call target `{target}` is not <owner>.<name>"));
    };
    if name.is_empty() || (kind != CallKind::Dynamic && owner.is_empty()) {
        return syntax(line, format!("call target `{target}` has an empty owner or name"));
    }
    if is_api && vocab.api_slot(owner).is_none() {
        return Err(unknown());
    }
    Ok(Err(CallSite {
        owner: owner.to_string(),
        name: name.to_string(),
        descriptor: descriptor.to_string(),
        kind,
    }))
}

fn parse_flags(words: &[&str], line: usize) -> Result<u16, IngestError> {
    if words.is_empty() {
        return Ok(access::PUBLIC);
    }
    let mut flags = 0u16;
    for w in words {
        if *w == "package" {
            continue;
        }
        if let Some(hex) = w.strip_prefix("0x") {
            flags |= u16::from_str_radix(hex, 16)
                .or_else(|_| syntax(line, format!("bad flag word `{w}`")))?;
            continue;
        }
        match access::NAMED.iter().find(|(n, _)| n == w) {
            Some((_, bit)) => flags |= bit,
            None => return syntax(line, format!("unknown access flag `{w}`")),
        }
    }
    Ok(flags)
}

fn write_flags(flags: u16, out: &mut String) {
    if flags == access::PUBLIC {
        return;
    }
    if flags == 0 {
        out.push_str(" package");
        return;
    }
    let mut rest = flags;
    for (name, bit) in access::NAMED {
        if flags & bit != 0 {
            out.push(' ');
            out.push_str(name);
            rest &= !bit;
        }
    }
    if rest != 0 {
        let _ = write!(out, " 0x{rest:04x}");
    }
}

struct MethodBuilder {
    method: MethodModel,
}

impl MethodBuilder {
    fn open(rest: &[&str], line: usize) -> Result<Self, IngestError> {
        let [name, descriptor, flags @ ..] = rest else {
            return syntax(line, "expected `method <name> <descriptor> [flags]`");
        };
        let mut method = MethodModel::new(*name, *descriptor);
        method.access_flags = parse_flags(flags, line)?;
        Ok(MethodBuilder { method })
    }

    fn token(&mut self, token: &str, line: usize, vocab: &InstructionVocabulary) -> Result<(), IngestError> {
        if let Some(n) = token.strip_prefix("strings ") {
            self.method.string_constant_count = n
                .trim()
                .parse()
                .or_else(|_| syntax(line, format!("bad string count `{n}`")))?;
            return Ok(());
        }
        match parse_token(token, line, vocab)? {
            Ok(op) => self.method.push_opcode(op),
            Err(site) => self.method.push_call(site),
        }
        Ok(())
    }
}

fn add_method(
    class: &mut ClassModel,
    builder: MethodBuilder,
    line: usize,
) -> Result<(), IngestError> {
    let m = builder.method;
    if class.find_method(&m.name, &m.descriptor).is_some() {
        return Err(IngestError::DuplicateMethod {
            line,
            class: class.class_name.clone(),
            name: m.name,
            descriptor: m.descriptor,
        });
    }
    class.methods.push(m);
    Ok(())
}

/// Parses a single textual app record.
pub fn load_textual_app(text: &str, vocab: &InstructionVocabulary) -> Result<AppModel, IngestError> {
    let mut app: Option<AppModel> = None;
    let mut class: Option<ClassModel> = None;
    let mut method: Option<(MethodBuilder, usize)> = None;

    fn close_method(
        class: &mut Option<ClassModel>,
        method: &mut Option<(MethodBuilder, usize)>,
    ) -> Result<(), IngestError> {
        if let Some((builder, line)) = method.take() {
            let class = class.as_mut().expect("method is only opened inside a class");
            add_method(class, builder, line)?;
        }
        Ok(())
    }

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            close_method(&mut class, &mut method)?;
            continue;
        }
        let words: Vec<&str> = trimmed.split_whitespace().collect();
        match words[0] {
            "app" => {
                if app.is_some() {
                    return syntax(line, "more than one `app` header in record");
                }
                let [_, id] = words[..] else {
                    return syntax(line, "expected `app <app_id>`");
                };
                app = Some(AppModel::new(id, Provenance::Textual));
            }
            "pair_of" => {
                let Some(app) = app.as_mut() else {
                    return syntax(line, "`pair_of` before `app` header");
                };
                let [_, id] = words[..] else {
                    return syntax(line, "expected `pair_of <app_id>`");
                };
                app.pair_of = Some(id.to_string());
            }
            "class" => {
                close_method(&mut class, &mut method)?;
                let Some(app) = app.as_mut() else {
                    return syntax(line, "`class` before `app` header");
                };
                if let Some(done) = class.take() {
                    app.classes.push(done);
                }
                class = Some(parse_class_header(&words, line)?);
                if app.find_class(&class.as_ref().unwrap().class_name).is_some() {
                    return syntax(line, format!("duplicate class `{}`", words[1]));
                }
            }
            "method" => {
                close_method(&mut class, &mut method)?;
                if class.is_none() {
                    return syntax(line, "`method` outside of a class");
                }
                method = Some((MethodBuilder::open(&words[1..], line)?, line));
            }
            _ => match method.as_mut() {
                Some((builder, _)) => builder.token(trimmed, line, vocab)?,
                None => return syntax(line, format!("token `{trimmed}` outside of a method")),
            },
        }
    }
    close_method(&mut class, &mut method)?;
    let Some(mut app) = app else {
        return syntax(0, "missing `app` header");
    };
    if let Some(done) = class {
        app.classes.push(done);
    }
    Ok(app)
}

fn parse_class_header(words: &[&str], line: usize) -> Result<ClassModel, IngestError> {
    let Some(name) = words.get(1) else {
        return syntax(line, "expected `class <name>`");
    };
    let mut class = ClassModel {
        class_name: name.to_string(),
        super_name: None,
        interfaces: Vec::new(),
        methods: Vec::new(),
    };
    let mut i = 2;
    while i < words.len() {
        match words[i] {
            "extends" if class.super_name.is_none() => {
                let Some(s) = words.get(i + 1) else {
                    return syntax(line, "`extends` without a class name");
                };
                class.super_name = Some(s.to_string());
                i += 2;
            }
            "implements" => {
                class
                    .interfaces
                    .extend(words[i + 1..].iter().map(|s| s.to_string()));
                break;
            }
            other => return syntax(line, format!("unexpected `{other}` in class header")),
        }
    }
    Ok(class)
}

/// Parses a sequence of bare `method` blocks (no app/class headers), the
/// format used for junk segment vocabularies.
pub fn parse_method_blocks(
    text: &str,
    vocab: &InstructionVocabulary,
) -> Result<Vec<MethodModel>, IngestError> {
    let mut holder = ClassModel::new("<blocks>");
    let mut current: Option<(MethodBuilder, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            if let Some((b, l)) = current.take() {
                add_method(&mut holder, b, l)?;
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("method ") {
            if let Some((b, l)) = current.take() {
                add_method(&mut holder, b, l)?;
            }
            let words: Vec<&str> = rest.split_whitespace().collect();
            current = Some((MethodBuilder::open(&words, line)?, line));
        } else {
            match current.as_mut() {
                Some((b, _)) => b.token(trimmed, line, vocab)?,
                None => return syntax(line, format!("token `{trimmed}` outside of a method")),
            }
        }
    }
    if let Some((b, l)) = current.take() {
        add_method(&mut holder, b, l)?;
    }
    Ok(holder.methods)
}

fn write_call(site: &CallSite, vocab: &InstructionVocabulary, out: &mut String) {
    let head = if vocab.api_slot(&site.owner).is_some() {
        "api"
    } else {
        "call"
    };
    let _ = writeln!(
        out,
        "{head}{}:{}.{}{}",
        kind_suffix(site.kind),
        site.owner,
        site.name,
        site.descriptor
    );
}

pub fn write_method(method: &MethodModel, vocab: &InstructionVocabulary, out: &mut String) {
    out.push_str("method ");
    out.push_str(&method.name);
    out.push(' ');
    out.push_str(&method.descriptor);
    write_flags(method.access_flags, out);
    out.push('\n');
    if method.string_constant_count > 0 {
        let _ = writeln!(out, "strings {}", method.string_constant_count);
    }
    for (op, site) in method.instructions() {
        match site {
            Some(site) => write_call(site, vocab, out),
            None => {
                // Dangling invoke opcodes (no call site) cannot be expressed;
                // the model invariant rules them out.
                out.push_str(opcodes::mnemonic(op).unwrap_or("nop"));
                out.push('\n');
            }
        }
    }
    out.push('\n');
}

/// Serializes an app to the textual format. Descriptions and provenance are
/// not part of the format.
pub fn write_textual_app(app: &AppModel, vocab: &InstructionVocabulary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "app {}", app.app_id);
    if let Some(p) = &app.pair_of {
        let _ = writeln!(out, "pair_of {p}");
    }
    for class in &app.classes {
        out.push('\n');
        out.push_str("class ");
        out.push_str(&class.class_name);
        if let Some(s) = &class.super_name {
            out.push_str(" extends ");
            out.push_str(s);
        }
        if !class.interfaces.is_empty() {
            out.push_str(" implements");
            for i in &class.interfaces {
                out.push(' ');
                out.push_str(i);
            }
        }
        out.push('\n');
        for m in &class.methods {
            write_method(m, vocab, &mut out);
        }
    }
    out
}
