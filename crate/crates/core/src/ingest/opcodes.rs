//! JVM opcode table.
//!
//! Opcodes 0x00 through 0xC9 are the defined instruction set. Everything
//! above (including the reserved `breakpoint`/`impdep1`/`impdep2`) is
//! rejected by the decoders in this crate.

/// A raw JVM opcode byte. Only values `<= LAST_OPCODE` are ever stored.
pub type RawOpcode = u8;

pub const LAST_OPCODE: u8 = 0xC9;

static MNEMONICS: [&str; 202] = [
    "nop", "aconst_null", "iconst_m1", "iconst_0", "iconst_1", "iconst_2", "iconst_3",
    "iconst_4", "iconst_5", "lconst_0", "lconst_1", "fconst_0", "fconst_1", "fconst_2",
    "dconst_0", "dconst_1", "bipush", "sipush", "ldc", "ldc_w", "ldc2_w", "iload", "lload",
    "fload", "dload", "aload", "iload_0", "iload_1", "iload_2", "iload_3", "lload_0",
    "lload_1", "lload_2", "lload_3", "fload_0", "fload_1", "fload_2", "fload_3", "dload_0",
    "dload_1", "dload_2", "dload_3", "aload_0", "aload_1", "aload_2", "aload_3", "iaload",
    "laload", "faload", "daload", "aaload", "baload", "caload", "saload", "istore", "lstore",
    "fstore", "dstore", "astore", "istore_0", "istore_1", "istore_2", "istore_3", "lstore_0",
    "lstore_1", "lstore_2", "lstore_3", "fstore_0", "fstore_1", "fstore_2", "fstore_3",
    "dstore_0", "dstore_1", "dstore_2", "dstore_3", "astore_0", "astore_1", "astore_2",
    "astore_3", "iastore", "lastore", "fastore", "dastore", "aastore", "bastore", "castore",
    "sastore", "pop", "pop2", "dup", "dup_x1", "dup_x2", "dup2", "dup2_x1", "dup2_x2", "swap",
    "iadd", "ladd", "fadd", "dadd", "isub", "lsub", "fsub", "dsub", "imul", "lmul", "fmul",
    "dmul", "idiv", "ldiv", "fdiv", "ddiv", "irem", "lrem", "frem", "drem", "ineg", "lneg",
    "fneg", "dneg", "ishl", "lshl", "ishr", "lshr", "iushr", "lushr", "iand", "land", "ior",
    "lor", "ixor", "lxor", "iinc", "i2l", "i2f", "i2d", "l2i", "l2f", "l2d", "f2i", "f2l",
    "f2d", "d2i", "d2l", "d2f", "i2b", "i2c", "i2s", "lcmp", "fcmpl", "fcmpg", "dcmpl",
    "dcmpg", "ifeq", "ifne", "iflt", "ifge", "ifgt", "ifle", "if_icmpeq", "if_icmpne",
    "if_icmplt", "if_icmpge", "if_icmpgt", "if_icmple", "if_acmpeq", "if_acmpne", "goto",
    "jsr", "ret", "tableswitch", "lookupswitch", "ireturn", "lreturn", "freturn", "dreturn",
    "areturn", "return", "getstatic", "putstatic", "getfield", "putfield", "invokevirtual",
    "invokespecial", "invokestatic", "invokeinterface", "invokedynamic", "new", "newarray",
    "anewarray", "arraylength", "athrow", "checkcast", "instanceof", "monitorenter",
    "monitorexit", "wide", "multianewarray", "ifnull", "ifnonnull", "goto_w", "jsr_w",
];

pub const ILOAD: u8 = 0x15;
pub const ALOAD: u8 = 0x19;
pub const ISTORE: u8 = 0x36;
pub const ASTORE: u8 = 0x3A;
pub const LDC: u8 = 0x12;
pub const LDC_W: u8 = 0x13;
pub const IINC: u8 = 0x84;
pub const RET: u8 = 0xA9;
pub const TABLESWITCH: u8 = 0xAA;
pub const LOOKUPSWITCH: u8 = 0xAB;
pub const INVOKEVIRTUAL: u8 = 0xB6;
pub const INVOKESPECIAL: u8 = 0xB7;
pub const INVOKESTATIC: u8 = 0xB8;
pub const INVOKEINTERFACE: u8 = 0xB9;
pub const INVOKEDYNAMIC: u8 = 0xBA;
pub const WIDE: u8 = 0xC4;

pub fn is_defined(op: u8) -> bool {
    op <= LAST_OPCODE
}

pub fn mnemonic(op: RawOpcode) -> Option<&'static str> {
    MNEMONICS.get(op as usize).copied()
}

pub fn from_mnemonic(name: &str) -> Option<RawOpcode> {
    MNEMONICS.iter().position(|m| *m == name).map(|i| i as u8)
}

pub fn is_invoke(op: RawOpcode) -> bool {
    (INVOKEVIRTUAL..=INVOKEDYNAMIC).contains(&op)
}

/// Number of operand bytes following `op` for fixed-length instructions.
/// Returns `None` for the variable-length ones (`tableswitch`,
/// `lookupswitch`, `wide`) and for undefined opcodes.
pub fn operand_len(op: RawOpcode) -> Option<usize> {
    let len = match op {
        0x10 => 1,                 // bipush
        0x11 => 2,                 // sipush
        0x12 => 1,                 // ldc
        0x13 | 0x14 => 2,          // ldc_w, ldc2_w
        0x15..=0x19 => 1,          // xload
        0x36..=0x3A => 1,          // xstore
        0x84 => 2,                 // iinc
        0x99..=0xA8 => 2,          // if*, goto, jsr
        0xA9 => 1,                 // ret
        0xAA | 0xAB | 0xC4 => return None,
        0xB2..=0xB8 => 2,          // field access, invokevirtual/special/static
        0xB9 | 0xBA => 4,          // invokeinterface, invokedynamic
        0xBB => 2,                 // new
        0xBC => 1,                 // newarray
        0xBD => 2,                 // anewarray
        0xC0 | 0xC1 => 2,          // checkcast, instanceof
        0xC5 => 3,                 // multianewarray
        0xC6 | 0xC7 => 2,          // ifnull, ifnonnull
        0xC8 | 0xC9 => 4,          // goto_w, jsr_w
        op if is_defined(op) => 0,
        _ => return None,
    };
    Some(len)
}

/// Opcodes that may follow a `wide` prefix.
pub fn is_wideable(op: RawOpcode) -> bool {
    matches!(op, ILOAD..=ALOAD | ISTORE..=ASTORE | RET | IINC)
}
