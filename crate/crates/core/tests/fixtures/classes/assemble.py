#!/usr/bin/env python3
"""Assembles the parser fixture classes and writes the model each one must
parse to. Run from this directory; output is deterministic."""

import json
import struct

OPS = {
    "nop": 0x00, "aconst_null": 0x01, "iconst_m1": 0x02, "iconst_0": 0x03, "iconst_1": 0x04,
    "iconst_2": 0x05, "iconst_3": 0x06, "lconst_0": 0x09, "lconst_1": 0x0A, "dconst_0": 0x0E,
    "bipush": 0x10, "sipush": 0x11, "ldc": 0x12, "ldc_w": 0x13, "ldc2_w": 0x14,
    "iload": 0x15, "aload": 0x19, "iload_0": 0x1A, "iload_1": 0x1B, "iload_2": 0x1C,
    "iload_3": 0x1D, "lload_0": 0x1E, "aload_0": 0x2A, "aload_1": 0x2B, "aload_2": 0x2C,
    "iaload": 0x2E, "caload": 0x34, "istore": 0x36, "istore_1": 0x3C, "istore_2": 0x3D,
    "istore_3": 0x3E, "lstore_1": 0x40, "astore_1": 0x4C, "astore_2": 0x4D, "iastore": 0x4F,
    "castore": 0x55, "pop": 0x57, "dup": 0x59, "iadd": 0x60, "isub": 0x64, "imul": 0x68,
    "ixor": 0x82, "iinc": 0x84, "i2c": 0x92, "lcmp": 0x94, "dcmpl": 0x97, "ifeq": 0x99,
    "ifne": 0x9A, "iflt": 0x9B, "ifge": 0x9C, "if_icmpge": 0xA2, "if_icmple": 0xA4,
    "goto": 0xA7, "tableswitch": 0xAA, "lookupswitch": 0xAB, "ireturn": 0xAC,
    "dreturn": 0xAF, "areturn": 0xB0, "return": 0xB1, "getstatic": 0xB2, "getfield": 0xB4,
    "putfield": 0xB5, "invokevirtual": 0xB6, "invokespecial": 0xB7, "invokestatic": 0xB8,
    "invokeinterface": 0xB9, "invokedynamic": 0xBA, "new": 0xBB, "newarray": 0xBC,
    "arraylength": 0xBE, "athrow": 0xBF, "checkcast": 0xC0, "monitorenter": 0xC2,
    "monitorexit": 0xC3, "wide": 0xC4,
}
U1 = {"bipush", "ldc", "iload", "aload", "istore", "newarray"}
U2 = {"sipush", "ldc_w", "ldc2_w", "getstatic", "getfield", "putfield", "invokevirtual",
      "invokespecial", "invokestatic", "new", "checkcast"}
BRANCH = {"ifeq", "ifne", "iflt", "ifge", "if_icmpge", "if_icmple", "goto"}
KINDS = {"invokevirtual": "virtual", "invokespecial": "special", "invokestatic": "static",
         "invokeinterface": "interface", "invokedynamic": "dynamic"}

PUBLIC, PRIVATE, STATIC, SYNCHRONIZED, NATIVE, ABSTRACT = 0x1, 0x2, 0x8, 0x20, 0x100, 0x400


def mutf8(s):
    out = bytearray()
    for ch in s:
        c = ord(ch)
        if c == 0:
            out += b"\xc0\x80"
        elif c < 0x80:
            out.append(c)
        elif c < 0x800:
            out += bytes([0xC0 | c >> 6, 0x80 | c & 0x3F])
        elif c < 0x10000:
            out += bytes([0xE0 | c >> 12, 0x80 | c >> 6 & 0x3F, 0x80 | c & 0x3F])
        else:
            c -= 0x10000
            hi, lo = 0xD800 + (c >> 10), 0xDC00 + (c & 0x3FF)
            for u in (hi, lo):
                out += bytes([0xE0 | u >> 12, 0x80 | u >> 6 & 0x3F, 0x80 | u & 0x3F])
    return bytes(out)


class Pool:
    def __init__(self):
        self.entries = []
        self.index = {}
        self.next = 1
        self.strings = set()

    def add(self, key, data, wide=False):
        if key in self.index:
            return self.index[key]
        i = self.next
        self.index[key] = i
        self.entries.append(data)
        self.next += 2 if wide else 1
        return i

    def utf8(self, s):
        b = mutf8(s)
        return self.add(("utf8", s), b"\x01" + struct.pack(">H", len(b)) + b)

    def cls(self, name):
        return self.add(("class", name), b"\x07" + struct.pack(">H", self.utf8(name)))

    def string(self, s):
        i = self.add(("string", s), b"\x08" + struct.pack(">H", self.utf8(s)))
        self.strings.add(i)
        return i

    def nat(self, name, desc):
        return self.add(("nat", name, desc), b"\x0c" + struct.pack(">HH", self.utf8(name), self.utf8(desc)))

    def method(self, owner, name, desc, interface=False):
        tag = 11 if interface else 10
        return self.add(("m", tag, owner, name, desc),
                        bytes([tag]) + struct.pack(">HH", self.cls(owner), self.nat(name, desc)))

    def field(self, owner, name, desc):
        return self.add(("f", owner, name, desc), b"\x09" + struct.pack(">HH", self.cls(owner), self.nat(name, desc)))

    def integer(self, v):
        return self.add(("int", v), b"\x03" + struct.pack(">i", v))

    def long(self, v):
        return self.add(("long", v), b"\x05" + struct.pack(">q", v), wide=True)

    def double(self, v):
        return self.add(("double", v), b"\x06" + struct.pack(">d", v), wide=True)

    def method_handle(self, kind, ref):
        return self.add(("mh", kind, ref), b"\x0f" + struct.pack(">BH", kind, ref))

    def method_type(self, desc):
        return self.add(("mt", desc), b"\x10" + struct.pack(">H", self.utf8(desc)))

    def indy(self, bootstrap, name, desc):
        return self.add(("indy", bootstrap, name, desc), b"\x12" + struct.pack(">HH", bootstrap, self.nat(name, desc)))

    def call_of(self, index):
        for key, i in self.index.items():
            if i == index and key[0] == "m":
                return key[2], key[3], key[4]
            if i == index and key[0] == "indy":
                return "", key[2], key[3]
        raise KeyError(index)


def assemble(code, pool):
    """Two passes over (mnemonic, *args) tuples and label strings. Returns the
    code bytes and the expected (opcodes, call_sites, strings)."""

    def size(pc, ins):
        op = ins[0]
        if op in ("tableswitch", "lookupswitch"):
            pad = (4 - (pc + 1) % 4) % 4
            body = 12 + 4 * len(ins[3]) if op == "tableswitch" else 8 + 8 * len(ins[2])
            return 1 + pad + body
        if op == "wide":
            return 6 if ins[1] == "iinc" else 4
        if op in U1:
            return 2
        if op in U2 or op in BRANCH:
            return 3
        if op == "iinc":
            return 3
        if op in ("invokeinterface", "invokedynamic"):
            return 5
        return 1

    labels, pc = {}, 0
    for ins in code:
        if isinstance(ins, str):
            labels[ins] = pc
        else:
            pc += size(pc, ins)

    out = bytearray()
    opcodes, calls, strings = [], [], 0
    for ins in code:
        if isinstance(ins, str):
            continue
        pc = len(out)
        op = ins[0]
        out.append(OPS[op])
        if op == "wide":
            out.append(OPS[ins[1]])
            out += struct.pack(">H", ins[2])
            if ins[1] == "iinc":
                out += struct.pack(">h", ins[3])
            opcodes.append(OPS[ins[1]])
            continue
        opcodes.append(OPS[op])
        if op == "tableswitch":
            out += b"\0" * ((4 - (pc + 1) % 4) % 4)
            default, low, targets = ins[1], ins[2], ins[3]
            out += struct.pack(">iii", labels[default] - pc, low, low + len(targets) - 1)
            for t in targets:
                out += struct.pack(">i", labels[t] - pc)
        elif op == "lookupswitch":
            out += b"\0" * ((4 - (pc + 1) % 4) % 4)
            default, pairs = ins[1], sorted(ins[2])
            out += struct.pack(">ii", labels[default] - pc, len(pairs))
            for k, t in pairs:
                out += struct.pack(">ii", k, labels[t] - pc)
        elif op in BRANCH:
            out += struct.pack(">h", labels[ins[1]] - pc)
        elif op == "iinc":
            out += struct.pack(">Bb", ins[1], ins[2])
        elif op in U1:
            out += struct.pack(">B" if op != "bipush" else ">b", ins[1])
        elif op in U2:
            out += struct.pack(">H" if op != "sipush" else ">h", ins[1])
        elif op == "invokeinterface":
            out += struct.pack(">HBB", ins[1], ins[2], 0)
        elif op == "invokedynamic":
            out += struct.pack(">HH", ins[1], 0)
        if op in KINDS:
            owner, name, desc = pool.call_of(ins[1])
            calls.append({"owner": owner, "name": name, "descriptor": desc, "kind": KINDS[op]})
        if op in ("ldc", "ldc_w") and ins[1] in pool.strings:
            strings += 1
    return bytes(out), opcodes, calls, strings


def attribute(pool, name, body):
    return struct.pack(">HI", pool.utf8(name), len(body)) + body


def build(name, super_name, interfaces, fields, methods, pool, class_attrs=()):
    this = pool.cls(name)
    sup = pool.cls(super_name) if super_name else 0
    ifaces = [pool.cls(i) for i in interfaces]
    method_bytes, expected = [], []
    for m in methods:
        flags, mname, desc, code = m["flags"], m["name"], m["desc"], m.get("code")
        attrs = b""
        count = 0
        opcodes, calls, strings = [], [], 0
        if code is not None:
            body, opcodes, calls, strings = assemble(code, pool)
            handlers = m.get("handlers", [])
            inner = m.get("code_attrs", [])
            code_attr = struct.pack(">HHI", m.get("stack", 4), m.get("locals", 4), len(body)) + body
            code_attr += struct.pack(">H", len(handlers))
            for h in handlers:
                code_attr += struct.pack(">HHHH", *h)
            code_attr += struct.pack(">H", len(inner))
            for aname, abody in inner:
                code_attr += attribute(pool, aname, abody)
            attrs += attribute(pool, "Code", code_attr)
            count += 1
        for aname, abody in m.get("attrs", []):
            attrs += attribute(pool, aname, abody)
            count += 1
        method_bytes.append(struct.pack(">HHHH", flags, pool.utf8(mname), pool.utf8(desc), count) + attrs)
        expected.append({
            "name": mname, "descriptor": desc, "access_flags": flags, "opcodes": opcodes,
            "call_sites": calls, "string_constant_count": strings,
        })
    field_bytes = b""
    for flags, fname, fdesc in fields:
        field_bytes += struct.pack(">HHHH", flags, pool.utf8(fname), pool.utf8(fdesc), 0)
    class_attr_bytes = b"".join(attribute(pool, n, b) for n, b in class_attrs)

    out = bytearray(b"\xca\xfe\xba\xbe" + struct.pack(">HH", 0, 52))
    out += struct.pack(">H", pool.next)
    for e in pool.entries:
        out += e
    out += struct.pack(">HHH", PUBLIC | 0x20, this, sup)
    out += struct.pack(">H", len(ifaces)) + b"".join(struct.pack(">H", i) for i in ifaces)
    out += struct.pack(">H", len(fields)) + field_bytes
    out += struct.pack(">H", len(methods)) + b"".join(method_bytes)
    out += struct.pack(">H", len(class_attrs)) + class_attr_bytes
    model = {"class_name": name, "super_name": super_name, "interfaces": interfaces, "methods": expected}
    return bytes(out), model


def init(pool, super_name="java/lang/Object"):
    return {"flags": PUBLIC, "name": "<init>", "desc": "()V", "code": [
        ("aload_0",), ("invokespecial", pool.method(super_name, "<init>", "()V")), ("return",)]}


def greeter():
    p = Pool()
    # pool entries the methods need are created before build() lays the pool out
    out = p.field("java/lang/System", "out", "Ljava/io/PrintStream;")
    println = p.method("java/io/PrintStream", "println", "(Ljava/lang/String;)V")
    sb = p.cls("java/lang/StringBuilder")
    methods = [
        init(p),
        {"flags": PUBLIC | STATIC, "name": "main", "desc": "([Ljava/lang/String;)V", "code": [
            ("getstatic", out), ("ldc", p.string("Hello, fixture")), ("invokevirtual", println),
            ("getstatic", out), ("ldc_w", p.string("café \u0000 \U0001F600")), ("invokevirtual", println),
            ("new", p.cls("fixtures/Greeter")), ("dup",), ("invokespecial", p.method("fixtures/Greeter", "<init>", "()V")),
            ("ldc", p.string("world")),
            ("invokevirtual", p.method("fixtures/Greeter", "greet", "(Ljava/lang/String;)Ljava/lang/String;")),
            ("pop",), ("return",)]},
        {"flags": PUBLIC, "name": "greet", "desc": "(Ljava/lang/String;)Ljava/lang/String;", "code": [
            ("new", sb), ("dup",), ("invokespecial", p.method("java/lang/StringBuilder", "<init>", "()V")),
            ("ldc", p.string("Hi ")),
            ("invokevirtual", p.method("java/lang/StringBuilder", "append", "(Ljava/lang/String;)Ljava/lang/StringBuilder;")),
            ("aload_1",),
            ("invokevirtual", p.method("java/lang/StringBuilder", "append", "(Ljava/lang/String;)Ljava/lang/StringBuilder;")),
            ("invokevirtual", p.method("java/lang/StringBuilder", "toString", "()Ljava/lang/String;")),
            ("areturn",)],
         "code_attrs": [("LineNumberTable", struct.pack(">HHH", 1, 0, 7))]},
    ]
    return build("fixtures/Greeter", "java/lang/Object", [], [(PRIVATE, "count", "I")], methods, p,
                 [("SourceFile", struct.pack(">H", p.utf8("Greeter.java")))])


def sorter():
    p = Pool()
    methods = [
        init(p),
        {"flags": PUBLIC | STATIC, "name": "sort", "desc": "([I)V", "locals": 4, "code": [
            ("iconst_0",), ("istore_1",),
            "outer", ("iload_1",), ("aload_0",), ("arraylength",), ("if_icmpge", "done"),
            ("iconst_0",), ("istore_2",),
            "inner", ("iload_2",), ("aload_0",), ("arraylength",), ("iload_1",), ("isub",), ("iconst_1",), ("isub",),
            ("if_icmpge", "next"),
            ("aload_0",), ("iload_2",), ("iaload",), ("aload_0",), ("iload_2",), ("iconst_1",), ("iadd",), ("iaload",),
            ("if_icmple", "skip"),
            ("aload_0",), ("iload_2",), ("iaload",), ("istore_3",),
            ("aload_0",), ("iload_2",), ("aload_0",), ("iload_2",), ("iconst_1",), ("iadd",), ("iaload",), ("iastore",),
            ("aload_0",), ("iload_2",), ("iconst_1",), ("iadd",), ("iload_3",), ("iastore",),
            "skip", ("iinc", 2, 1), ("goto", "inner"),
            "next", ("iinc", 1, 1), ("goto", "outer"),
            "done", ("return",)]},
        {"flags": PUBLIC | STATIC, "name": "main", "desc": "([Ljava/lang/String;)V", "code": [
            ("iconst_3",), ("newarray", 10), ("dup",), ("iconst_0",), ("iconst_3",), ("iastore",),
            "try", ("invokestatic", p.method("fixtures/Sorter", "sort", "([I)V")),
            "end", ("return",),
            "handler", ("astore_1",), ("aload_1",), ("athrow",)],
         "handlers": [(7, 10, 11, p.cls("java/lang/RuntimeException"))]},
    ]
    return build("fixtures/Sorter", "java/lang/Object", [], [], methods, p)


def shape():
    p = Pool()
    handle = p.method_handle(6, p.method("java/lang/invoke/StringConcatFactory", "makeConcatWithConstants",
                                         "(Ljava/lang/invoke/MethodHandles$Lookup;Ljava/lang/String;Ljava/lang/invoke/MethodType;Ljava/lang/String;[Ljava/lang/Object;)Ljava/lang/invoke/CallSite;"))
    recipe = p.string("area=\u0001")
    concat = p.indy(0, "makeConcatWithConstants", "(D)Ljava/lang/String;")
    area = p.method("fixtures/Shape", "area", "()D")
    methods = [
        init(p),
        {"flags": PUBLIC | ABSTRACT, "name": "area", "desc": "()D"},
        {"flags": PUBLIC, "name": "compareTo", "desc": "(Ljava/lang/Object;)I", "code": [
            ("aload_0",), ("invokevirtual", area), ("aload_1",), ("checkcast", p.cls("fixtures/Shape")),
            ("invokevirtual", area), ("dcmpl",), ("ireturn",)]},
        {"flags": PUBLIC, "name": "describe", "desc": "()Ljava/lang/String;", "code": [
            ("aload_0",), ("invokevirtual", area), ("invokedynamic", concat), ("areturn",)]},
        {"flags": PUBLIC, "name": "sameAs", "desc": "(Ljava/lang/Comparable;)Z", "code": [
            ("aload_1",), ("aload_0",),
            ("invokeinterface", p.method("java/lang/Comparable", "compareTo", "(Ljava/lang/Object;)I", interface=True), 2),
            ("ifne", "no"), ("iconst_1",), ("ireturn",), "no", ("iconst_0",), ("ireturn",)]},
        {"flags": PUBLIC | STATIC, "name": "unit", "desc": "()D", "code": [
            ("ldc2_w", p.double(1.5)), ("dreturn",)]},
        {"flags": PUBLIC | NATIVE, "name": "nativeHash", "desc": "()I"},
    ]
    bootstrap = struct.pack(">HHHH", 1, handle, 1, recipe)
    return build("fixtures/Shape", "java/lang/Object", ["java/lang/Comparable"], [], methods, p,
                 [("BootstrapMethods", bootstrap)])


def switcher():
    p = Pool()
    methods = [
        init(p),
        {"flags": PUBLIC | STATIC, "name": "classify", "desc": "(I)I", "code": [
            ("iload_0",), ("tableswitch", "other", 0, ["zero", "one", "two", "one"]),
            "zero", ("iconst_0",), ("ireturn",),
            "one", ("iconst_1",), ("ireturn",),
            "two", ("iconst_2",), ("ireturn",),
            "other", ("iload_0",), ("lookupswitch", "none", [(1000, "big"), (-5, "neg"), (100, "hundred")]),
            "big", ("sipush", 1000), ("ireturn",),
            "neg", ("iconst_m1",), ("ireturn",),
            "hundred", ("bipush", 100), ("ireturn",),
            "none", ("iconst_3",), ("ireturn",)]},
        {"flags": PUBLIC | STATIC, "name": "wideLocals", "desc": "()V", "locals": 301, "code": [
            ("sipush", 7), ("istore", 200), ("wide", "iinc", 300, 1000), ("wide", "iload", 300), ("pop",),
            ("ldc2_w", p.long(1 << 40)), ("lconst_1",), ("lcmp",), ("ifge", "end"),
            ("ldc", p.integer(123456)), ("pop",), "end", ("return",)]},
    ]
    return build("fixtures/Switcher", "java/lang/Object", [], [(PUBLIC | STATIC, "LIMIT", "J")], methods, p)


def xor_cipher():
    p = Pool()
    encrypt = p.method("fixtures/XorCipher", "encrypt", "([CI)[C")
    methods = [
        init(p),
        {"flags": PUBLIC | STATIC, "name": "encrypt", "desc": "([CI)[C", "code": [
            ("iconst_0",), ("istore_2",),
            "loop", ("iload_2",), ("aload_0",), ("arraylength",), ("if_icmpge", "done"),
            ("aload_0",), ("iload_2",), ("aload_0",), ("iload_2",), ("caload",), ("iload_1",), ("ixor",), ("i2c",),
            ("castore",), ("iinc", 2, 1), ("goto", "loop"),
            "done", ("aload_0",), ("areturn",)]},
        {"flags": PUBLIC | STATIC, "name": "main", "desc": "([Ljava/lang/String;)V", "code": [
            ("ldc", p.string("secret")),
            ("invokevirtual", p.method("java/lang/String", "toCharArray", "()[C")),
            ("bipush", 42), ("invokestatic", encrypt),
            ("invokestatic", p.method("java/lang/String", "valueOf", "([C)Ljava/lang/String;")), ("pop",),
            ("invokestatic", p.method("java/util/List", "of", "()Ljava/util/List;", interface=True)), ("pop",),
            ("return",)]},
        {"flags": PUBLIC | SYNCHRONIZED, "name": "guarded", "desc": "()V", "code": [
            ("aload_0",), ("dup",), ("astore_1",), ("monitorenter",), ("aload_1",), ("monitorexit",), ("return",)]},
        {"flags": PRIVATE, "name": "unused", "desc": "()V", "code": [("nop",), ("return",)],
         "attrs": [("Deprecated", b"")]},
    ]
    return build("fixtures/XorCipher", "java/lang/Object", [], [], methods, p)


def main():
    for stem, make in [("Greeter", greeter), ("Sorter", sorter), ("Shape", shape),
                       ("Switcher", switcher), ("XorCipher", xor_cipher)]:
        image, model = make()
        with open(f"{stem}.class", "wb") as f:
            f.write(image)
        app = {"app_id": stem, "classes": [model], "provenance": "class_files"}
        with open(f"{stem}.json", "w", encoding="utf-8") as f:
            f.write(json.dumps(app, indent=2, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
