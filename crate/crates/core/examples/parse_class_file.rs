//! Parses a compiled class and lists each method's opcodes and calls.
//!
//! `cargo run --example parse_class_file -- path/to/Foo.class`

use std::env;
use std::fs;

use macneto::ingest::{opcodes, parse_class_file};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/classes/Sorter.class").to_string());
    let class = parse_class_file(&fs::read(&path)?)?;
    println!("class {} extends {}", class.class_name, class.super_name.as_deref().unwrap_or("-"));
    for m in &class.methods {
        println!("\n  {}{} (flags {:#06x})", m.name, m.descriptor, m.access_flags);
        for (op, call) in m.instructions() {
            let name = opcodes::mnemonic(op).unwrap_or("?");
            match call {
                Some(c) => println!("    {name:<16} {}.{}{}", c.owner, c.name, c.descriptor),
                None => println!("    {name}"),
            }
        }
    }
    Ok(())
}
