//! Runs the obfuscator on one app and compares the two distributions.

use macneto::features::{extract_app, EntryPolicy, InstructionVocabulary};
use macneto::obfuscate::{obfuscate, ObfuscationConfig};
use macneto::synth::{generate_app, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = InstructionVocabulary::default_vocabulary();
    let (app, _) = generate_app(1, &SynthConfig::default(), &vocab);
    let config = ObfuscationConfig {
        seed: 42,
        junk_intensity: 0.8,
        ..Default::default()
    };
    let (obfuscated, log) = obfuscate(&app, &config, &vocab)?;

    if let Some(renames) = &log.renames {
        println!("renamed {} classes", renames.classes.len());
        for (from, to) in renames.classes.iter().take(3) {
            println!("  {from} -> {to}");
        }
    }
    println!("junk segments: {}, decrypt calls: {}", log.junk.len(), log.decrypt.len());

    let before = extract_app(&app, &vocab, EntryPolicy::AllMethods);
    let after = extract_app(&obfuscated, &vocab, EntryPolicy::AllMethods);
    println!("instructions: {} -> {}", before.total(), after.total());
    for (slot, (b, a)) in before.counts.iter().zip(&after.counts).enumerate() {
        if a != b {
            println!("  {:<40} {b:>4} -> {a}", vocab.slot_names()[slot]);
        }
    }
    assert_eq!(log.replay(&before, &vocab)?, after);
    println!("the transform log replays to the same distribution");
    Ok(())
}
