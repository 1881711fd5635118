//! Builds the instruction distribution of a generated app and shows how the
//! entry policy changes what gets counted.

use macneto::features::{build_call_graph, extract_app, EntryPolicy, InstructionVocabulary};
use macneto::ingest::model::access;
use macneto::synth::{generate_app, SynthConfig};

fn main() {
    let vocab = InstructionVocabulary::default_vocabulary();
    let (mut app, theme) = generate_app(7, &SynthConfig::default(), &vocab);
    // hide every other method so reachability matters
    for (i, m) in app.classes.iter_mut().flat_map(|c| &mut c.methods).enumerate() {
        if i % 2 == 1 {
            m.access_flags = access::PRIVATE;
        }
    }
    println!("{} ({theme}): {} classes, {} methods", app.app_id, app.classes.len(), app.method_count());

    for policy in [EntryPolicy::AllMethods, EntryPolicy::PublicOnly] {
        let cg = build_call_graph(&app, &vocab, policy);
        let dist = extract_app(&app, &vocab, policy);
        println!("\n{policy:?}: {} of {} methods reachable, {} instructions", cg.reachable().len(), cg.locations.len(), dist.total());
        let mut slots: Vec<(usize, u64)> = dist.counts.iter().copied().enumerate().filter(|&(_, c)| c > 0).collect();
        slots.sort_by(|a, b| b.1.cmp(&a.1));
        for (slot, count) in slots.into_iter().take(8) {
            println!("  {:<40} {count}", vocab.slot_names()[slot]);
        }
    }
}
