//! Looks up held-out obfuscated apps in an index of known originals. The
//! target for each query is the indexed app closest to its un-obfuscated
//! original.

use macneto::corpus::synth_features;
use macneto::features::{FeatureOptions, InstructionVocabulary};
use macneto::model::{fit_model, PipelineConfig};
use macneto::search::System;
use macneto::synth::{generate_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = InstructionVocabulary::default_vocabulary();
    let pairs = generate_corpus(200, &SynthConfig::default(), &vocab)?;
    let features = synth_features(&pairs, &FeatureOptions::default(), &vocab);
    let (train, test) = features.split_at(160);
    let known: Vec<(String, Vec<f64>)> = train.iter().map(|p| (p.app_id.clone(), p.original.clone())).collect();

    for system in System::ALL {
        let model = fit_model(train, system, &PipelineConfig::default(), vocab.fingerprint())?;
        let index = model.build_index(&known)?;
        let mut first = 0;
        for p in test {
            let target = index.best(&model.embed_query(&p.original)?)?;
            if model.query(&index, &p.obfuscated, 10)?.rank_of(&target) == Some(1) {
                first += 1;
            }
        }
        println!("{:<9} target ranked first for {first}/{} queries", system.name(), test.len());
    }

    let model = fit_model(train, System::Macneto, &PipelineConfig::default(), vocab.fingerprint())?;
    let index = model.build_index(&known)?;
    let q = &test[0];
    println!("\n{}-ob, closest known app {}:", q.app_id, index.best(&model.embed_query(&q.original)?)?);
    for hit in model.query(&index, &q.obfuscated, 5)?.hits {
        println!("  {:<10} {:.4}", hit.app_id, hit.similarity);
    }
    Ok(())
}
