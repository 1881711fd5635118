//! Suggests description keywords for an obfuscated app from the
//! descriptions of its nearest neighbours.

use macneto::corpus::synth_features;
use macneto::features::{FeatureOptions, InstructionVocabulary};
use macneto::keywords::{fit_tfidf, infer_keywords, TokenizerConfig};
use macneto::model::{fit_model, PipelineConfig};
use macneto::search::System;
use macneto::synth::{generate_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = InstructionVocabulary::default_vocabulary();
    let pairs = generate_corpus(200, &SynthConfig::default(), &vocab)?;
    let features = synth_features(&pairs, &FeatureOptions::default(), &vocab);
    let model = fit_model(&features[1..], System::Macneto, &PipelineConfig::default(), vocab.fingerprint())?;

    // the query's own description stays out of the pool
    let known: Vec<_> = pairs[1..].iter().map(|p| &p.original).collect();
    let descriptions: Vec<&str> = known.iter().filter_map(|a| a.description.as_deref()).collect();
    let tfidf = fit_tfidf(&descriptions, TokenizerConfig::default())?;
    let entries: Vec<(String, Vec<f64>)> = features[1..].iter().map(|p| (p.app_id.clone(), p.original.clone())).collect();
    let index = model.build_index(&entries)?;

    let query = &pairs[0];
    let hits = model.query(&index, &features[0].obfuscated, 5)?.hits;
    let retrieved: Vec<&str> = hits
        .iter()
        .filter_map(|h| known.iter().find(|a| a.app_id == h.app_id))
        .filter_map(|a| a.description.as_deref())
        .collect();
    println!("query {} ({} app)", query.obfuscated.app_id, query.theme);
    println!("actual description: {}", query.original.description.as_deref().unwrap_or(""));
    for k in infer_keywords(&tfidf, &retrieved, 8) {
        println!("  {:<14} {:.3}", k.term, k.score);
    }
    Ok(())
}
