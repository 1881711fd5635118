//! Times the same searches over full distributions and over their
//! 32-value projections.

use std::time::Instant;

use macneto::corpus::synth_features;
use macneto::features::{FeatureOptions, InstructionVocabulary};
use macneto::pca::fit_pca;
use macneto::search::{build_index, System};
use macneto::synth::{generate_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = InstructionVocabulary::default_vocabulary();
    let pairs = generate_corpus(1000, &SynthConfig::default(), &vocab)?;
    let features = synth_features(&pairs, &FeatureOptions::default(), &vocab);
    let originals: Vec<Vec<f64>> = features.iter().map(|p| p.original.clone()).collect();
    let pca = fit_pca(&originals, 32)?;

    let full: Vec<(String, Vec<f64>)> = features.iter().map(|p| (p.app_id.clone(), p.original.clone())).collect();
    let low: Vec<(String, Vec<f64>)> = full.iter().map(|(id, v)| Ok((id.clone(), pca.project(v)?))).collect::<Result<_, macneto::pca::PcaError>>()?;
    let queries: Vec<Vec<f64>> = features.iter().map(|p| p.obfuscated.clone()).collect();
    let low_queries: Vec<Vec<f64>> = queries.iter().map(|q| pca.project(q)).collect::<Result<_, _>>()?;

    let full_index = build_index(full, System::Naive)?;
    let low_index = build_index(low, System::PurePca)?;
    let time = |index: &macneto::search::SearchIndex, qs: &[Vec<f64>]| {
        let start = Instant::now();
        for q in qs {
            index.search(q, 10).unwrap();
        }
        start.elapsed().as_secs_f64()
    };
    let (t_full, t_low) = (time(&full_index, &queries), time(&low_index, &low_queries));
    println!("{} slots: {:.4}s for {} queries", full_index.dim(), t_full, queries.len());
    println!("{} values: {:.4}s", low_index.dim(), t_low);
    println!("speedup {:.1}x", t_full / t_low);
    Ok(())
}
