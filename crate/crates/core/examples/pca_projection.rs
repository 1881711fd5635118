//! Fits principal components to a generated corpus and reports how much
//! variance the leading components keep.

use macneto::corpus::synth_features;
use macneto::features::{FeatureOptions, InstructionVocabulary};
use macneto::pca::fit_pca;
use macneto::synth::{generate_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = InstructionVocabulary::default_vocabulary();
    let pairs = generate_corpus(150, &SynthConfig::default(), &vocab)?;
    let rows: Vec<Vec<f64>> = synth_features(&pairs, &FeatureOptions::default(), &vocab)
        .into_iter()
        .map(|p| p.original)
        .collect();
    let model = fit_pca(&rows, 32)?;
    let total: f64 = {
        let full = fit_pca(&rows, rows[0].len())?;
        full.explained_variance.iter().sum()
    };
    let mut kept = 0.0;
    for (k, v) in model.explained_variance.iter().enumerate() {
        kept += v;
        if [0, 1, 3, 7, 15, 31].contains(&k) {
            println!("{:>2} components: {:5.1}% of variance", k + 1, 100.0 * kept / total);
        }
    }
    let projected = model.project(&rows[0])?;
    println!("\n{} slots -> {} values; first three: {:.2?}", rows[0].len(), projected.len(), &projected[..3]);
    for w in &model.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
