//! Cross-validated comparison of the three systems on a generated corpus.

use macneto::corpus::synth_features;
use macneto::features::{FeatureOptions, InstructionVocabulary};
use macneto::search::{kfold_evaluate, EvalConfig};
use macneto::synth::{generate_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = InstructionVocabulary::default_vocabulary();
    let pairs = generate_corpus(240, &SynthConfig::default(), &vocab)?;
    let features = synth_features(&pairs, &FeatureOptions::default(), &vocab);
    let report = kfold_evaluate(&features, &EvalConfig::default(), vocab.fingerprint())?;
    print!("{}", report.render_table());
    Ok(())
}
